#pragma once

// Variable-aware templates: tagged logs become templates in which chosen
// variable categories keep their values and all others become wildcards.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "valb/corpus.hpp"
#include "valb/eval.hpp"
#include "valb/model.hpp"
#include "valb/tagger.hpp"
#include "valb/taxonomy.hpp"
#include "valb/util.hpp"

namespace valb {

inline constexpr std::string_view kWildcard = "<*>";

struct Extraction {
  Category category;
  std::string value;       // space-joined tokens of the run
  std::size_t start, end;  // token span [start, end)
  bool preserved = false;
  friend bool operator==(const Extraction&, const Extraction&) = default;
};

struct ParseResult {
  std::string template_text;  // with preserved values filled in
  std::string canonical;      // every variable as the wildcard
  std::uint64_t template_id = 0;  // hash of `canonical`
  std::size_t ordinal = 0;        // dense first-seen index within a store
  std::vector<Extraction> extractions;
};

using PreserveSet = std::set<Category>;

/// Template ids are FNV-1a of the canonical template text.
inline std::uint64_t template_id(std::string_view canonical) { return fnv1a64(canonical); }

/// Each maximal B-X(+I-X) run is one variable occurrence. Runs whose
/// category is in `preserve` render as their text; other runs render as
/// `wildcard`. The canonical template abstracts every run.
inline ParseResult extract_template(const AnnotatedLog& log, const PreserveSet& preserve,
                                    std::string_view wildcard = kWildcard) {
  ParseResult r;
  const auto spans = extract_spans(log.tags);
  std::vector<std::string> shown, canonical;
  std::size_t next = 0;
  for (std::size_t t = 0; t < log.size();) {
    if (next < spans.size() && spans[next].start == t) {
      const Span& s = spans[next++];
      Extraction e{s.category,
                   join_tokens(std::span<const Token>(log.tokens).subspan(s.start, s.end - s.start)),
                   s.start, s.end, preserve.count(s.category) > 0};
      shown.push_back(e.preserved ? e.value : std::string(wildcard));
      canonical.emplace_back(wildcard);
      r.extractions.push_back(std::move(e));
      t = s.end;
    } else {
      shown.push_back(log.tokens[t]);
      canonical.push_back(log.tokens[t]);
      ++t;
    }
  }
  r.template_text = join_tokens(shown);
  r.canonical = join_tokens(canonical);
  r.template_id = template_id(r.canonical);
  return r;
}

/// Rebuilds the space-joined message from a canonical template and its
/// extractions.
inline std::string reconstruct(const ParseResult& r, std::string_view wildcard = kWildcard) {
  const auto pieces = tokenize(r.canonical);
  std::vector<std::string> out;
  std::size_t pos = 0, next = 0;
  for (const auto& piece : pieces) {
    if (next < r.extractions.size() && r.extractions[next].start == pos && piece == wildcard) {
      out.push_back(r.extractions[next].value);
      pos = r.extractions[next].end;
      ++next;
    } else {
      out.push_back(piece);
      ++pos;
    }
  }
  return join_tokens(out);
}

struct TemplateEntry {
  std::uint64_t id = 0;
  std::size_t ordinal = 0;
  std::string canonical;
  std::size_t count = 0;
};

/// Interns canonical templates; ordinals follow first-seen order.
class TemplateStore {
 public:
  const TemplateEntry& intern(const std::string& canonical) {
    auto it = index_.find(canonical);
    if (it == index_.end()) {
      it = index_.emplace(canonical, entries_.size()).first;
      entries_.push_back({template_id(canonical), entries_.size(), canonical, 0});
    }
    TemplateEntry& e = entries_[it->second];
    ++e.count;
    return e;
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<TemplateEntry>& entries() const { return entries_; }
  const TemplateEntry* find(const std::string& canonical) const {
    auto it = index_.find(canonical);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

 private:
  std::vector<TemplateEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ParseError {
  std::size_t line_index;  // 0-based position in the input
  std::string message;
};

struct CorpusParse {
  std::vector<std::optional<ParseResult>> results;  // nullopt for failed lines
  std::vector<ParseError> errors;
  TemplateStore store;
};

/// Tags each raw log (optionally on `threads` workers; results do not
/// depend on the thread count), extracts templates, and interns canonical
/// templates in input order. Empty lines are reported and skipped.
template <class S>
CorpusParse parse_corpus(const TaggerModel<S>& model, std::span<const std::string> raw_logs,
                         const PreserveSet& preserve, std::string_view wildcard = kWildcard,
                         unsigned threads = 1) {
  if (model.mode == Mode::Binary && !preserve.empty())
    throw ModeError("a binary model cannot preserve variable categories");
  CorpusParse out;
  out.results.resize(raw_logs.size());
  auto tagged = tag_lines(model, raw_logs, threads);

  for (std::size_t i = 0; i < raw_logs.size(); ++i) {
    if (!tagged[i].log) {
      out.errors.push_back({i, tagged[i].error});
      continue;
    }
    ParseResult r = extract_template(*tagged[i].log, preserve, wildcard);
    r.ordinal = out.store.intern(r.canonical).ordinal;
    out.results[i] = std::move(r);
  }
  return out;
}

inline nlohmann::json to_json(const ParseResult& r, std::size_t line_no) {
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& e : r.extractions)
    ex.push_back({{"category", abbreviation(e.category)},
                  {"value", e.value},
                  {"start", e.start},
                  {"end", e.end},
                  {"preserved", e.preserved}});
  return {{"line_no", line_no},
          {"template_id", hex64(r.template_id)},
          {"ordinal", r.ordinal},
          {"template", r.template_text},
          {"canonical_template", r.canonical},
          {"extractions", ex}};
}

inline nlohmann::json to_json(const TemplateEntry& e) {
  return {{"template_id", hex64(e.id)},
          {"ordinal", e.ordinal},
          {"canonical_template", e.canonical},
          {"count", e.count}};
}

/// Comma-separated abbreviations; empty input means the empty set.
/// Throws std::invalid_argument naming the valid abbreviations.
inline PreserveSet parse_preserve_list(std::string_view list) {
  PreserveSet out;
  std::size_t i = 0;
  while (i <= list.size()) {
    std::size_t j = list.find(',', i);
    if (j == std::string_view::npos) j = list.size();
    std::string_view item = list.substr(i, j - i);
    while (!item.empty() && is_space(item.front())) item.remove_prefix(1);
    while (!item.empty() && is_space(item.back())) item.remove_suffix(1);
    if (!item.empty()) {
      auto c = parse_category(item);
      if (!c) {
        std::string valid;
        for (Category k : kCategories) {
          if (!valid.empty()) valid += ", ";
          valid += abbreviation(k);
        }
        throw std::invalid_argument("unknown category '" + std::string(item) +
                                    "'; valid: " + valid);
      }
      out.insert(*c);
    }
    i = j + 1;
  }
  return out;
}

}  // namespace valb
