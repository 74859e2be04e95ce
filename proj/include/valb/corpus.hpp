#pragma once

// Tokenization, the tab-separated annotation format, wildcard-template
// alignment and dataset splitting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "valb/errors.hpp"
#include "valb/taxonomy.hpp"
#include "valb/util.hpp"

namespace valb {

/// A whitespace-free, non-empty word of a log message.
using Token = std::string;

struct AnnotatedLog {
  std::vector<Token> tokens;
  std::vector<Tag> tags;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const AnnotatedLog&, const AnnotatedLog&) = default;
};

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

/// Splits on runs of whitespace. Punctuation stays attached.
inline std::vector<Token> tokenize(std::string_view raw) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && is_space(raw[i])) ++i;
    std::size_t start = i;
    while (i < raw.size() && !is_space(raw[i])) ++i;
    if (i > start) tokens.emplace_back(raw.substr(start, i - start));
  }
  if (tokens.empty()) throw EmptyLog();
  return tokens;
}

inline std::string join_tokens(std::span<const Token> tokens,
                               std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

/// Throws std::invalid_argument if `log` breaks the AnnotatedLog invariants.
inline void validate(const AnnotatedLog& log) {
  if (log.tokens.empty()) throw std::invalid_argument("log has no tokens");
  if (log.tokens.size() != log.tags.size())
    throw std::invalid_argument("token/tag count mismatch");
  for (const Token& t : log.tokens) {
    if (t.empty() || std::any_of(t.begin(), t.end(), is_space))
      throw std::invalid_argument("invalid token '" + t + "'");
  }
  if (!is_well_formed(log.tags))
    throw std::invalid_argument("ill-formed IOB sequence");
}

// ---------------------------------------------------------------------------
// Annotation files

struct ReadDiagnostic {
  std::size_t line;
  std::string message;
};

struct ReadOptions {
  /// Throw on the first bad entry instead of skipping it.
  bool strict = true;
};

struct ReadResult {
  std::vector<AnnotatedLog> logs;
  std::vector<ReadDiagnostic> skipped;
};

/// Parses "token<TAB>tag" lines, logs separated by blank lines, "# "
/// comment lines ignored.
inline ReadResult parse_annotations(std::string_view text,
                                    ReadOptions opts = {}) {
  ReadResult result;
  AnnotatedLog current;
  std::size_t block_line = 0;
  std::optional<ReadDiagnostic> block_error;

  auto fail = [&](std::optional<ReadDiagnostic>& slot, auto&& error) {
    if (opts.strict) throw error;
    if (!slot) slot = ReadDiagnostic{error.line(), error.what()};
  };

  auto flush = [&] {
    if (current.tokens.empty()) {
      block_error.reset();
      return;
    }
    if (!block_error && !is_well_formed(current.tags))
      fail(block_error, IOBError("ill-formed IOB tag sequence", block_line));
    if (block_error)
      result.skipped.push_back(*block_error);
    else
      result.logs.push_back(std::move(current));
    current = {};
    block_error.reset();
  };

  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string& line = lines[n];
    const std::size_t lineno = n + 1;
    if (line.rfind("# ", 0) == 0 || line == "#") continue;
    if (std::all_of(line.begin(), line.end(), is_space)) {
      flush();
      continue;
    }
    if (current.tokens.empty()) block_line = lineno;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 ||
        line.find('\t', tab + 1) != std::string::npos) {
      fail(block_error, FormatError("expected 'token<TAB>tag'", lineno));
      current.tokens.emplace_back("?");
      current.tags.push_back(Tag::outside());
      continue;
    }
    std::string token = line.substr(0, tab);
    std::string_view tag_text = std::string_view(line).substr(tab + 1);
    while (!tag_text.empty() && is_space(tag_text.back()))
      tag_text.remove_suffix(1);
    if (std::any_of(token.begin(), token.end(), is_space))
      fail(block_error, FormatError("token contains whitespace", lineno));
    auto tag = parse_tag(tag_text);
    if (!tag) {
      fail(block_error,
           TagError("unknown tag '" + std::string(tag_text) + "'", lineno));
      tag = Tag::outside();
    }
    current.tokens.push_back(std::move(token));
    current.tags.push_back(*tag);
  }
  flush();
  return result;
}

inline std::vector<AnnotatedLog> read_annotations(
    const std::filesystem::path& path) {
  return parse_annotations(read_file(path)).logs;
}

inline std::string format_annotations(std::span<const AnnotatedLog> logs) {
  std::string out;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (i) out += '\n';
    const AnnotatedLog& log = logs[i];
    for (std::size_t t = 0; t < log.size(); ++t) {
      out += log.tokens[t];
      out += '\t';
      out += to_string(log.tags[t]);
      out += '\n';
    }
  }
  return out;
}

inline void write_annotations(std::span<const AnnotatedLog> logs,
                              const std::filesystem::path& path) {
  write_file_atomic(path, format_annotations(logs));
}

/// True if any tag uses the VAR pseudo-category.
inline bool uses_pseudo_category(std::span<const AnnotatedLog> logs) {
  for (const auto& log : logs)
    for (const Tag& t : log.tags)
      if (t.is_variable() && t.category == Category::Var) return true;
  return false;
}

/// True if any tag uses one of the real categories.
inline bool uses_real_category(std::span<const AnnotatedLog> logs) {
  for (const auto& log : logs)
    for (const Tag& t : log.tags)
      if (t.is_variable() && t.category != Category::Var) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Deriving binary annotations from wildcard templates

namespace detail {

inline bool is_wildcard(std::string_view tok) {
  return tok == "<*>" || tok == "*";
}

/// Glob match where each "<*>" in `pattern` matches any (possibly empty)
/// substring.
inline bool glob_match(std::string_view pattern, std::string_view text) {
  constexpr std::string_view star = "<*>";
  const auto first = pattern.find(star);
  if (first == std::string_view::npos) return pattern == text;
  if (text.substr(0, first) != pattern.substr(0, first)) return false;
  pattern.remove_prefix(first + star.size());
  text.remove_prefix(first);
  for (std::size_t skip = 0; skip <= text.size(); ++skip)
    if (glob_match(pattern, text.substr(skip))) return true;
  return false;
}

}  // namespace detail

/// Aligns content tokens to a template whose tokens are static words,
/// whole-token wildcards ("<*>" or "*", matching one or more tokens) or
/// words with embedded "<*>" (matching exactly one token). Among
/// consistent alignments, each wildcard takes the shortest run, scanning
/// left to right.
inline AnnotatedLog derive_binary_annotations(std::string_view content,
                                              std::string_view template_text) {
  const std::vector<Token> tokens = tokenize(content);
  std::vector<Token> pattern;
  try {
    pattern = tokenize(template_text);
  } catch (const EmptyLog&) {
    throw AlignmentError("empty template");
  }

  const std::size_t m = pattern.size(), n = tokens.size();
  // failed[i * (n + 1) + j]: pattern[i..] cannot align with tokens[j..].
  std::vector<char> failed((m + 1) * (n + 1), 0);
  std::vector<Tag> tags(n, Tag::outside());

  auto align = [&](auto&& self, std::size_t i, std::size_t j) -> bool {
    if (i == m) return j == n;
    if (failed[i * (n + 1) + j]) return false;
    const Token& p = pattern[i];
    if (detail::is_wildcard(p)) {
      for (std::size_t k = 1; j + k <= n; ++k) {
        if (self(self, i + 1, j + k)) {
          tags[j] = Tag::begin(Category::Var);
          for (std::size_t q = j + 1; q < j + k; ++q)
            tags[q] = Tag::inside(Category::Var);
          return true;
        }
      }
    } else if (j < n) {
      const bool embedded = p.find("<*>") != std::string::npos;
      if (embedded ? detail::glob_match(p, tokens[j]) : p == tokens[j]) {
        if (self(self, i + 1, j + 1)) {
          tags[j] = embedded ? Tag::begin(Category::Var) : Tag::outside();
          return true;
        }
      }
    }
    failed[i * (n + 1) + j] = 1;
    return false;
  };

  if (!align(align, 0, 0))
    throw AlignmentError("template '" + std::string(template_text) +
                         "' does not align with content");
  return {tokens, std::move(tags)};
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_frac = 0.2;
  double val_frac = 0.2;
  double test_frac = 0.6;
  std::uint64_t seed = 42;

  void validate() const {
    for (double f : {train_frac, val_frac, test_frac})
      if (!(f > 0.0 && f < 1.0))
        throw std::invalid_argument("split fractions must lie in (0, 1)");
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
      throw std::invalid_argument("split fractions must sum to 1");
  }
};

struct DatasetSplit {
  std::vector<AnnotatedLog> train, val, test;
};

/// Seeded shuffle, then floor(frac * N) logs to train and val; the
/// remainder goes to test.
inline DatasetSplit split_dataset(std::span<const AnnotatedLog> logs,
                                  const SplitSpec& spec) {
  spec.validate();
  if (logs.size() < 5)
    throw std::invalid_argument("split_dataset needs at least 5 logs");
  const std::size_t n = logs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);

  const auto count = [n](double frac) {
    return static_cast<std::size_t>(std::floor(frac * double(n) + 1e-9));
  };
  const std::size_t n_train = count(spec.train_frac);
  const std::size_t n_val = count(spec.val_frac);

  DatasetSplit out;
  for (std::size_t k = 0; k < n; ++k) {
    const AnnotatedLog& log = logs[order[k]];
    if (k < n_train)
      out.train.push_back(log);
    else if (k < n_train + n_val)
      out.val.push_back(log);
    else
      out.test.push_back(log);
  }
  return out;
}

}  // namespace valb
