#pragma once

// General accuracy, variable-aware accuracy and per-category
// precision/recall/F1 over gold and predicted annotations.

#include <algorithm>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "valb/corpus.hpp"
#include "valb/errors.hpp"
#include "valb/taxonomy.hpp"

namespace valb {

/// Throws TokenMismatch at the first pair whose tokens differ.
inline void check_aligned(std::span<const AnnotatedLog> preds,
                          std::span<const AnnotatedLog> golds) {
  if (preds.size() != golds.size())
    throw TokenMismatch(std::min(preds.size(), golds.size()),
                        "prediction and gold sets differ in size (" +
                            std::to_string(preds.size()) + " vs " +
                            std::to_string(golds.size()) + ")");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].tokens != golds[i].tokens)
      throw TokenMismatch(i, "token sequences differ");
    if (preds[i].tags.size() != preds[i].tokens.size() ||
        golds[i].tags.size() != golds[i].tokens.size())
      throw TokenMismatch(i, "tag count differs from token count");
  }
}

/// Fraction of logs whose static/variable split matches the gold one.
inline double general_accuracy(std::span<const AnnotatedLog> preds,
                               std::span<const AnnotatedLog> golds) {
  check_aligned(preds, golds);
  if (preds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    correct += collapse_binary(preds[i].tags) == collapse_binary(golds[i].tags);
  return double(correct) / double(preds.size());
}

/// Fraction of logs whose tags match the gold tags exactly.
inline double variable_aware_accuracy(std::span<const AnnotatedLog> preds,
                                      std::span<const AnnotatedLog> golds) {
  check_aligned(preds, golds);
  if (preds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    correct += preds[i].tags == golds[i].tags;
  return double(correct) / double(preds.size());
}

struct Span {
  Category category;
  std::size_t start, end;  // token range [start, end)
  friend bool operator==(const Span&, const Span&) = default;
};

/// Maximal runs of B-X followed by I-X. A stray I-X (no matching
/// predecessor) opens a new span.
inline std::vector<Span> extract_spans(std::span<const Tag> tags) {
  std::vector<Span> spans;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const Tag& tag = tags[t];
    if (tag.is_outside()) continue;
    const bool continues = tag.kind == TagKind::Inside && !spans.empty() &&
                           spans.back().end == t &&
                           spans.back().category == tag.category;
    if (continues)
      spans.back().end = t + 1;
    else
      spans.push_back({tag.category, t, t + 1});
  }
  return spans;
}

struct CategoryScore {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;

  void finalize() {
    precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  bool present() const { return tp + fp + fn > 0; }
};

struct PrfTable {
  std::map<Category, CategoryScore> categories;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  std::size_t macro_count = 0;  // categories with any TP/FP/FN

  const CategoryScore& at(Category c) const {
    static const CategoryScore empty;
    auto it = categories.find(c);
    return it == categories.end() ? empty : it->second;
  }
};

/// Span-level (exact category and boundaries) scores by default; with
/// `token_level` every variable token is scored on its category alone.
inline PrfTable category_prf(std::span<const AnnotatedLog> preds,
                             std::span<const AnnotatedLog> golds,
                             bool token_level = false) {
  check_aligned(preds, golds);
  PrfTable table;
  for (Category c : kCategories) table.categories[c];
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (token_level) {
      for (std::size_t t = 0; t < preds[i].size(); ++t) {
        const Tag& p = preds[i].tags[t];
        const Tag& g = golds[i].tags[t];
        const bool same = p.is_variable() && g.is_variable() && p.category == g.category;
        if (same) {
          ++table.categories[p.category].tp;
          continue;
        }
        if (p.is_variable()) ++table.categories[p.category].fp;
        if (g.is_variable()) ++table.categories[g.category].fn;
      }
      continue;
    }
    const auto ps = extract_spans(preds[i].tags);
    const auto gs = extract_spans(golds[i].tags);
    for (const Span& s : ps) {
      const bool hit = std::find(gs.begin(), gs.end(), s) != gs.end();
      ++(hit ? table.categories[s.category].tp : table.categories[s.category].fp);
    }
    for (const Span& s : gs)
      if (std::find(ps.begin(), ps.end(), s) == ps.end()) ++table.categories[s.category].fn;
  }
  for (auto& [cat, score] : table.categories) {
    score.finalize();
    if (!score.present()) continue;
    ++table.macro_count;
    table.macro_precision += score.precision;
    table.macro_recall += score.recall;
    table.macro_f1 += score.f1;
  }
  if (table.macro_count) {
    table.macro_precision /= double(table.macro_count);
    table.macro_recall /= double(table.macro_count);
    table.macro_f1 /= double(table.macro_count);
  }
  return table;
}

struct MetricsReport {
  std::size_t logs = 0;
  std::size_t general_correct = 0;
  std::size_t variable_aware_correct = 0;
  double general_accuracy = 0;
  double variable_aware_accuracy = 0;
  bool token_level = false;
  PrfTable prf;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["logs"] = logs;
    j["general_correct"] = general_correct;
    j["variable_aware_correct"] = variable_aware_correct;
    j["general_accuracy"] = general_accuracy;
    j["variable_aware_accuracy"] = variable_aware_accuracy;
    j["prf_level"] = token_level ? "token" : "span";
    auto& cats = j["categories"] = nlohmann::json::object();
    for (const auto& [c, s] : prf.categories)
      cats[std::string(abbreviation(c))] = {{"tp", s.tp},         {"fp", s.fp},
                                            {"fn", s.fn},         {"precision", s.precision},
                                            {"recall", s.recall}, {"f1", s.f1}};
    j["macro"] = {{"precision", prf.macro_precision},
                  {"recall", prf.macro_recall},
                  {"f1", prf.macro_f1},
                  {"categories", prf.macro_count}};
    return j;
  }

  std::string to_text() const {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-26s %zu\n", "logs", logs);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-26s %.4f (%zu/%zu)\n", "general accuracy",
                  general_accuracy, general_correct, logs);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-26s %.4f (%zu/%zu)\n", "variable-aware accuracy",
                  variable_aware_accuracy, variable_aware_correct, logs);
    out += buf;
    std::snprintf(buf, sizeof buf, "\n%-8s %6s %6s %6s %9s %9s %9s\n", "category",
                  "TP", "FP", "FN", "precision", "recall", "F1");
    out += buf;
    for (const auto& [c, s] : prf.categories) {
      std::snprintf(buf, sizeof buf, "%-8s %6zu %6zu %6zu %9.4f %9.4f %9.4f\n",
                    std::string(abbreviation(c)).c_str(), s.tp, s.fp, s.fn,
                    s.precision, s.recall, s.f1);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-8s %20s %9.4f %9.4f %9.4f\n", "macro",
                  token_level ? "(token level)" : "(span level)",
                  prf.macro_precision, prf.macro_recall, prf.macro_f1);
    out += buf;
    return out;
  }
};

/// Rejects mixing VAR-only (binary) annotations with category-level ones
/// unless `collapse` is set, in which case both sides are mapped to VAR.
/// All-static logs are compatible with either side.
inline std::pair<std::vector<AnnotatedLog>, std::vector<AnnotatedLog>>
reconcile_modes(std::span<const AnnotatedLog> preds,
                std::span<const AnnotatedLog> golds, bool collapse) {
  std::vector<AnnotatedLog> p(preds.begin(), preds.end()), g(golds.begin(), golds.end());
  if (!collapse) {
    if ((uses_pseudo_category(preds) && uses_real_category(golds)) ||
        (uses_real_category(preds) && uses_pseudo_category(golds)))
      throw ModeError(
          "binary (VAR) annotations cannot be scored against category-level "
          "annotations without explicit collapse");
    return {std::move(p), std::move(g)};
  }
  for (auto& log : p) log.tags = collapse_to_pseudo(log.tags);
  for (auto& log : g) log.tags = collapse_to_pseudo(log.tags);
  return {std::move(p), std::move(g)};
}

struct EvalOptions {
  bool token_level = false;
  bool collapse = false;
};

inline MetricsReport evaluate(std::span<const AnnotatedLog> preds,
                              std::span<const AnnotatedLog> golds,
                              EvalOptions opts = {}) {
  check_aligned(preds, golds);
  const auto [p, g] = reconcile_modes(preds, golds, opts.collapse);
  MetricsReport r;
  r.logs = p.size();
  r.token_level = opts.token_level;
  for (std::size_t i = 0; i < p.size(); ++i) {
    r.general_correct += collapse_binary(p[i].tags) == collapse_binary(g[i].tags);
    r.variable_aware_correct += p[i].tags == g[i].tags;
  }
  r.general_accuracy = r.logs ? double(r.general_correct) / double(r.logs) : 0.0;
  r.variable_aware_accuracy =
      r.logs ? double(r.variable_aware_correct) / double(r.logs) : 0.0;
  r.prf = category_prf(p, g, opts.token_level);
  return r;
}

}  // namespace valb
