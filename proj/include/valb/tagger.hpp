#pragma once

// End-to-end tagging of raw log messages with a trained model.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "valb/corpus.hpp"
#include "valb/embed.hpp"
#include "valb/errors.hpp"
#include "valb/eval.hpp"
#include "valb/model.hpp"
#include "valb/network.hpp"

namespace valb {

template <class S>
EncodedLog encode_for(const TaggerModel<S>& model, std::span<const Token> tokens) {
  return encode_tokens(tokens, model.words, model.chars, model.hp.max_word_len);
}

template <class S>
AnnotatedLog tag_tokens(const TaggerModel<S>& model, std::vector<Token> tokens) {
  const auto ids = decode_indices(encode_for(model, tokens), model);
  AnnotatedLog out;
  out.tokens = std::move(tokens);
  out.tags.reserve(ids.size());
  for (int i : ids) out.tags.push_back(model.tags[static_cast<std::size_t>(i)]);
  return out;
}

/// tokenize -> encode -> emissions (inference mode) -> Viterbi.
template <class S>
AnnotatedLog tag_log(const TaggerModel<S>& model, std::string_view raw) {
  return tag_tokens(model, tokenize(raw));
}

struct TaggedLine {
  std::optional<AnnotatedLog> log;  // nullopt when the line was empty
  std::string error;
};

/// Tags raw lines on up to `threads` workers. Output order and content do
/// not depend on the thread count.
template <class S>
std::vector<TaggedLine> tag_lines(const TaggerModel<S>& model,
                                  std::span<const std::string> lines, unsigned threads = 1) {
  std::vector<TaggedLine> out(lines.size());
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < lines.size(); i += step) {
      try {
        out[i].log = tag_log(model, lines[i]);
      } catch (const EmptyLog& e) {
        out[i].error = e.what();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(lines.size())));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    for (auto& th : pool) th.join();
  }
  return out;
}

/// Tags the token sequences of `golds`.
template <class S>
std::vector<AnnotatedLog> predict(const TaggerModel<S>& model,
                                  std::span<const AnnotatedLog> golds) {
  std::vector<AnnotatedLog> preds;
  preds.reserve(golds.size());
  for (const auto& g : golds) preds.push_back(tag_tokens(model, g.tokens));
  return preds;
}

/// Gold tag indices of `log` under the model's tag ordering. Throws
/// ModeError when a tag is not in the model's alphabet.
template <class S>
std::vector<int> gold_indices(const TaggerModel<S>& model, const AnnotatedLog& log) {
  std::vector<int> ids;
  ids.reserve(log.tags.size());
  for (const Tag& t : log.tags) {
    const int i = model.tag_index(t);
    if (i < 0)
      throw ModeError("tag " + to_string(t) + " is not in the " +
                      std::string(to_string(model.mode)) + " tag set");
    ids.push_back(i);
  }
  return ids;
}

/// Scores the model on `golds`. A binary model refuses category-level gold
/// annotations unless `opts.collapse` is set.
template <class S>
MetricsReport evaluate_model(const TaggerModel<S>& model,
                             std::span<const AnnotatedLog> golds,
                             EvalOptions opts = {}) {
  if (model.mode == Mode::Binary && !opts.collapse) {
    for (const auto& g : golds)
      for (const Tag& t : g.tags)
        if (t.is_variable() && t.category != Category::Var)
          throw ModeError(
              "binary model cannot be scored on category-level annotations "
              "without explicit collapse");
  }
  const auto preds = predict(model, golds);
  return evaluate(preds, golds, opts);
}

}  // namespace valb
