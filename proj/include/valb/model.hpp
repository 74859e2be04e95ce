#pragma once

// Tagger hyperparameters, weight tensors and initialization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "valb/embed.hpp"
#include "valb/taxonomy.hpp"
#include "valb/tensor.hpp"
#include "valb/util.hpp"

namespace valb {

/// Score given to IOB-violating transitions. These entries never change.
inline constexpr double kForbiddenScore = -10000.0;

struct Hyperparams {
  int word_dim = 100;
  int char_emb_dim = 300;
  int char_filters = 50;
  int char_kernel = 3;
  int lstm_hidden = 128;  // per direction
  double dropout = 0.2;
  int max_word_len = 30;
  /// When false the char-CNN channel is absent and the Bi-LSTM reads word
  /// embeddings only (the word-embedding baseline).
  bool use_char = true;

  int input_dim() const { return word_dim + (use_char ? char_filters : 0); }

  void validate() const {
    if (word_dim < 1 || char_emb_dim < 1 || char_filters < 1 ||
        char_kernel < 1 || lstm_hidden < 1 || max_word_len < 1)
      throw std::invalid_argument("hyperparameters must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw std::invalid_argument("dropout must lie in [0, 1)");
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// All trainable tensors. Biases and CRF boundary scores are vectors;
/// LSTM gate blocks are stacked in the order input, forget, cell, output.
template <class S>
struct Parameters {
  Matrix<S> char_embedding;  // |chars| x char_emb_dim
  Matrix<S> conv_kernel;     // (char_kernel * char_emb_dim) x char_filters
  Vector<S> conv_bias;       // char_filters
  Matrix<S> word_embedding;  // |words| x word_dim
  Matrix<S> fw_input, fw_recurrent;  // 4H x input_dim, 4H x H
  Vector<S> fw_bias;                 // 4H
  Matrix<S> bw_input, bw_recurrent;
  Vector<S> bw_bias;
  Matrix<S> projection;  // n_tags x 2H
  Vector<S> projection_bias;
  Matrix<S> transitions;  // n_tags x n_tags, (from, to)
  Vector<S> start, end;

  /// Calls f(name, tensor, shape) for every tensor, in serialization order.
  /// Char tensors are skipped when `with_char` is false.
  template <class P, class F>
  static void visit(P& p, bool with_char, int char_kernel, F&& f) {
    using Shape = std::vector<std::int64_t>;
    auto mat = [](const auto& m) { return Shape{m.rows(), m.cols()}; };
    auto vec = [](const auto& v) { return Shape{v.size()}; };
    if (with_char) {
      f("char_embedding", p.char_embedding, mat(p.char_embedding));
      const std::int64_t k = char_kernel;
      f("conv_kernel", p.conv_kernel,
        Shape{k, p.conv_kernel.rows() / std::max<std::int64_t>(k, 1), p.conv_kernel.cols()});
      f("conv_bias", p.conv_bias, vec(p.conv_bias));
    }
    f("word_embedding", p.word_embedding, mat(p.word_embedding));
    f("lstm_fw_input", p.fw_input, mat(p.fw_input));
    f("lstm_fw_recurrent", p.fw_recurrent, mat(p.fw_recurrent));
    f("lstm_fw_bias", p.fw_bias, vec(p.fw_bias));
    f("lstm_bw_input", p.bw_input, mat(p.bw_input));
    f("lstm_bw_recurrent", p.bw_recurrent, mat(p.bw_recurrent));
    f("lstm_bw_bias", p.bw_bias, vec(p.bw_bias));
    f("projection", p.projection, mat(p.projection));
    f("projection_bias", p.projection_bias, vec(p.projection_bias));
    f("crf_transitions", p.transitions, mat(p.transitions));
    f("crf_start", p.start, vec(p.start));
    f("crf_end", p.end, vec(p.end));
  }

  /// Same shapes, all zeros.
  Parameters zeros_like() const {
    Parameters z = *this;
    visit(z, true, 1, [](std::string_view, auto& t, const auto&) { t.setZero(); });
    return z;
  }

  template <class T>
  Parameters<T> cast() const {
    Parameters<T> out;
    out.char_embedding = char_embedding.template cast<T>();
    out.conv_kernel = conv_kernel.template cast<T>();
    out.conv_bias = conv_bias.template cast<T>();
    out.word_embedding = word_embedding.template cast<T>();
    out.fw_input = fw_input.template cast<T>();
    out.fw_recurrent = fw_recurrent.template cast<T>();
    out.fw_bias = fw_bias.template cast<T>();
    out.bw_input = bw_input.template cast<T>();
    out.bw_recurrent = bw_recurrent.template cast<T>();
    out.bw_bias = bw_bias.template cast<T>();
    out.projection = projection.template cast<T>();
    out.projection_bias = projection_bias.template cast<T>();
    out.transitions = transitions.template cast<T>();
    out.start = start.template cast<T>();
    out.end = end.template cast<T>();
    return out;
  }
};

template <class S>
struct TaggerModel {
  Hyperparams hp;
  Mode mode = Mode::Multiclass;
  std::vector<Tag> tags;  // index -> tag; equals tag_vocabulary(mode)
  WordVocab words;
  CharVocab chars;
  Parameters<S> params;

  int n_tags() const { return static_cast<int>(tags.size()); }

  template <class F>
  void visit(F&& f) {
    Parameters<S>::visit(params, hp.use_char, hp.char_kernel, f);
  }
  template <class F>
  void visit(F&& f) const {
    Parameters<S>::visit(params, hp.use_char, hp.char_kernel, f);
  }

  int tag_index(const Tag& t) const {
    for (std::size_t i = 0; i < tags.size(); ++i)
      if (tags[i] == t) return static_cast<int>(i);
    return -1;
  }

  /// Transition (from, to) is frozen when it violates IOB well-formedness.
  bool transition_frozen(int from, int to) const {
    return !is_valid_transition(tags[static_cast<std::size_t>(from)],
                                tags[static_cast<std::size_t>(to)]);
  }
  bool start_frozen(int to) const {
    return !is_valid_transition(std::nullopt, tags[static_cast<std::size_t>(to)]);
  }

  template <class T>
  TaggerModel<T> cast() const {
    return {hp, mode, tags, words, chars, params.template cast<T>()};
  }
};

namespace detail {

template <class M>
void fill_uniform(M& m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<typename M::Scalar>(rng.uniform(-bound, bound));
}

}  // namespace detail

/// Deterministic given `seed`. Dense layers are uniform in
/// [-sqrt(1/fan_in), sqrt(1/fan_in)]; embeddings uniform in [-0.25, 0.25]
/// with zero PAD rows (word rows copied from `pretrained` where present);
/// CRF scores start at zero except IOB-violating ones, which are fixed at
/// kForbiddenScore.
template <class S = float>
TaggerModel<S> init_model(const Hyperparams& hp, Mode mode, WordVocab words,
                          CharVocab chars,
                          const PretrainedVectors* pretrained = nullptr,
                          std::uint64_t seed = 42) {
  hp.validate();
  Rng rng(seed);
  TaggerModel<S> m;
  m.hp = hp;
  m.mode = mode;
  m.tags = tag_vocabulary(mode);
  m.words = std::move(words);
  m.chars = std::move(chars);
  auto& p = m.params;
  const int n = m.n_tags();
  const int H = hp.lstm_hidden;
  const int in = hp.input_dim();

  if (hp.use_char) {
    p.char_embedding.resize(static_cast<Eigen::Index>(m.chars.size()), hp.char_emb_dim);
    detail::fill_uniform(p.char_embedding, 0.25, rng);
    p.char_embedding.row(kPadId).setZero();
    const int fan_in = hp.char_kernel * hp.char_emb_dim;
    p.conv_kernel.resize(fan_in, hp.char_filters);
    detail::fill_uniform(p.conv_kernel, std::sqrt(1.0 / fan_in), rng);
    p.conv_bias.resize(hp.char_filters);
    detail::fill_uniform(p.conv_bias, std::sqrt(1.0 / fan_in), rng);
  }

  p.word_embedding =
      make_embedding_matrix(pretrained, m.words, hp.word_dim, rng).matrix.template cast<S>();

  const double lstm_bound = std::sqrt(1.0 / H);
  for (auto* wx : {&p.fw_input, &p.bw_input}) {
    wx->resize(4 * H, in);
    detail::fill_uniform(*wx, lstm_bound, rng);
  }
  for (auto* wh : {&p.fw_recurrent, &p.bw_recurrent}) {
    wh->resize(4 * H, H);
    detail::fill_uniform(*wh, lstm_bound, rng);
  }
  for (auto* b : {&p.fw_bias, &p.bw_bias}) {
    b->resize(4 * H);
    detail::fill_uniform(*b, lstm_bound, rng);
  }

  const double proj_bound = std::sqrt(1.0 / (2 * H));
  p.projection.resize(n, 2 * H);
  detail::fill_uniform(p.projection, proj_bound, rng);
  p.projection_bias.resize(n);
  detail::fill_uniform(p.projection_bias, proj_bound, rng);

  p.transitions = Matrix<S>::Zero(n, n);
  p.start = Vector<S>::Zero(n);
  p.end = Vector<S>::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (m.start_frozen(i)) p.start[i] = static_cast<S>(kForbiddenScore);
    for (int j = 0; j < n; ++j)
      if (m.transition_frozen(i, j)) p.transitions(i, j) = static_cast<S>(kForbiddenScore);
  }
  return m;
}

}  // namespace valb
