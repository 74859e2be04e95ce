#pragma once

// Forward and backward passes of the char-CNN + word embedding + Bi-LSTM +
// CRF tagger for a single log.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include "valb/crf.hpp"
#include "valb/embed.hpp"
#include "valb/model.hpp"
#include "valb/tensor.hpp"
#include "valb/util.hpp"

namespace valb {

template <class S>
struct LstmTrace {
  Matrix<S> input_gate, forget_gate, cell_gate, output_gate;  // T x H
  Matrix<S> cell, cell_tanh, hidden;                          // T x H
};

/// Intermediate values of one forward pass, kept for the backward pass.
template <class S>
struct Activations {
  // Char CNN: one row per non-PAD character position across the log.
  Matrix<S> windows;  // P x (k * C)
  Matrix<S> conv;     // P x F
  std::vector<int> row_offset;     // first window row of each token
  std::vector<int> pool_argmax;    // T x F, window row or -1
  Matrix<S> input;                 // T x in, after dropout
  Matrix<S> input_mask;            // T x in, empty when no dropout
  LstmTrace<S> fw, bw;
  Matrix<S> lstm_out;              // T x 2H, after dropout
  Matrix<S> lstm_mask;
  Matrix<S> emissions;             // T x n
};

namespace detail {

template <class S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

/// Inverted dropout mask: each entry is 0 with probability p, else 1/(1-p).
template <class S>
Matrix<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix<S> m(rows, cols);
  const S keep = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform() < p ? S(0) : keep;
  return m;
}

template <class S>
void char_cnn_forward(const EncodedLog& enc, const TaggerModel<S>& model,
                      Activations<S>& a, std::type_identity_t<Eigen::Ref<Matrix<S>>> out) {
  const auto& p = model.params;
  const int C = model.hp.char_emb_dim, F = model.hp.char_filters;
  const int k = model.hp.char_kernel, left = (k - 1) / 2;
  const auto T = static_cast<int>(enc.token_count());

  a.row_offset.assign(static_cast<std::size_t>(T) + 1, 0);
  for (int t = 0; t < T; ++t)
    a.row_offset[static_cast<std::size_t>(t) + 1] =
        a.row_offset[static_cast<std::size_t>(t)] + enc.char_lengths[static_cast<std::size_t>(t)];
  const int P = a.row_offset.back();

  a.windows = Matrix<S>::Zero(P, k * C);
  for (int t = 0; t < T; ++t) {
    const int len = enc.char_lengths[static_cast<std::size_t>(t)];
    const int base = a.row_offset[static_cast<std::size_t>(t)];
    for (int pos = 0; pos < len; ++pos)
      for (int q = 0; q < k; ++q) {
        const int src = pos + q - left;
        if (src < 0 || src >= len) continue;  // PAD / out of range: zero
        a.windows.block(base + pos, q * C, 1, C) =
            p.char_embedding.row(enc.char_ids(t, src));
      }
  }
  a.conv = a.windows * p.conv_kernel;
  a.conv.rowwise() += p.conv_bias.transpose();

  a.pool_argmax.assign(static_cast<std::size_t>(T) * static_cast<std::size_t>(F), -1);
  for (int t = 0; t < T; ++t) {
    const int begin = a.row_offset[static_cast<std::size_t>(t)];
    const int end = a.row_offset[static_cast<std::size_t>(t) + 1];
    for (int f = 0; f < F; ++f) {
      if (begin == end) {
        out(t, f) = p.conv_bias[f];
        continue;
      }
      int best = begin;
      for (int r = begin + 1; r < end; ++r)
        if (a.conv(r, f) > a.conv(best, f)) best = r;
      out(t, f) = a.conv(best, f);
      a.pool_argmax[static_cast<std::size_t>(t) * static_cast<std::size_t>(F) + static_cast<std::size_t>(f)] = best;
    }
  }
}

/// Runs one LSTM direction over X (T x in). `reverse` walks t = T-1 .. 0;
/// outputs stay aligned with input positions.
template <class S>
void lstm_forward(const Matrix<S>& Wx, const Matrix<S>& Wh, const Vector<S>& b,
                  const Matrix<S>& X, bool reverse, LstmTrace<S>& tr) {
  const Eigen::Index T = X.rows(), H = Wh.cols();
  Matrix<S> Z = X * Wx.transpose();
  Z.rowwise() += b.transpose();
  for (auto* m : {&tr.input_gate, &tr.forget_gate, &tr.cell_gate, &tr.output_gate,
                  &tr.cell, &tr.cell_tanh, &tr.hidden})
    m->resize(T, H);
  Vector<S> h_prev = Vector<S>::Zero(H), c_prev = Vector<S>::Zero(H);
  Vector<S> z(4 * H);
  for (Eigen::Index step = 0; step < T; ++step) {
    const Eigen::Index t = reverse ? T - 1 - step : step;
    z = Z.row(t).transpose() + Wh * h_prev;
    for (Eigen::Index j = 0; j < H; ++j) {
      const S i = sigmoid(z[j]);
      const S f = sigmoid(z[H + j]);
      const S g = std::tanh(z[2 * H + j]);
      const S o = sigmoid(z[3 * H + j]);
      const S c = f * c_prev[j] + i * g;
      const S tc = std::tanh(c);
      tr.input_gate(t, j) = i;
      tr.forget_gate(t, j) = f;
      tr.cell_gate(t, j) = g;
      tr.output_gate(t, j) = o;
      tr.cell(t, j) = c;
      tr.cell_tanh(t, j) = tc;
      tr.hidden(t, j) = o * tc;
    }
    h_prev = tr.hidden.row(t).transpose();
    c_prev = tr.cell.row(t).transpose();
  }
}

/// Accumulates weight gradients and returns dL/dX.
template <class S>
Matrix<S> lstm_backward(const Matrix<S>& Wx, const Matrix<S>& Wh,
                        const Matrix<S>& X, bool reverse, const LstmTrace<S>& tr,
                        const Matrix<S>& dH, Matrix<S>& dWx, Matrix<S>& dWh,
                        Vector<S>& db) {
  const Eigen::Index T = X.rows(), H = Wh.cols();
  Matrix<S> dZ(T, 4 * H);
  Matrix<S> H_prev = Matrix<S>::Zero(T, H);
  Vector<S> dh_next = Vector<S>::Zero(H), dc_next = Vector<S>::Zero(H);
  for (Eigen::Index step = T - 1; step >= 0; --step) {
    const Eigen::Index t = reverse ? T - 1 - step : step;
    const bool first = step == 0;
    const Eigen::Index tp = reverse ? t + 1 : t - 1;  // previous step
    if (!first) H_prev.row(t) = tr.hidden.row(tp);
    for (Eigen::Index j = 0; j < H; ++j) {
      const S i = tr.input_gate(t, j), f = tr.forget_gate(t, j);
      const S g = tr.cell_gate(t, j), o = tr.output_gate(t, j);
      const S tc = tr.cell_tanh(t, j);
      const S c_prev = first ? S(0) : tr.cell(tp, j);
      const S dh = dH(t, j) + dh_next[j];
      const S dc = dh * o * (S(1) - tc * tc) + dc_next[j];
      dZ(t, j) = dc * g * i * (S(1) - i);
      dZ(t, H + j) = dc * c_prev * f * (S(1) - f);
      dZ(t, 2 * H + j) = dc * i * (S(1) - g * g);
      dZ(t, 3 * H + j) = dh * tc * o * (S(1) - o);
      dc_next[j] = dc * f;
    }
    dh_next = Wh.transpose() * dZ.row(t).transpose();
  }
  dWx.noalias() += dZ.transpose() * X;
  dWh.noalias() += dZ.transpose() * H_prev;
  db += dZ.colwise().sum().transpose();
  return dZ * Wx;
}

}  // namespace detail

/// Emission scores (T x n_tags). With `train_mode`, inverted dropout is
/// applied to the Bi-LSTM input and output using masks drawn from `rng`;
/// otherwise the pass is deterministic and `rng` is unused.
template <class S>
Matrix<S> forward_emissions(const EncodedLog& enc, const TaggerModel<S>& model,
                            bool train_mode, Rng* rng = nullptr,
                            Activations<S>* trace = nullptr) {
  Activations<S> local;
  Activations<S>& a = trace ? *trace : local;
  const auto& p = model.params;
  const auto& hp = model.hp;
  const auto T = static_cast<Eigen::Index>(enc.token_count());

  Matrix<S> x(T, hp.input_dim());
  for (Eigen::Index t = 0; t < T; ++t)
    x.row(t).head(hp.word_dim) = p.word_embedding.row(enc.word_ids[static_cast<std::size_t>(t)]);
  if (hp.use_char)
    detail::char_cnn_forward(enc, model, a, x.rightCols(hp.char_filters));

  const bool drop = train_mode && hp.dropout > 0.0 && rng;
  if (drop) {
    a.input_mask = detail::dropout_mask<S>(T, x.cols(), hp.dropout, *rng);
    x.array() *= a.input_mask.array();
  } else {
    a.input_mask.resize(0, 0);
  }
  a.input = std::move(x);

  detail::lstm_forward(p.fw_input, p.fw_recurrent, p.fw_bias, a.input, false, a.fw);
  detail::lstm_forward(p.bw_input, p.bw_recurrent, p.bw_bias, a.input, true, a.bw);
  const Eigen::Index H = hp.lstm_hidden;
  a.lstm_out.resize(T, 2 * H);
  a.lstm_out.leftCols(H) = a.fw.hidden;
  a.lstm_out.rightCols(H) = a.bw.hidden;
  if (drop) {
    a.lstm_mask = detail::dropout_mask<S>(T, 2 * H, hp.dropout, *rng);
    a.lstm_out.array() *= a.lstm_mask.array();
  } else {
    a.lstm_mask.resize(0, 0);
  }

  a.emissions = a.lstm_out * p.projection.transpose();
  a.emissions.rowwise() += p.projection_bias.transpose();
  return a.emissions;
}

/// Backpropagates dL/d(emissions) through a traced forward pass, adding
/// parameter gradients into `grad`.
template <class S>
void backward_from_emissions(const EncodedLog& enc, const TaggerModel<S>& model,
                             const Activations<S>& a, const Matrix<S>& d_emissions,
                             Parameters<S>& grad) {
  const auto& p = model.params;
  const auto& hp = model.hp;
  const Eigen::Index T = static_cast<Eigen::Index>(enc.token_count());
  const Eigen::Index H = hp.lstm_hidden;

  grad.projection.noalias() += d_emissions.transpose() * a.lstm_out;
  grad.projection_bias += d_emissions.colwise().sum().transpose();
  Matrix<S> d_lstm = d_emissions * p.projection;
  if (a.lstm_mask.size()) d_lstm.array() *= a.lstm_mask.array();

  const Matrix<S> dH_fw = d_lstm.leftCols(H), dH_bw = d_lstm.rightCols(H);
  Matrix<S> d_input = detail::lstm_backward(p.fw_input, p.fw_recurrent, a.input, false,
                                            a.fw, dH_fw, grad.fw_input,
                                            grad.fw_recurrent, grad.fw_bias);
  d_input += detail::lstm_backward(p.bw_input, p.bw_recurrent, a.input, true, a.bw,
                                   dH_bw, grad.bw_input, grad.bw_recurrent,
                                   grad.bw_bias);
  if (a.input_mask.size()) d_input.array() *= a.input_mask.array();

  for (Eigen::Index t = 0; t < T; ++t) {
    const int w = enc.word_ids[static_cast<std::size_t>(t)];
    grad.word_embedding.row(w) += d_input.row(t).head(hp.word_dim);
  }
  if (!hp.use_char) return;

  const int C = hp.char_emb_dim, F = hp.char_filters;
  const int k = hp.char_kernel, left = (k - 1) / 2;
  Matrix<S> d_conv = Matrix<S>::Zero(a.conv.rows(), F);
  for (Eigen::Index t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f) {
      const S g = d_input(t, hp.word_dim + f);
      const int r = a.pool_argmax[static_cast<std::size_t>(t) * static_cast<std::size_t>(F) + static_cast<std::size_t>(f)];
      if (r < 0)
        grad.conv_bias[f] += g;
      else
        d_conv(r, f) += g;
    }
  grad.conv_kernel.noalias() += a.windows.transpose() * d_conv;
  grad.conv_bias += d_conv.colwise().sum().transpose();
  const Matrix<S> d_windows = d_conv * p.conv_kernel.transpose();
  for (Eigen::Index t = 0; t < T; ++t) {
    const int len = enc.char_lengths[static_cast<std::size_t>(t)];
    const int base = a.row_offset[static_cast<std::size_t>(t)];
    for (int pos = 0; pos < len; ++pos)
      for (int q = 0; q < k; ++q) {
        const int src = pos + q - left;
        if (src < 0 || src >= len) continue;
        grad.char_embedding.row(enc.char_ids(t, src)) +=
            d_windows.block(base + pos, q * C, 1, C);
      }
  }
}

/// CRF negative log-likelihood of `gold` for one log, accumulating
/// `scale` times its gradient into `grad`. CRF arithmetic runs in double.
/// Frozen (IOB-violating) CRF entries receive no gradient.
template <class S>
double log_loss_and_gradient(const EncodedLog& enc, std::span<const int> gold,
                             const TaggerModel<S>& model, Rng* dropout_rng,
                             Parameters<S>& grad, double scale = 1.0) {
  Activations<S> a;
  forward_emissions(enc, model, dropout_rng != nullptr, dropout_rng, &a);
  const auto& p = model.params;
  const auto g = crf::nll_with_gradients<double>(
      a.emissions.template cast<double>(), p.transitions.template cast<double>(),
      p.start.template cast<double>(), p.end.template cast<double>(), gold);

  const int n = model.n_tags();
  for (int i = 0; i < n; ++i) {
    if (!model.start_frozen(i)) grad.start[i] += static_cast<S>(scale * g.start[i]);
    grad.end[i] += static_cast<S>(scale * g.end[i]);
    for (int j = 0; j < n; ++j)
      if (!model.transition_frozen(i, j))
        grad.transitions(i, j) += static_cast<S>(scale * g.transitions(i, j));
  }
  const Matrix<S> dE = (scale * g.emissions).template cast<S>();
  backward_from_emissions(enc, model, a, dE, grad);
  return g.loss;
}

/// Loss only (no gradient), CRF in double.
template <class S>
double log_loss(const EncodedLog& enc, std::span<const int> gold,
                const TaggerModel<S>& model, Rng* dropout_rng = nullptr) {
  const Matrix<S> E = forward_emissions(enc, model, dropout_rng != nullptr, dropout_rng);
  const auto& p = model.params;
  return crf::nll<double>(E.template cast<double>(), p.transitions.template cast<double>(),
                          p.start.template cast<double>(), p.end.template cast<double>(),
                          gold);
}

/// Viterbi decode of an encoded log in inference mode; returns tag indices.
template <class S>
std::vector<int> decode_indices(const EncodedLog& enc, const TaggerModel<S>& model) {
  const Matrix<S> E = forward_emissions(enc, model, false);
  const auto& p = model.params;
  return crf::viterbi<double>(E.template cast<double>(), p.transitions.template cast<double>(),
                              p.start.template cast<double>(), p.end.template cast<double>());
}

}  // namespace valb
