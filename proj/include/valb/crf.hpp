#pragma once

// Linear-chain CRF: partition function, path scores, negative
// log-likelihood with gradients, and Viterbi decoding.
//
// For emissions E (T x n), transitions A (n x n, A(i, j) scores i -> j),
// start scores s and end scores e, a tag path y scores
//
//   s[y_0] + sum_t E(t, y_t) + sum_{t>0} A(y_{t-1}, y_t) + e[y_{T-1}].

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "valb/tensor.hpp"

namespace valb::crf {

template <class S>
S log_sum_exp(const Eigen::Ref<const Vector<S>>& x) {
  const S m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

/// alpha.row(t)[j]: log-sum of scores of all prefixes ending at t in tag j,
/// including E(t, j).
template <class S>
Matrix<S> forward_scores(const Matrix<S>& E, const Matrix<S>& A,
                         const Vector<S>& start) {
  const Eigen::Index T = E.rows(), n = E.cols();
  Matrix<S> alpha(T, n);
  alpha.row(0) = start.transpose() + E.row(0);
  Vector<S> tmp(n);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index j = 0; j < n; ++j) {
      tmp = alpha.row(t - 1).transpose() + A.col(j);
      alpha(t, j) = log_sum_exp<S>(tmp) + E(t, j);
    }
  }
  return alpha;
}

/// beta.row(t)[i]: log-sum of scores of all suffixes after t given tag i
/// at t, including the end score and excluding E(t, i).
template <class S>
Matrix<S> backward_scores(const Matrix<S>& E, const Matrix<S>& A,
                          const Vector<S>& end) {
  const Eigen::Index T = E.rows(), n = E.cols();
  Matrix<S> beta(T, n);
  beta.row(T - 1) = end.transpose();
  Vector<S> tmp(n);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      tmp = A.row(i).transpose() + E.row(t + 1).transpose() +
            beta.row(t + 1).transpose();
      beta(t, i) = log_sum_exp<S>(tmp);
    }
  }
  return beta;
}

template <class S>
S log_partition(const Matrix<S>& E, const Matrix<S>& A, const Vector<S>& start,
                const Vector<S>& end) {
  assert(E.rows() >= 1);
  const Matrix<S> alpha = forward_scores(E, A, start);
  Vector<S> last = alpha.row(E.rows() - 1).transpose() + end;
  return log_sum_exp<S>(last);
}

template <class S>
S sequence_score(const Matrix<S>& E, const Matrix<S>& A, const Vector<S>& start,
                 const Vector<S>& end, std::span<const int> tags) {
  assert(static_cast<Eigen::Index>(tags.size()) == E.rows());
  S score = start[tags[0]] + end[tags.back()];
  for (std::size_t t = 0; t < tags.size(); ++t) {
    score += E(static_cast<Eigen::Index>(t), tags[t]);
    if (t > 0) score += A(tags[t - 1], tags[t]);
  }
  return score;
}

template <class S>
S nll(const Matrix<S>& E, const Matrix<S>& A, const Vector<S>& start,
      const Vector<S>& end, std::span<const int> gold) {
  return log_partition(E, A, start, end) - sequence_score(E, A, start, end, gold);
}

template <class S>
struct NllGradients {
  S loss{};
  Matrix<S> emissions;    // T x n
  Matrix<S> transitions;  // n x n
  Vector<S> start, end;
};

/// Loss and its exact gradient: expected feature counts under the model
/// minus the gold path's counts.
template <class S>
NllGradients<S> nll_with_gradients(const Matrix<S>& E, const Matrix<S>& A,
                                   const Vector<S>& start, const Vector<S>& end,
                                   std::span<const int> gold) {
  const Eigen::Index T = E.rows(), n = E.cols();
  const Matrix<S> alpha = forward_scores(E, A, start);
  const Matrix<S> beta = backward_scores(E, A, end);
  Vector<S> last = alpha.row(T - 1).transpose() + end;
  const S logZ = log_sum_exp<S>(last);

  NllGradients<S> g;
  g.loss = logZ - sequence_score(E, A, start, end, gold);
  g.emissions = ((alpha + beta).array() - logZ).exp().matrix();
  g.start = g.emissions.row(0).transpose();
  g.end = g.emissions.row(T - 1).transpose();
  g.transitions = Matrix<S>::Zero(n, n);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const S a = alpha(t - 1, i);
      if (!std::isfinite(a)) continue;
      for (Eigen::Index j = 0; j < n; ++j)
        g.transitions(i, j) +=
            std::exp(a + A(i, j) + E(t, j) + beta(t, j) - logZ);
    }
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    g.emissions(t, gold[static_cast<std::size_t>(t)]) -= S(1);
    if (t > 0) g.transitions(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= S(1);
  }
  g.start[gold.front()] -= S(1);
  g.end[gold.back()] -= S(1);
  return g;
}

/// Highest-scoring path. Among equal-scoring paths the lexicographically
/// smallest tag-index sequence wins: suffix maxima are computed first, then
/// the path is fixed left to right taking the lowest index that attains
/// the optimum at each position.
template <class S>
std::vector<int> viterbi(const Matrix<S>& E, const Matrix<S>& A,
                         const Vector<S>& start, const Vector<S>& end) {
  const Eigen::Index T = E.rows(), n = E.cols();
  Matrix<S> best(T, n);  // best suffix score from t given tag, incl. E(t, .)
  best.row(T - 1) = E.row(T - 1) + end.transpose();
  for (Eigen::Index t = T - 2; t >= 0; --t)
    for (Eigen::Index i = 0; i < n; ++i)
      best(t, i) = E(t, i) + (A.row(i) + best.row(t + 1)).maxCoeff();

  auto first_argmax = [n](auto&& score) {
    Eigen::Index arg = 0;
    S top = score(0);
    for (Eigen::Index j = 1; j < n; ++j) {
      const S v = score(j);
      if (v > top) {
        top = v;
        arg = j;
      }
    }
    return static_cast<int>(arg);
  };

  std::vector<int> path(static_cast<std::size_t>(T));
  path[0] = first_argmax([&](Eigen::Index j) { return start[j] + best(0, j); });
  for (Eigen::Index t = 1; t < T; ++t) {
    const int prev = path[static_cast<std::size_t>(t - 1)];
    path[static_cast<std::size_t>(t)] =
        first_argmax([&](Eigen::Index j) { return A(prev, j) + best(t, j); });
  }
  return path;
}

}  // namespace valb::crf
