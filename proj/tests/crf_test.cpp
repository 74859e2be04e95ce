#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "valb/crf.hpp"

using namespace valb;

namespace {

struct Instance {
  Matrix<double> E, A;
  Vector<double> start, end;
};

Instance random_instance(std::mt19937_64& gen, int T, int n, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, scale);
  Instance x;
  x.E.resize(T, n);
  x.A.resize(n, n);
  x.start.resize(n);
  x.end.resize(n);
  for (Eigen::Index i = 0; i < x.E.size(); ++i) x.E.data()[i] = N(gen);
  for (Eigen::Index i = 0; i < x.A.size(); ++i) x.A.data()[i] = N(gen);
  for (int i = 0; i < n; ++i) {
    x.start[i] = N(gen);
    x.end[i] = N(gen);
  }
  return x;
}

}  // namespace

TEST(Crf, UniformScoresGiveLogNumberOfPaths) {
  // 1 token, 3 tags, all zero scores: log 3.
  Matrix<double> E = Matrix<double>::Zero(1, 3), A = Matrix<double>::Zero(3, 3);
  Vector<double> s = Vector<double>::Zero(3), e = Vector<double>::Zero(3);
  EXPECT_NEAR(crf::log_partition(E, A, s, e), std::log(3.0), 1e-12);
  // 4 tokens, 5 tags: log 5^4.
  E = Matrix<double>::Zero(4, 5);
  A = Matrix<double>::Zero(5, 5);
  s = e = Vector<double>::Zero(5);
  EXPECT_NEAR(crf::log_partition(E, A, s, e), 4 * std::log(5.0), 1e-12);
}

TEST(Crf, PartitionMatchesEnumerationOf625Paths) {
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = random_instance(gen, 4, 5);
    EXPECT_NEAR(crf::log_partition(x.E, x.A, x.start, x.end),
                static_cast<double>(oracle::log_partition(x.E, x.A, x.start, x.end)), 1e-9);
  }
}

TEST(Crf, PartitionSinglePrecision) {
  std::mt19937_64 gen(8);
  for (int rep = 0; rep < 50; ++rep) {
    const auto x = random_instance(gen, 1 + rep % 5, 2 + rep % 5);
    const double ref = static_cast<double>(oracle::log_partition(x.E, x.A, x.start, x.end));
    const float got = crf::log_partition<float>(x.E.cast<float>(), x.A.cast<float>(),
                                                x.start.cast<float>(), x.end.cast<float>());
    EXPECT_NEAR(got, ref, 1e-4);
  }
}

TEST(Crf, RowConstantShiftOfEmissions) {
  // Adding c_t to every emission of token t shifts log Z by sum c_t.
  std::mt19937_64 gen(9);
  auto x = random_instance(gen, 5, 4);
  const double before = crf::log_partition(x.E, x.A, x.start, x.end);
  const double shifts[] = {0.5, -2.0, 3.25, 0.0, 1.5};
  for (int t = 0; t < 5; ++t) x.E.row(t).array() += shifts[t];
  EXPECT_NEAR(crf::log_partition(x.E, x.A, x.start, x.end), before + 3.25, 1e-9);
}

TEST(Crf, HandComputedTwoTokenScore) {
  Matrix<double> E(2, 2), A(2, 2);
  E << 1.0, 2.0,  //
      3.0, 4.0;
  A << 0.1, 0.2,  //
      0.3, 0.4;
  Vector<double> s(2), e(2);
  s << 0.01, 0.02;
  e << 0.001, 0.002;
  const std::vector<int> y = {1, 0};
  // start[1] + E(0,1) + A(1,0) + E(1,0) + end[0]
  EXPECT_NEAR(crf::sequence_score(E, A, s, e, std::span<const int>(y)),
              0.02 + 2.0 + 0.3 + 3.0 + 0.001, 1e-12);
}

TEST(Crf, NllIsLogPartitionMinusScore) {
  std::mt19937_64 gen(10);
  for (int rep = 0; rep < 20; ++rep) {
    const int T = 1 + rep % 4, n = 2 + rep % 3;
    const auto x = random_instance(gen, T, n);
    std::vector<int> y(static_cast<std::size_t>(T));
    for (auto& v : y) v = static_cast<int>(gen() % static_cast<unsigned>(n));
    const double ref = static_cast<double>(oracle::log_partition(x.E, x.A, x.start, x.end) -
                                           oracle::path_score(x.E, x.A, x.start, x.end, y));
    const double got = crf::nll(x.E, x.A, x.start, x.end, std::span<const int>(y));
    EXPECT_NEAR(got, ref, 1e-9);
    EXPECT_GE(got, -1e-12);
  }
}

TEST(Crf, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(11);
  const double h = 1e-5;
  for (int rep = 0; rep < 10; ++rep) {
    const int T = 1 + rep % 5, n = 2 + rep % 4;
    auto x = random_instance(gen, T, n);
    std::vector<int> y(static_cast<std::size_t>(T));
    for (auto& v : y) v = static_cast<int>(gen() % static_cast<unsigned>(n));
    const std::span<const int> gold(y);
    const auto g = crf::nll_with_gradients(x.E, x.A, x.start, x.end, gold);
    EXPECT_NEAR(g.loss, crf::nll(x.E, x.A, x.start, x.end, gold), 1e-12);

    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = crf::nll(x.E, x.A, x.start, x.end, gold);
      param = keep - h;
      const double down = crf::nll(x.E, x.A, x.start, x.end, gold);
      param = keep;
      EXPECT_NEAR(analytic, (up - down) / (2 * h), 1e-7);
    };
    for (Eigen::Index i = 0; i < x.E.size(); ++i) check(x.E.data()[i], g.emissions.data()[i]);
    for (Eigen::Index i = 0; i < x.A.size(); ++i) check(x.A.data()[i], g.transitions.data()[i]);
    for (int i = 0; i < n; ++i) {
      check(x.start[i], g.start[i]);
      check(x.end[i], g.end[i]);
    }
  }
}

TEST(Crf, ViterbiMatchesEnumeration) {
  std::mt19937_64 gen(12);
  for (int rep = 0; rep < 200; ++rep) {
    const int T = 1 + rep % 5, n = 2 + rep % 5;
    const auto x = random_instance(gen, T, n);
    EXPECT_EQ(crf::viterbi(x.E, x.A, x.start, x.end), oracle::best_path(x.E, x.A, x.start, x.end));
  }
}

TEST(Crf, ViterbiTieBreakIsLexicographicallySmallest) {
  // Integer scores from a tiny range make exact ties common.
  std::mt19937_64 gen(13);
  std::uniform_int_distribution<int> U(-1, 1);
  int ties_seen = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const int T = 1 + rep % 4, n = 2 + rep % 3;
    Matrix<double> E(T, n), A(n, n);
    Vector<double> s(n), e(n);
    for (Eigen::Index i = 0; i < E.size(); ++i) E.data()[i] = U(gen);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = U(gen);
    for (int i = 0; i < n; ++i) {
      s[i] = U(gen);
      e[i] = U(gen);
    }
    const auto ref = oracle::best_path(E, A, s, e);
    int optimal = 0;
    const long double top = oracle::path_score(E, A, s, e, ref);
    oracle::for_each_path(T, n, [&](const std::vector<int>& y) {
      optimal += oracle::path_score(E, A, s, e, y) == top;
    });
    ties_seen += optimal > 1;
    EXPECT_EQ(crf::viterbi(E, A, s, e), ref);
  }
  EXPECT_GT(ties_seen, 50);
}

TEST(Crf, ForbiddenTransitionsAreNeverDecoded) {
  // Strongly negative entries behave as hard constraints.
  std::mt19937_64 gen(14);
  for (int rep = 0; rep < 100; ++rep) {
    auto x = random_instance(gen, 5, 3, 5.0);
    x.A(0, 2) = -10000;  // 0 -> 2 forbidden
    x.start[2] = -10000;
    const auto y = crf::viterbi(x.E, x.A, x.start, x.end);
    EXPECT_NE(y[0], 2);
    for (std::size_t t = 1; t < y.size(); ++t) EXPECT_FALSE(y[t - 1] == 0 && y[t] == 2);
  }
}
