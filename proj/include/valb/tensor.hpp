#pragma once

#include <Eigen/Dense>

namespace valb {

/// Row-major dense matrix; rows of embedding tables are contiguous.
template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using IdMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace valb
