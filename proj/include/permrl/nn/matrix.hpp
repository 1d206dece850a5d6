#pragma once

#include <Eigen/Core>

namespace permrl::nn {

/// Row-major 64-bit matrix. Batches are rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace permrl::nn
