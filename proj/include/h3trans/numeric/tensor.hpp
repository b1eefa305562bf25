#pragma once

#include <Eigen/Dense>

namespace h3t::nc {

/// Dense row-major matrix of doubles.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline bool all_finite(const Tensor2& t) { return t.allFinite(); }

}  // namespace h3t::nc
