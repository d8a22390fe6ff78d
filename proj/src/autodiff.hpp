#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

namespace stabman::detail {

/// Forward-mode dual number with up to 32 directions and no heap allocation.
using AdDerivative = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 32, 1>;
using Ad = Eigen::AutoDiffScalar<AdDerivative>;

inline constexpr int kMaxAdDirections = 32;

}  // namespace stabman::detail
