#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace fracbsde {

/// Path-major storage: one row per path, one column per time node.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Index = Eigen::Index;

}  // namespace fracbsde
