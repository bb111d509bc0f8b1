#pragma once

#include <Eigen/Dense>

namespace dimix {

/// Agent-indexed matrices (states, mixing weights) are row-major: row i is
/// agent i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Iteration counter. Iterations start at 1.
using Iteration = long long;

}  // namespace dimix
