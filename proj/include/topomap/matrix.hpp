#pragma once

#include <Eigen/Core>

namespace topomap {

/// Row-major so that one neuron's profile is contiguous, matching NPY C order.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

}  // namespace topomap
