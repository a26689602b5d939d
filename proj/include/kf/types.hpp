#pragma once

#include <Eigen/Dense>

namespace kf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// One sample per row. Used for particle states, pair batches and datasets.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

}  // namespace kf
