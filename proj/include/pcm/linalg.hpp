#pragma once

#include <Eigen/Dense>

namespace pcm {

// Covariate matrices keep one subject per row, contiguous, so a row binds to
// RowRef without a copy.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowRef = Eigen::Ref<const Eigen::RowVectorXd>;

}  // namespace pcm
