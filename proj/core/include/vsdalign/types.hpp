#pragma once

#include <Eigen/Core>

namespace vsdalign {

/// Row-major dense matrix at working precision. One row per sample.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace vsdalign
