#pragma once

#include <Eigen/Dense>

namespace tng {

// Dense row-major matrices of 64-bit reals are the working currency of the
// whole model; vectors are column vectors unless a shape says otherwise.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = MatrixX<double>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

}  // namespace tng
