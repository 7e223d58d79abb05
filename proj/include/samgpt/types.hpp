#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace samgpt {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <class Scalar>
using SparseX = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;
using SparseMatrix = SparseX<double>;
using Index = Eigen::Index;

}  // namespace samgpt
