#pragma once

#include <Eigen/Dense>

namespace drbc {

/// Dense row-major matrix; every embedding and weight tensor uses it.
template <class Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;

}  // namespace drbc
