#pragma once

#include <Eigen/Dense>

namespace opinion_smc {

using Index = Eigen::Index;

/// A column vector of dynamic size, templated on scalar type.
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A dense matrix of dynamic size, templated on scalar type.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Plain value of a scalar; overloaded for automatic-differentiation scalars.
inline double scalar_value(double v) { return v; }

template <typename T>
double scalar_value(const T& v) {
  return scalar_value(v.value());
}

}  // namespace opinion_smc
