#pragma once

#include <Eigen/Dense>

namespace martin {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VectorX<double>;
using Mat = MatrixX<double>;

}  // namespace martin
