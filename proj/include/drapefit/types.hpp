#pragma once

#include <Eigen/Dense>

namespace drapefit {

using Real = double;

using Vec2 = Eigen::Matrix<Real, 2, 1>;
using Vec3 = Eigen::Matrix<Real, 3, 1>;
using Vec4 = Eigen::Matrix<Real, 4, 1>;
using Mat2 = Eigen::Matrix<Real, 2, 2>;
using Mat3 = Eigen::Matrix<Real, 3, 3>;
using Mat32 = Eigen::Matrix<Real, 3, 2>;
using Mat66 = Eigen::Matrix<Real, 6, 6>;
using Mat99 = Eigen::Matrix<Real, 9, 9>;
using Vec6 = Eigen::Matrix<Real, 6, 1>;
using Vec9 = Eigen::Matrix<Real, 9, 1>;
using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Quat = Eigen::Quaternion<Real>;

// Vertex positions are stored row-major so row(i) maps onto the flat
// solver vector [x0 y0 z0 x1 y1 z1 ...] without copying.
using MatX3 = Eigen::Matrix<Real, Eigen::Dynamic, 3, Eigen::RowMajor>;
using MatX3i = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

using Index = Eigen::Index;

} // namespace drapefit
