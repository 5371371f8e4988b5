#pragma once

#include <Eigen/Core>

namespace mog {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Column-major batch of 2D points: one point per column.
using Points = Eigen::Matrix<double, 2, Eigen::Dynamic>;

}  // namespace mog
