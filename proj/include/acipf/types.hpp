#pragma once

#include <Eigen/Core>

namespace acipf {

// (x1, x2, v1, v2): planar position followed by velocity.
using StateVector = Eigen::Vector4d;
using Vec2 = Eigen::Vector2d;

inline Vec2 position_of(const StateVector& s) { return s.head<2>(); }

}  // namespace acipf
