// Common fixed-size linear algebra aliases used across the library.

#ifndef PGLUE_TYPES_HPP
#define PGLUE_TYPES_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>

namespace pglue {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

using ObjectId = std::uint16_t;

/// Mask label meaning "no object covers this pixel".
inline constexpr ObjectId kUncoveredLabel = 0xFFFF;

}  // namespace pglue

#endif  // PGLUE_TYPES_HPP
