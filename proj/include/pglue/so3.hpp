// SO(3) primitives: skew operator, exponential/logarithm maps and the
// translation Jacobian of the SE(3) exponential.

#ifndef PGLUE_SO3_HPP
#define PGLUE_SO3_HPP

#include "pglue/types.hpp"

namespace pglue {

/// Angle magnitude below which exp/log coefficients switch to their
/// second-order Taylor expansions.
inline constexpr double kSmallAngle = 1e-7;

/// Guard band around pi for the logarithm branch cut.
inline constexpr double kAnglePiGuard = 1e-6;

/// Skew-symmetric matrix of v: hat(v) * w == v.cross(w).
Mat3 hat(const Vec3& v);

/// Inverse of hat() for skew-symmetric input.
Vec3 vee(const Mat3& m);

/// Rodrigues exponential, so(3) -> SO(3).
Mat3 exp_so3(const Vec3& phi);

/// Rotation logarithm, SO(3) -> so(3). Principal branch, |phi| < pi.
/// Throws AngleNearPiError within kAnglePiGuard of pi.
Vec3 log_so3(const Mat3& rotation);

/// Left Jacobian of SO(3); maps the translational part of a twist to the
/// translation of its SE(3) exponential.
Mat3 so3_left_jacobian(const Vec3& phi);

/// Inverse of so3_left_jacobian.
Mat3 so3_left_jacobian_inverse(const Vec3& phi);

/// Nearest rotation matrix under Frobenius norm (polar decomposition).
Mat3 project_to_so3(const Mat3& m);

/// Max of |m*m^T - I| entries and |det(m) - 1|; zero for a clean rotation.
double rotation_defect(const Mat3& m);

}  // namespace pglue

#endif  // PGLUE_SO3_HPP
