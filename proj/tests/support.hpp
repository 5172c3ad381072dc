// Shared test utilities: seeded random group elements and independent
// oracles (truncated matrix exponential, finite differences). These stay
// deliberately separate from the library implementations they check.

#ifndef PGLUE_TESTS_SUPPORT_HPP
#define PGLUE_TESTS_SUPPORT_HPP

#include "pglue/rng.hpp"
#include "pglue/se3.hpp"

#include <cmath>

namespace pglue::testing {

inline Vec3 random_vec3(Rng& rng, double scale = 1.0) {
  return Vec3(rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale));
}

inline Twist random_twist(Rng& rng, double rho_scale = 1.5, double phi_max = 2.0) {
  Vec3 axis = random_vec3(rng);
  if (axis.norm() < 1e-9) axis = Vec3::UnitX();
  axis.normalize();
  return Twist(random_vec3(rng, rho_scale), rng.uniform(0.0, phi_max) * axis);
}

inline Pose random_pose(Rng& rng, double rho_scale = 1.5, double phi_max = 2.5) {
  return exp_se3(random_twist(rng, rho_scale, phi_max));
}

/// Truncated power-series exponential of the 4x4 algebra element; the
/// independent oracle for exp_se3. 30 terms are ample for the twist
/// magnitudes used in tests.
inline Mat4 matrix_exp_taylor(const Mat4& a, int terms = 30) {
  Mat4 sum = Mat4::Identity();
  Mat4 power = Mat4::Identity();
  for (int k = 1; k <= terms; ++k) {
    power = (power * a).eval();
    power /= static_cast<double>(k);
    sum += power;
  }
  return sum;
}

inline Mat4 twist_algebra_matrix(const Twist& tau) {
  Mat4 a = Mat4::Zero();
  a.topLeftCorner<3, 3>() = hat(tau.phi);
  a.topRightCorner<3, 1>() = tau.rho;
  return a;
}

inline double max_abs_diff(const Mat4& a, const Mat4& b) { return (a - b).cwiseAbs().maxCoeff(); }
inline double max_abs_diff(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace pglue::testing

#endif  // PGLUE_TESTS_SUPPORT_HPP
