#include "pglue/se3.hpp"

namespace pglue {

Pose exp_se3(const Twist& tau) {
  const Mat3 r = exp_so3(tau.phi);
  const Vec3 t = so3_left_jacobian(tau.phi) * tau.rho;
  return Pose(r, t);
}

Twist log_se3(const Pose& p) {
  const Vec3 phi = log_so3(p.rotation());
  const Vec3 rho = so3_left_jacobian_inverse(phi) * p.translation();
  return Twist(rho, phi);
}

Mat6 adjoint(const Pose& p) {
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = p.rotation();
  ad.bottomRightCorner<3, 3>() = p.rotation();
  ad.topRightCorner<3, 3>() = hat(p.translation()) * p.rotation();
  return ad;
}

}  // namespace pglue
