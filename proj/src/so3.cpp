#include "pglue/so3.hpp"

#include "pglue/errors.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace pglue {

namespace {

struct ExpCoeffs {
  double a;  // sin(t)/t
  double b;  // (1 - cos(t))/t^2
  double c;  // (t - sin(t))/t^3
};

ExpCoeffs exp_coeffs(double theta) {
  ExpCoeffs k;
  const double t2 = theta * theta;
  if (theta < kSmallAngle) {
    k.a = 1.0 - t2 / 6.0;
    k.b = 0.5 - t2 / 24.0;
    k.c = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double s = std::sin(theta);
    const double half = std::sin(0.5 * theta);
    k.a = s / theta;
    k.b = 2.0 * half * half / t2;  // 1 - cos, without cancellation
    k.c = (theta - s) / (t2 * theta);
  }
  return k;
}

}  // namespace

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

Mat3 exp_so3(const Vec3& phi) {
  const double theta = phi.norm();
  const ExpCoeffs k = exp_coeffs(theta);
  const Mat3 p = hat(phi);
  return Mat3::Identity() + k.a * p + k.b * p * p;
}

Vec3 log_so3(const Mat3& rotation) {
  // Quaternion extraction is stable over the whole angle range; the direct
  // (R - R^T) form loses the axis as the angle approaches pi.
  const Eigen::Quaterniond q(rotation);
  const double vn = q.vec().norm();
  const double theta = 2.0 * std::atan2(vn, std::abs(q.w()));
  if (theta > M_PI - kAnglePiGuard) {
    throw AngleNearPiError("rotation angle within 1e-6 of pi; logarithm branch undefined");
  }
  if (vn < 1e-300) {
    return Vec3::Zero();
  }
  const double sign = q.w() >= 0.0 ? 1.0 : -1.0;
  return (sign * theta / vn) * q.vec();
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const ExpCoeffs k = exp_coeffs(theta);
  const Mat3 p = hat(phi);
  return Mat3::Identity() + k.b * p + k.c * p * p;
}

Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const double t2 = theta * theta;
  double c;
  if (theta < kSmallAngle) {
    c = 1.0 / 12.0 + t2 / 720.0;
  } else {
    const ExpCoeffs k = exp_coeffs(theta);
    c = (1.0 - k.a / (2.0 * k.b)) / t2;
  }
  const Mat3 p = hat(phi);
  return Mat3::Identity() - 0.5 * p + c * p * p;
}

Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

double rotation_defect(const Mat3& m) {
  const double ortho = (m * m.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = std::abs(m.determinant() - 1.0);
  return std::max(ortho, det);
}

}  // namespace pglue
