// SE(3) value types and group operations.
//
// Twist ordering is (rho, phi): translational part first, rotational part
// second. All Jacobian blocks in the solver follow this convention. Pose
// updates are right-multiplicative: oplus(T, tau) = T * exp(tau).

#ifndef PGLUE_SE3_HPP
#define PGLUE_SE3_HPP

#include "pglue/so3.hpp"
#include "pglue/types.hpp"

#include <cstdint>

namespace pglue {

/// Element of se(3).
struct Twist {
  Vec3 rho{Vec3::Zero()};  // translational part, scene units
  Vec3 phi{Vec3::Zero()};  // rotational part, radians

  Twist() = default;
  Twist(const Vec3& rho_in, const Vec3& phi_in) : rho(rho_in), phi(phi_in) {}

  static Twist from_vector(const Vec6& v) { return Twist(v.head<3>(), v.tail<3>()); }
  Vec6 to_vector() const {
    Vec6 v;
    v << rho, phi;
    return v;
  }
};

/// Rigid transform on SE(3), stored as rotation matrix + translation.
///
/// Compositions keep a per-value drift counter; once a value has 64
/// compositions on its longest factor chain its rotation is re-projected
/// onto SO(3) by polar decomposition, so arbitrarily long chains keep the
/// orthonormality invariants.
class Pose {
 public:
  Pose() : r_(Mat3::Identity()), t_(Vec3::Zero()) {}
  Pose(const Mat3& rotation, const Vec3& translation) : r_(rotation), t_(translation) {}

  static Pose identity() { return Pose(); }
  static Pose from_matrix(const Mat4& m) { return Pose(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()); }

  const Mat3& rotation() const { return r_; }
  const Vec3& translation() const { return t_; }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = r_;
    m.topRightCorner<3, 1>() = t_;
    return m;
  }

  Pose inverse() const {
    Pose p(r_.transpose(), -(r_.transpose() * t_));
    p.depth_ = depth_;
    return p;
  }

  /// Group action on a point: R * x + t.
  Vec3 act(const Vec3& x) const { return r_ * x + t_; }

  /// Composition this * other.
  Pose operator*(const Pose& other) const {
    Pose p(r_ * other.r_, r_ * other.t_ + t_);
    p.depth_ = std::max(depth_, other.depth_) + 1;
    if (p.depth_ >= kRenormalizeEvery) {
      p.r_ = project_to_so3(p.r_);
      p.depth_ = 0;
    }
    return p;
  }

  bool is_identity(double tol = 0.0) const {
    return (r_ - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol && t_.cwiseAbs().maxCoeff() <= tol;
  }

 private:
  static constexpr std::uint32_t kRenormalizeEvery = 64;

  Mat3 r_;
  Vec3 t_;
  std::uint32_t depth_ = 0;
};

/// Exponential map se(3) -> SE(3).
Pose exp_se3(const Twist& tau);

/// Logarithm map SE(3) -> se(3), principal branch.
/// Throws AngleNearPiError when the rotation angle is within 1e-6 of pi.
Twist log_se3(const Pose& p);

/// 6x6 adjoint of p under (rho, phi) ordering: [[R, hat(t)R], [0, R]].
Mat6 adjoint(const Pose& p);

/// Group action, free-function form.
inline Vec3 act(const Pose& p, const Vec3& x) { return p.act(x); }

inline Pose compose(const Pose& a, const Pose& b) { return a * b; }

inline Pose inverse(const Pose& p) { return p.inverse(); }

/// Right-multiplicative manifold update: p * exp(tau).
inline Pose oplus(const Pose& p, const Twist& tau) { return p * exp_se3(tau); }

/// Similarity transform: x -> scale * R * x + t. Scale must be positive.
struct SimTransform {
  double scale = 1.0;
  Mat3 rotation{Mat3::Identity()};
  Vec3 translation{Vec3::Zero()};

  Vec3 act(const Vec3& x) const { return scale * (rotation * x) + translation; }

  SimTransform inverse() const {
    SimTransform s;
    s.scale = 1.0 / scale;
    s.rotation = rotation.transpose();
    s.translation = -(s.scale * (s.rotation * translation));
    return s;
  }
};

inline Vec3 sim3_act(const SimTransform& s, const Vec3& x) { return s.act(x); }

}  // namespace pglue

#endif  // PGLUE_SE3_HPP
