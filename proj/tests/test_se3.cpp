#include "pglue/se3.hpp"

#include "pglue/errors.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace pglue;
using namespace pglue::testing;

TEST_CASE("hat of zero vector is the zero matrix") {
  CHECK(hat(Vec3::Zero()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hat of unit z matches the skew definition") {
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  CHECK(max_abs_diff(hat(Vec3(0, 0, 1)), expected) == 0.0);
}

TEST_CASE("hat reproduces the coordinate cross product") {
  Rng rng(101);
  for (int i = 0; i < 200; ++i) {
    const Vec3 v = random_vec3(rng, 3.0);
    const Vec3 w = random_vec3(rng, 3.0);
    const Vec3 by_formula(v.y() * w.z() - v.z() * w.y(), v.z() * w.x() - v.x() * w.z(),
                          v.x() * w.y() - v.y() * w.x());
    CHECK((hat(v) * w - by_formula).norm() < 1e-14);
  }
}

TEST_CASE("exp of the zero twist is the identity") {
  const Pose p = exp_se3(Twist{});
  CHECK(p.is_identity(0.0));
}

TEST_CASE("exp of a pure translation keeps the rotation at identity") {
  const Pose p = exp_se3(Twist(Vec3(1, 2, 3), Vec3::Zero()));
  CHECK(max_abs_diff(p.rotation(), Mat3::Identity()) == 0.0);
  CHECK((p.translation() - Vec3(1, 2, 3)).norm() == 0.0);
}

TEST_CASE("exp matches the truncated matrix power series") {
  Rng rng(102);
  for (int i = 0; i < 300; ++i) {
    const Twist tau = random_twist(rng);
    const Mat4 oracle = matrix_exp_taylor(twist_algebra_matrix(tau));
    CHECK(max_abs_diff(exp_se3(tau).matrix(), oracle) < 1e-10);
  }
}

TEST_CASE("log of the identity is the zero twist") {
  CHECK(log_se3(Pose::identity()).to_vector().norm() == 0.0);
}

TEST_CASE("exp/log roundtrip over the full working angle range") {
  Rng rng(103);
  for (int i = 0; i < 1000; ++i) {
    const Twist tau = random_twist(rng, 2.0, 3.0);
    const Twist back = log_se3(exp_se3(tau));
    CHECK((back.to_vector() - tau.to_vector()).norm() < 1e-9);
  }
}

TEST_CASE("log rejects rotations at the branch cut") {
  const Pose half_turn(exp_so3(Vec3(0, 0, M_PI)), Vec3::Zero());
  CHECK_THROWS_AS(log_se3(half_turn), AngleNearPiError);
}

TEST_CASE("log is well conditioned just inside the branch cut") {
  const double angle = M_PI - 1e-4;
  const Pose p(exp_so3(Vec3(0, 0, angle)), Vec3(0.3, -0.2, 0.6));
  const Twist tau = log_se3(p);
  CHECK(max_abs_diff(exp_se3(tau).matrix(), p.matrix()) < 1e-9);
}

TEST_CASE("exp is continuous across the small-angle threshold") {
  const Vec3 dir = Vec3(1, 2, -1).normalized();
  const Vec3 rho(0.4, -0.7, 0.2);
  const Pose below = exp_se3(Twist(rho, (kSmallAngle * (1.0 - 1e-6)) * dir));
  const Pose above = exp_se3(Twist(rho, (kSmallAngle * (1.0 + 1e-6)) * dir));
  CHECK(max_abs_diff(below.matrix(), above.matrix()) < 1e-12);
}

TEST_CASE("adjoint of the identity is the 6x6 identity") {
  CHECK((adjoint(Pose::identity()) - Mat6::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adjoint satisfies the conjugation identity") {
  Rng rng(104);
  for (int i = 0; i < 1000; ++i) {
    const Pose p = random_pose(rng);
    const Twist tau = random_twist(rng, 0.5, 0.8);
    const Pose lhs = p * exp_se3(tau) * p.inverse();
    const Pose rhs = exp_se3(Twist::from_vector(adjoint(p) * tau.to_vector()));
    CHECK(max_abs_diff(lhs.matrix(), rhs.matrix()) < 1e-8);
  }
}

TEST_CASE("adjoint of the inverse inverts the adjoint") {
  Rng rng(105);
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(rng);
    CHECK((adjoint(p.inverse()) * adjoint(p) - Mat6::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("identity action returns the point unchanged") {
  CHECK((act(Pose::identity(), Vec3(0.3, 1.0, -2.0)) - Vec3(0.3, 1.0, -2.0)).norm() == 0.0);
}

TEST_CASE("pure translation shifts the origin") {
  const Pose p(Mat3::Identity(), Vec3(1, 0, 0));
  CHECK((act(p, Vec3::Zero()) - Vec3(1, 0, 0)).norm() == 0.0);
}

TEST_CASE("inverse action undoes the action") {
  Rng rng(106);
  for (int i = 0; i < 300; ++i) {
    const Pose p = random_pose(rng);
    const Vec3 x = random_vec3(rng, 3.0);
    CHECK((act(p.inverse(), act(p, x)) - x).norm() < 1e-10);
  }
}

TEST_CASE("compose with the inverse gives the identity") {
  Rng rng(107);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    CHECK(max_abs_diff((p * p.inverse()).matrix(), Mat4::Identity()) < 1e-9);
  }
}

TEST_CASE("oplus with the zero twist is a no-op") {
  Rng rng(108);
  const Pose p = random_pose(rng);
  CHECK(max_abs_diff(oplus(p, Twist{}).matrix(), p.matrix()) == 0.0);
}

TEST_CASE("oplus at the identity reduces to exp") {
  Rng rng(109);
  const Twist tau = random_twist(rng);
  CHECK(max_abs_diff(oplus(Pose::identity(), tau).matrix(), exp_se3(tau).matrix()) < 1e-15);
}

TEST_CASE("sequential small updates agree with the summed twist to first order") {
  Rng rng(110);
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    for (int i = 0; i < 50; ++i) {
      const Pose p = random_pose(rng);
      Twist a = random_twist(rng, 1.0, 1.0);
      Twist b = random_twist(rng, 1.0, 1.0);
      a.rho *= eps;
      a.phi *= eps;
      b.rho *= eps;
      b.phi *= eps;
      const Pose two_steps = oplus(oplus(p, a), b);
      const Pose one_step = oplus(p, Twist(a.rho + b.rho, a.phi + b.phi));
      const double err = max_abs_diff(two_steps.matrix(), one_step.matrix());
      const double product = a.to_vector().norm() * b.to_vector().norm();
      CHECK(err <= 10.0 * product);
    }
  }
}

TEST_CASE("sim3 identity leaves points unchanged") {
  const SimTransform s;
  CHECK((sim3_act(s, Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm() == 0.0);
}

TEST_CASE("sim3 pure scaling doubles coordinates") {
  SimTransform s;
  s.scale = 2.0;
  CHECK((sim3_act(s, Vec3(1, 1, 1)) - Vec3(2, 2, 2)).norm() == 0.0);
}

TEST_CASE("sim3 inverse undoes the transform") {
  Rng rng(111);
  for (int i = 0; i < 200; ++i) {
    SimTransform s;
    s.scale = rng.uniform(0.2, 3.0);
    s.rotation = random_pose(rng).rotation();
    s.translation = random_vec3(rng, 2.0);
    const Vec3 x = random_vec3(rng, 3.0);
    CHECK((sim3_act(s.inverse(), sim3_act(s, x)) - x).norm() < 1e-9);
  }
}

TEST_CASE("rotation invariants survive long composition chains") {
  Rng rng(112);
  Pose chain = Pose::identity();
  for (int i = 0; i < 1000; ++i) chain = chain * random_pose(rng);
  CHECK(rotation_defect(chain.rotation()) < 1e-9);
}
