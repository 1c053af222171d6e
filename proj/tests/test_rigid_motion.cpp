#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "eulerbody/diagnostics.hpp"
#include "eulerbody/rigid_motion.hpp"

using namespace eulerbody;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(const Matrix3d& m) { return m.cwiseAbs().maxCoeff(); }

RigidMotion<double> random_motion(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RigidMotion<double> m;
  m.h = 0.5 * Vector3d(u(rng), u(rng), u(rng));
  m.l = Vector3d(u(rng), u(rng), u(rng));
  m.omega = Vector3d(u(rng), u(rng), u(rng));
  return m;
}

Vector3d random_point_in_shell(std::mt19937_64& rng, const Vector3d& c, double r0, double r1) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(r0, r1);
  return c + u(rng) * Vector3d(n(rng), n(rng), n(rng)).normalized();
}

}  // namespace

TEST_CASE("rotation: zero angular velocity keeps the identity") {
  const Matrix3d Q = advance_rotation<double>(Matrix3d::Identity(), Vector3d::Zero(), 0.37, 5);
  CHECK(max_abs(Q - Matrix3d::Identity()) == 0.0);
}

TEST_CASE("rotation: quarter turn about z matches the closed form") {
  const Matrix3d Q = advance_rotation<double>(Matrix3d::Identity(), Vector3d(0, 0, 1), kPi / 2, 100);
  Matrix3d ref;
  ref << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK(max_abs(Q - ref) <= 1e-8);
}

TEST_CASE("rotation: full turn returns to the identity") {
  const Matrix3d Q = advance_rotation<double>(Matrix3d::Identity(), Vector3d(0, 0, 1), 2 * kPi, 400);
  CHECK(max_abs(Q - Matrix3d::Identity()) <= 1e-6);
}

TEST_CASE("rotation: every step stays orthonormal and error is 4th order") {
  const Vector3d R(0.3, -0.8, 0.5);
  Matrix3d Q = Matrix3d::Identity();
  for (int i = 0; i < 200; ++i) {
    Q = advance_rotation<double>(Q, R, R, 0.05);
    CHECK(max_abs(Q.transpose() * Q - Matrix3d::Identity()) <= 1e-10);
    CHECK(Q.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
  const double T = 2.0;
  const Matrix3d exact = rotation_about<double>(R, R.norm() * T);
  const double e1 = max_abs(advance_rotation<double>(Matrix3d::Identity(), R, T, 10) - exact);
  const double e2 = max_abs(advance_rotation<double>(Matrix3d::Identity(), R, T, 20) - exact);
  CHECK(std::log2(e1 / e2) >= 3.7);
}

TEST_CASE("rotation: non-finite input is rejected") {
  CHECK_THROWS_AS(advance_rotation<double>(Matrix3d::Identity(), Vector3d(NAN, 0, 0), 0.1, 1), InvalidStateError);
}

TEST_CASE("body_to_world") {
  RigidBodyState<double> s;
  s.L = Vector3d(1, 0, 0);
  s.R = Vector3d(0, 1, 0);
  auto [l, w] = body_to_world(s);
  CHECK((l - Vector3d(1, 0, 0)).norm() == 0.0);
  CHECK((w - Vector3d(0, 1, 0)).norm() == 0.0);

  s.Q = rotation_about<double>(Vector3d(0, 0, 1), kPi / 2);
  s.L = Vector3d(1, 0, 0);
  std::tie(l, w) = body_to_world(s);
  CHECK((l - Vector3d(0, 1, 0)).norm() <= 1e-15);

  s.Q = rotation_about<double>(Vector3d(1, 0, 0), kPi);
  s.R = Vector3d(0, 0, 1);
  std::tie(l, w) = body_to_world(s);
  CHECK((w - Vector3d(0, 0, -1)).norm() <= 1e-15);
  // A(omega) = Q A(R) Q^T
  CHECK(max_abs(skew<double>(w) - s.Q * skew<double>(s.R) * s.Q.transpose()) <= 1e-15);
}

TEST_CASE("rigid velocity") {
  RigidMotion<double> m;
  CHECK(eval_rigid_velocity<double>(Vector3d(3, -1, 2), m).norm() == 0.0);
  m.l = Vector3d(1, 0, 0);
  CHECK((eval_rigid_velocity<double>(Vector3d(3, -1, 2), m) - m.l).norm() == 0.0);
  m.l.setZero();
  m.omega = Vector3d(0, 0, 1);
  CHECK((eval_rigid_velocity<double>(Vector3d(1, 0, 0), m) - Vector3d(0, 1, 0)).norm() == 0.0);
}

TEST_CASE("stream moment") {
  RigidMotion<double> m;
  CHECK(eval_stream_moment<double>(Vector3d(1, 2, 3), m).norm() == 0.0);
  m.omega = Vector3d(0, 0, 1);
  CHECK((eval_stream_moment<double>(Vector3d(1, 0, 0), m) - Vector3d(0, 0, 0.5)).norm() == 0.0);
}

TEST_CASE("psi V + grad psi x W is divergence-free at random points") {
  const CutoffProfile<double> p;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const RigidMotion<double> m = random_motion(rng);
    const Vector3d x = random_point_in_shell(rng, m.h, p.r1, p.r2);
    // Assemble psi V + grad(psi) x W from its ingredients, independently of eval_lambda.
    auto field = [&](const Vector3d& z) -> Vector3d {
      const Vector3d r = z - m.h;
      const double rho = r.norm();
      const Vector3d grad_psi = rho > 0 ? Vector3d(p.d1(rho) * r / rho) : Vector3d::Zero();
      return eval_cutoff<double>(z, m, p) * eval_rigid_velocity<double>(z, m) +
             grad_psi.cross(eval_stream_moment<double>(z, m));
    };
    const double h = 1e-3;
    double div = 0;
    for (int a = 0; a < 3; ++a) {
      const Vector3d e = h * Vector3d::Unit(a);
      div += (-field(x + 2 * e)(a) + 8 * field(x + e)(a) - 8 * field(x - e)(a) + field(x - 2 * e)(a)) / (12 * h);
    }
    CHECK(std::abs(div) <= 1e-6);
    CHECK((field(x) - eval_lambda<double>(x, m, p)).norm() <= 1e-13);
  }
}

TEST_CASE("cut-off profile") {
  const CutoffProfile<double> p;
  RigidMotion<double> m;
  m.h = Vector3d(0.2, 0.1, -0.3);
  CHECK(eval_cutoff<double>(m.h + Vector3d(p.r1, 0, 0), m, p) == 1.0);
  CHECK(eval_cutoff<double>(m.h + Vector3d(0, 0.5, 0), m, p) == 1.0);
  CHECK(eval_cutoff<double>(m.h + Vector3d(0, 0, p.r2), m, p) == 0.0);
  CHECK(eval_cutoff<double>(m.h + Vector3d(4, 4, 4), m, p) == 0.0);
  CHECK(p.value((p.r1 + p.r2) / 2) == doctest::Approx(0.5).epsilon(1e-14));
  double prev = 1.0;
  for (int i = 0; i <= 100; ++i) {
    const double z = p.value(p.r1 + (p.r2 - p.r1) * i / 100.0);
    CHECK(z <= prev);
    CHECK(z >= 0.0);
    prev = z;
  }
  // derivatives vanish at both ends and match differences inside
  for (double r : {p.r1, p.r2}) {
    CHECK(p.d1(r) == 0.0);
    CHECK(p.d2(r) == 0.0);
  }
  for (double r : {1.7, 2.25, 2.8}) {
    const double h = 1e-5;
    CHECK(p.d1(r) == doctest::Approx((p.value(r + h) - p.value(r - h)) / (2 * h)).epsilon(1e-7));
    CHECK(p.d2(r) == doctest::Approx((p.d1(r + h) - p.d1(r - h)) / (2 * h)).epsilon(1e-7));
    CHECK(p.d3(r) == doctest::Approx((p.d2(r + h) - p.d2(r - h)) / (2 * h)).epsilon(1e-6));
  }
  // third derivative is continuous at the ends
  CHECK(std::abs(p.d3(p.r1 + 1e-6)) <= 1e-8);
  CHECK(std::abs(p.d3(p.r2 - 1e-6)) <= 1e-8);
}

TEST_CASE("Lambda: rigid inside r1, zero outside r2") {
  const CutoffProfile<double> p;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const RigidMotion<double> m = random_motion(rng);
    const Vector3d xin = random_point_in_shell(rng, m.h, 0.0, p.r1);
    const Vector3d v = eval_lambda<double>(xin, m, p);
    CHECK((v - eval_rigid_velocity<double>(xin, m)).norm() == 0.0);
    const Vector3d xout = random_point_in_shell(rng, m.h, p.r2, 6.0);
    CHECK(eval_lambda<double>(xout, m, p).norm() == 0.0);
  }
}

TEST_CASE("Lambda is jointly linear in (l, omega)") {
  const CutoffProfile<double> p;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    RigidMotion<double> a = random_motion(rng), b = random_motion(rng);
    b.h = a.h;
    RigidMotion<double> c = a;
    c.l = 2.0 * a.l - 0.5 * b.l;
    c.omega = 2.0 * a.omega - 0.5 * b.omega;
    const Vector3d x = random_point_in_shell(rng, a.h, 0.5, 3.5);
    const Vector3d lhs = eval_lambda<double>(x, c, p);
    const Vector3d rhs = 2.0 * eval_lambda<double>(x, a, p) - 0.5 * eval_lambda<double>(x, b, p);
    CHECK((lhs - rhs).norm() <= 1e-13);
  }
}

TEST_CASE("Lambda Jacobian and Hessian match differences") {
  const CutoffProfile<double> p;
  std::mt19937_64 rng(17);
  const double h = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const RigidMotion<double> m = random_motion(rng);
    const Vector3d x = random_point_in_shell(rng, m.h, p.r1 + 0.01, p.r2 - 0.01);
    const Matrix3d J = eval_lambda_jacobian<double>(x, m, p);
    const auto H = eval_lambda_hessian<double>(x, m, p);
    for (int q = 0; q < 3; ++q) {
      const Vector3d e = h * Vector3d::Unit(q);
      const Vector3d dl = (eval_lambda<double>(x + e, m, p) - eval_lambda<double>(x - e, m, p)) / (2 * h);
      CHECK((J.col(q) - dl).norm() <= 1e-7);
      const Matrix3d dJ = (eval_lambda_jacobian<double>(x + e, m, p) - eval_lambda_jacobian<double>(x - e, m, p)) / (2 * h);
      for (int c = 0; c < 3; ++c) CHECK((H[c].col(q) - dJ.row(c).transpose()).norm() <= 1e-6);
    }
    CHECK(std::abs(J.trace()) <= 1e-12);
  }
}

TEST_CASE("div Lambda decays at 4th order in the difference step") {
  const DivLambdaReport r = study_div_lambda(CutoffProfile<double>{}, 10, 21);
  CHECK(r.min_order >= 3.5);
  CHECK(r.max_div.back() <= 1e-4);
}
