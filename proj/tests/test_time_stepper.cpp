#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "eulerbody/diagnostics.hpp"
#include "eulerbody/time_stepper.hpp"

using namespace eulerbody;
using Eigen::Matrix3d;
using Eigen::Matrix3Xd;
using Eigen::Vector3d;

namespace {

const MeshSpec kSmall{16, 8, 16, 6.0, 1.0};

TransformBundle flat_bundle(const ShellMesh& mesh) {
  TransformBundle b = identity_bundle(mesh.primal.y);
  metric_and_christoffel(b, mesh.primal);
  frame_time_derivs(b, RigidMotion<double>{}, CutoffProfile<double>{});
  return b;
}

template <typename F>
Matrix3Xd sample(const ShellMesh& mesh, F&& f) {
  Matrix3Xd v(3, mesh.primal.grid.size());
  for (int c = 0; c < v.cols(); ++c) v.col(c) = f(Vector3d(mesh.primal.y.col(c)));
  return v;
}

double rel_l2(const ShellMesh& mesh, const Matrix3Xd& a, const Matrix3Xd& b) {
  const auto& V = mesh.primal.volume;
  return std::sqrt(((a - b).colwise().squaredNorm().transpose().array() * V.array()).sum() /
                   (b.colwise().squaredNorm().transpose().array() * V.array()).sum());
}

RigidBodyState<double> moving(const Vector3d& L, const Vector3d& R) {
  RigidBodyState<double> r;
  r.L = L;
  r.R = R;
  sync_world(r);
  return r;
}

struct Rig {
  explicit Rig(const MeshSpec& spec, StepperOptions opt = {})
      : mesh(Ellipsoid{}, spec), P(mesh), ps(mesh), stepper(mesh, P, ps, CutoffProfile<double>{}, opt) {}
  ShellMesh mesh;
  Projector P;
  PressureSolver ps;
  Stepper stepper;
};

}  // namespace

TEST_CASE("convection in the flat region") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const TransformBundle b = flat_bundle(mesh);
  CHECK(apply_convection(mesh, Matrix3Xd::Zero(3, mesh.primal.grid.size()), b).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("linear shear has no self-advection") {
    const Matrix3Xd v = sample(mesh, [](const Vector3d& y) { return Vector3d(y(1), 0, 0); });
    const Matrix3Xd w = apply_convection(mesh, v, b);
    const double scale = std::sqrt((v.colwise().squaredNorm().transpose().array() * mesh.primal.volume.array()).sum());
    const double err = std::sqrt((w.colwise().squaredNorm().transpose().array() * mesh.primal.volume.array()).sum());
    CHECK(err <= 0.02 * scale);
  }
  SUBCASE("strain field, converging at 2nd order") {
    auto err = [](const MeshSpec& spec) {
      const ShellMesh m(Ellipsoid{}, spec);
      const TransformBundle bb = flat_bundle(m);
      const Matrix3Xd v = sample(m, [](const Vector3d& y) { return Vector3d(y(0), -y(1), 0); });
      const Matrix3Xd ex = sample(m, [](const Vector3d& y) { return Vector3d(y(0), y(1), 0); });
      return rel_l2(m, apply_convection(m, v, bb), ex);
    };
    const double e1 = err(kSmall), e2 = err({32, 16, 32, 6.0, 1.0});
    CHECK(e1 <= 0.03);
    CHECK(std::log2(e1 / e2) >= 1.7);
  }
}

TEST_CASE("energy bookkeeping") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  SimState s;
  s.v = GridField::zero(mesh.primal.grid.size());
  s.bundle = flat_bundle(mesh);
  s.rigid.mass = 2.0;
  s.rigid.Jbar = mesh.Jbar;
  CHECK(total_energy(mesh, s) == 0.0);
  s.rigid.L = Vector3d(1, 0, 0);
  CHECK(total_energy(mesh, s) == doctest::Approx(1.0).epsilon(1e-15));
  s.rigid.L.setZero();
  s.rigid.R = Vector3d(0, 0, 1);
  CHECK(total_energy(mesh, s) == doctest::Approx(0.5 * mesh.Jbar(2, 2)).epsilon(1e-15));
  CHECK(mesh.Jbar(2, 2) == doctest::Approx(0.4 * 4 * std::numbers::pi / 3).epsilon(1e-12));
}

TEST_CASE("rest state stays exactly at rest") {
  Rig rig(kSmall);
  SimState s = rig.stepper.initialize(moving(Vector3d::Zero(), Vector3d::Zero()), Matrix3Xd::Zero(3, rig.mesh.primal.grid.size()));
  for (int i = 0; i < 3; ++i) {
    s = rig.stepper.picard_step(s, 0.01);
    CHECK(s.v.fluid.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.rigid.L.norm() == 0.0);
    CHECK(s.rigid.R.norm() == 0.0);
    CHECK(s.diag.energy == 0.0);
  }
  CHECK(s.t == doctest::Approx(0.03));
}

TEST_CASE("free sphere in potential flow keeps its momentum") {
  Rig rig(kSmall);
  const Vector3d L0(0.5, 0, 0);
  const SimState s0 = rig.stepper.initialize(moving(L0, Vector3d::Zero()), potential_flow_sphere(rig.mesh, L0));
  const RunRecord rec = run_monitored(rig.stepper, s0, 0.2, 0.01, L0, Vector3d::Zero());
  CHECK(rec.steps == 20);
  CHECK(rec.max_L_dev() <= 0.02);
  CHECK(rec.max_energy_drift() <= 0.01);
  CHECK(rec.max_qv() <= 1e-8);
  CHECK(rec.pressure_growth() <= 10);
}

TEST_CASE("spinning sphere does not stir the fluid") {
  Rig rig(kSmall);
  const Vector3d R0(0, 0, 1.0);
  const SimState s0 = rig.stepper.initialize(moving(Vector3d::Zero(), R0), Matrix3Xd::Zero(3, rig.mesh.primal.grid.size()));
  const RunRecord rec = run_monitored(rig.stepper, s0, 0.1, 0.01, Vector3d::Zero(), R0);
  CHECK(rec.max_R_dev() <= 1e-6);
  CHECK(rec.max_fluid_ke() <= 1e-10);
}

TEST_CASE("twin runs") {
  Rig rig(kSmall);
  const Vector3d L0(0.5, 0, 0);
  const auto r0 = moving(L0, Vector3d::Zero());
  const Matrix3Xd u0 = potential_flow_sphere(rig.mesh, L0);
  SUBCASE("zero perturbation gives identical runs") {
    const TwinReport r = twin_run_divergence(rig.stepper, r0, u0, 0.0, Vector3d(1, 0, 0), 0.03, 0.01);
    REQUIRE(r.e.size() == 4);
    for (double e : r.e) CHECK(e == 0.0);
  }
  SUBCASE("small perturbation stays small") {
    const TwinReport r = twin_run_divergence(rig.stepper, r0, u0, 1e-6, Vector3d(1, 1, 1), 0.05, 0.01);
    CHECK(r.e.front() > 0);
    for (double e : r.e) CHECK(e <= 100 * r.e.front());
  }
}

TEST_CASE("log-linear fit") {
  TwinReport r;
  for (int i = 0; i <= 10; ++i) {
    r.t.push_back(0.1 * i);
    r.e.push_back(1e-12 * std::exp(0.7 * 0.1 * i));
  }
  fit_log_linear(r);
  CHECK(r.rate == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(r.intercept == doctest::Approx(std::log(1e-12)).epsilon(1e-12));
  CHECK(r.max_log_residual <= 1e-10);
}

TEST_CASE("trapezoidal stepper self-converges at 2nd order") {
  StepperOptions opt;
  opt.picard_tol = 1e-12;
  Rig rig(kSmall, opt);
  const Vector3d L0(0.4, 0.1, 0);
  const Vector3d R0(0.3, 0.0, 0.5);
  const SimState s0 = rig.stepper.initialize(moving(L0, R0), potential_flow_sphere(rig.mesh, L0));
  auto run = [&](double dt) { return rig.stepper.advance(s0, 0.08, dt); };
  const SimState a = run(0.02), b = run(0.01), c = run(0.005);
  auto dist = [&](const SimState& x, const SimState& y) {
    GridField d = x.v - y.v;
    return norm_xtilde(rig.mesh, d);
  };
  const double d1 = dist(a, b), d2 = dist(b, c);
  MESSAGE("self-convergence ratio " << d1 / d2);
  CHECK(d1 / d2 >= 3.0);
}

TEST_CASE("physical reconstruction") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const CutoffProfile<double> p;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd(0.0, 1.0);
  SimState s;
  s.v = GridField::zero(mesh.primal.grid.size());
  for (Eigen::Index i = 0; i < s.v.fluid.size(); ++i) s.v.fluid.data()[i] = nd(rng);
  s.bundle = identity_bundle(mesh.primal.y);

  SUBCASE("identity transform") {
    const PhysicalSnapshot ph = reconstruct_physical(s);
    CHECK((ph.u - s.v.fluid).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ph.x - mesh.primal.y).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("pure rotation") {
    RigidMotion<double> m;
    m.omega = Vector3d(0, 0, 1);
    const int steps = 50;
    const double T = 0.5;
    for (int i = 0; i < steps; ++i) s.bundle = advance_flow_map(s.bundle, frozen_trajectory(m, s.bundle.t, T / steps), p);
    s.rigid.Q = rotation_about<double>(Vector3d(0, 0, 1), T);
    const PhysicalSnapshot ph = reconstruct_physical(s);
    for (int n = 0; n < s.bundle.size(); ++n) {
      const double r = mesh.primal.y.col(n).norm();
      if (r <= p.r1) CHECK((ph.u.col(n) - s.rigid.Q * s.v.fluid.col(n)).norm() <= 1e-7 * s.v.fluid.col(n).norm());
      if (r >= p.r2 + 1e-9) CHECK((ph.u.col(n) - s.v.fluid.col(n)).norm() == 0.0);
    }
  }
}

TEST_CASE("CFL guard and step control") {
  Rig rig(kSmall);
  const Vector3d L0(0.5, 0, 0);
  const SimState s0 = rig.stepper.initialize(moving(L0, Vector3d::Zero()), potential_flow_sphere(rig.mesh, L0));
  const double c = rig.stepper.cfl(s0, 1.0);
  CHECK(c > 0);
  const double too_big = 2.0 * rig.stepper.options().cfl_max / c;
  CHECK_THROWS_AS(rig.stepper.picard_step(s0, too_big), CflViolation);
  int commits = 0;
  const SimState s1 = rig.stepper.advance(s0, too_big, too_big, [&](const SimState&) { ++commits; });
  CHECK(s1.t == doctest::Approx(too_big));
  CHECK(commits >= 2);
}

TEST_CASE("stepper rejects an unusable cut-off") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const Projector P(mesh);
  const PressureSolver ps(mesh);
  CutoffProfile<double> bad;
  bad.r1 = 0.9;
  CHECK_THROWS_AS(Stepper(mesh, P, ps, bad), ValidationError);
  bad.r1 = 1.5;
  bad.r2 = 7.0;
  CHECK_THROWS_AS(Stepper(mesh, P, ps, bad), ValidationError);
}
