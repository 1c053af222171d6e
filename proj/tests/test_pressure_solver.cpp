#include <doctest.h>

#include <cmath>
#include <numbers>

#include "eulerbody/diagnostics.hpp"
#include "eulerbody/pressure_solver.hpp"
#include "eulerbody/time_stepper.hpp"

using namespace eulerbody;
using Eigen::Matrix3Xd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

const MeshSpec kSmall{16, 8, 16, 6.0, 1.0};

RigidBodyState<double> rest_state(const ShellMesh& mesh) {
  RigidBodyState<double> s;
  s.mass = mesh.mass;
  s.Jbar = mesh.Jbar;
  return s;
}

TransformBundle flat_bundle(const ShellMesh& mesh) {
  TransformBundle b = identity_bundle(mesh.primal.y);
  metric_and_christoffel(b, mesh.primal);
  frame_time_derivs(b, RigidMotion<double>{}, CutoffProfile<double>{});
  return b;
}

VectorXd dual_field(const ShellMesh& mesh, double (*f)(const Vector3d&)) {
  VectorXd q(mesh.dual.grid.size());
  for (int i = 0; i < q.size(); ++i) q(i) = f(mesh.dual.y.col(i));
  return q;
}

}  // namespace

TEST_CASE("zero data gives zero pressure, force and torque") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const PressureSolver ps(mesh);
  const TransformBundle b = flat_bundle(mesh);
  const PressureProblem prob = assemble_pressure_problem(ps, Matrix3Xd::Zero(3, mesh.primal.grid.size()), b, rest_state(mesh));
  CHECK(prob.rhs.cwiseAbs().maxCoeff() == 0.0);
  const PressureSolution sol = ps.solve(prob);
  CHECK(sol.q.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.force.norm() == 0.0);
  CHECK(sol.torque.norm() == 0.0);
}

TEST_CASE("surface force and torque") {
  const ShellMesh mesh(Ellipsoid{}, {32, 16, 32, 6.0, 1.0});
  SUBCASE("constant pressure") {
    const VectorXd q = VectorXd::Constant(mesh.dual.grid.size(), 2.5);
    auto [F, T] = surface_force_torque(mesh, q);
    CHECK(F.norm() <= 1e-12);
    CHECK(T.norm() <= 1e-12);
  }
  SUBCASE("q = n3 on the unit sphere") {
    // n here points out of the fluid, i.e. into the body.
    const VectorXd q = dual_field(mesh, [](const Vector3d& y) { return y(2) / y.norm(); });
    auto [F, T] = surface_force_torque(mesh, q);
    const double ref = -4 * std::numbers::pi / 3;
    CHECK(std::abs(F(2) - ref) <= 3e-3 * std::abs(ref));
    CHECK(std::abs(F(0)) <= 1e-12);
    CHECK(std::abs(F(1)) <= 1e-12);
  }
  SUBCASE("q = y1 has no torque") {
    const VectorXd q = dual_field(mesh, [](const Vector3d& y) { return y(0); });
    auto [F, T] = surface_force_torque(mesh, q);
    CHECK(T.norm() <= 1e-12);
  }
}

TEST_CASE("quadrature of n3 converges at 2nd order") {
  auto err = [](const MeshSpec& spec) {
    const ShellMesh mesh(Ellipsoid{}, spec);
    const VectorXd q = dual_field(mesh, [](const Vector3d& y) { return y(2) / y.norm(); });
    return std::abs(surface_force_torque(mesh, q).first(2) + 4 * std::numbers::pi / 3);
  };
  const double e1 = err({8, 8, 16, 6.0, 1.0}), e2 = err({8, 16, 32, 6.0, 1.0});
  CHECK(std::log2(e1 / e2) >= 1.8);
}

TEST_CASE("pressure form is symmetric and coercive") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const PressureSolver ps(mesh);
  const CoercivityReport r = study_coercivity(mesh, ps, CutoffProfile<double>{}, 10, 4);
  CHECK(r.min_B > 0);
  CHECK(r.metric_floor > 0);
  CHECK(r.max_asymmetry <= 1e-10);
}

TEST_CASE("flat-region right-hand side of a quadratic field") {
  // v = (y2^2, y3^2, y1^2): sum_ij d_i v_j d_j v_i = 0, so interior data vanish to FD order.
  auto err = [](const MeshSpec& spec) {
    const ShellMesh mesh(Ellipsoid{}, spec);
    const PressureSolver ps(mesh);
    const TransformBundle b = flat_bundle(mesh);
    Matrix3Xd v(3, mesh.primal.grid.size());
    for (int c = 0; c < v.cols(); ++c) {
      const Vector3d y = mesh.primal.y.col(c);
      v.col(c) = Vector3d(y(1) * y(1), y(2) * y(2), y(0) * y(0));
    }
    const PressureProblem p = assemble_pressure_problem(ps, apply_convection(mesh, v, b), b, rest_state(mesh));
    const LogicalGrid& g = mesh.dual.grid;
    double num = 0, den = 0;
    for (int i = 2; i < g.ni - 2; ++i)
      for (int j = 0; j < g.nt; ++j)
        for (int k = 0; k < g.np; ++k) {
          const int c = g.index(i, j, k);
          num += p.rhs(c) * p.rhs(c) / mesh.dual.volume(c);
          den += mesh.dual.volume(c) * 4 * std::pow(mesh.dual.y.col(c).squaredNorm(), 2);
        }
    return std::sqrt(num / den);
  };
  const double e1 = err({16, 8, 16, 6.0, 0.0}), e2 = err({32, 16, 32, 6.0, 0.0});
  MESSAGE("relative interior rhs: " << e1 << " -> " << e2);
  CHECK(e2 <= e1 / 3);
}

TEST_CASE("rigid-body data: compatible right-hand side") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const PressureSolver ps(mesh);
  const TransformBundle b = flat_bundle(mesh);
  RigidBodyState<double> s = rest_state(mesh);
  s.L = Vector3d(0.3, -0.2, 0.1);
  s.R = Vector3d(0.0, 0.4, 0.7);
  sync_world(s);
  const PressureProblem p = assemble_pressure_problem(ps, Matrix3Xd::Zero(3, mesh.primal.grid.size()), b, s);
  CHECK(std::abs(p.rhs.sum()) <= 1e-12 * p.rhs.norm());
  const PressureSolution sol = ps.solve(p);
  CHECK(sol.residual <= 1e-10);
  CHECK(sol.history.size() == static_cast<std::size_t>(sol.iterations + 1));
}

TEST_CASE("manufactured solution converges at 2nd order") {
  const ManufacturedReport r = study_pressure_convergence(2);
  MESSAGE("errors " << r.levels[0].l2_error << " " << r.levels[1].l2_error);
  CHECK(r.min_order >= 1.8);
}

TEST_CASE("gauge fixes the weighted mean") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const PressureSolver ps(mesh);
  VectorXd q = dual_field(mesh, [](const Vector3d& y) { return 3.0 + y(0) * y(1); });
  ps.gauge(q);
  CHECK(std::abs(ps.gauge_weights().dot(q)) <= 1e-12 * ps.gauge_weights().sum());
}
