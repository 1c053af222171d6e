#include <doctest.h>

#include <cmath>
#include <numbers>

#include "eulerbody/diagnostics.hpp"
#include "eulerbody/flow_map.hpp"

using namespace eulerbody;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

const MeshSpec kSmall{16, 8, 16, 6.0, 1.0};

// Advance with frozen (l, omega) and refresh metric and Christoffel symbols.
TransformBundle moved_bundle(const ShellMesh& mesh, RigidMotion<double> m, int steps, double dt) {
  const CutoffProfile<double> p;
  TransformBundle b = identity_bundle(mesh.primal.y);
  for (int s = 0; s < steps; ++s) {
    b = advance_flow_map(b, frozen_trajectory(m, b.t, dt), p);
    m.h += dt * m.l;
  }
  metric_and_christoffel(b, mesh.primal);
  return b;
}

RigidMotion<double> generic_motion() {
  RigidMotion<double> m;
  m.l = Vector3d(0.3, 0.2, -0.1);
  m.omega = Vector3d(0.1, -0.2, 0.3);
  return m;
}

}  // namespace

TEST_CASE("zero motion leaves the identity map") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const TransformBundle b = moved_bundle(mesh, RigidMotion<double>{}, 10, 0.05);
  for (int n = 0; n < b.size(); ++n) {
    CHECK((b.X.col(n) - b.nodes.col(n)).norm() == 0.0);
    CHECK((b.JX[n] - Matrix3d::Identity()).norm() == 0.0);
  }
  CHECK(b.t == doctest::Approx(0.5));
}

TEST_CASE("rigid rotation inside r1 is reproduced") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const RigidRegionReport r = study_rigid_region(mesh, CutoffProfile<double>{}, std::numbers::pi / 2, 100);
  CHECK(r.nodes > 0);
  CHECK(r.max_x_err <= 1e-7);
  CHECK(r.max_jac_err <= 1e-7);
}

TEST_CASE("flow map preserves volume") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const VolumeReport r = study_volume_preservation(mesh, CutoffProfile<double>{}, 100, 1e-2, 2, 5);
  CHECK(r.max_det_drift <= 1e-6);
}

TEST_CASE("metric and Christoffel symbols in the identity region") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  TransformBundle b = identity_bundle(mesh.primal.y);
  metric_and_christoffel(b, mesh.primal);
  for (int n = 0; n < b.size(); ++n) {
    CHECK((b.g_lo[n] - Matrix3d::Identity()).norm() == 0.0);
    CHECK((b.g_up[n] - Matrix3d::Identity()).norm() == 0.0);
    for (int k = 0; k < 3; ++k) CHECK(b.Gamma[n][k].norm() == 0.0);
  }
}

TEST_CASE("pure rotation is an isometry inside r1") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  RigidMotion<double> m;
  m.omega = Vector3d(0.2, -0.5, 1.0);
  const TransformBundle b = moved_bundle(mesh, m, 30, 0.02);
  int inside = 0;
  for (int n = 0; n < b.size(); ++n) {
    if (b.nodes.col(n).norm() > 1.4) continue;
    ++inside;
    CHECK((b.g_lo[n] - Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-10);
    for (int k = 0; k < 3; ++k) CHECK(b.Gamma[n][k].cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK(inside > 0);
}

TEST_CASE("Christoffel symbols: symmetry and the trace identity") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const TransformBundle b = moved_bundle(mesh, generic_motion(), 20, 0.02);
  double trace = 0, sym = 0, size = 0;
  for (int n = 0; n < b.size(); ++n) {
    CHECK(std::abs(b.g_lo[n].determinant() - 1) <= 1e-12);
    for (int k = 0; k < 3; ++k) {
      sym = std::max(sym, (b.Gamma[n][k] - b.Gamma[n][k].transpose()).cwiseAbs().maxCoeff());
      size = std::max(size, b.Gamma[n][k].cwiseAbs().maxCoeff());
    }
    for (int i = 0; i < 3; ++i) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += b.Gamma[n][k](i, k);
      trace = std::max(trace, std::abs(s));
    }
  }
  CHECK(size > 1e-2);
  CHECK(sym <= 1e-14);
  CHECK(trace <= 1e-5);
}

TEST_CASE("differenced Christoffel symbols converge to the integrated ones") {
  // interior nodes of the blend annulus, away from the s ends
  auto err = [](const MeshSpec& spec) {
    const ShellMesh mesh(Ellipsoid{}, spec);
    const TransformBundle b = moved_bundle(mesh, generic_motion(), 20, 0.02);
    const auto fd = christoffel_by_differences(b, mesh.primal);
    double e = 0;
    for (int n = 0; n < b.size(); ++n) {
      const double r = b.nodes.col(n).norm();
      if (r < 1.2 || r > 3.6) continue;
      for (int k = 0; k < 3; ++k) e = std::max(e, (fd[n][k] - b.Gamma[n][k]).cwiseAbs().maxCoeff());
    }
    return e;
  };
  const double e1 = err({32, 16, 32, 6.0, 0.0});
  const double e2 = err({64, 32, 64, 6.0, 0.0});
  MESSAGE("max |Gamma_fd - Gamma|: " << e1 << " -> " << e2);
  CHECK(e2 < e1 / 4);
}

TEST_CASE("frame time derivatives") {
  const ShellMesh mesh(Ellipsoid{}, kSmall);
  const CutoffProfile<double> p;

  SUBCASE("identity region and translation inside r1") {
    TransformBundle b = identity_bundle(mesh.primal.y);
    RigidMotion<double> m;
    m.l = Vector3d(1, 0, 0);
    frame_time_derivs(b, m, p);
    for (int n = 0; n < b.size(); ++n) {
      const double r = b.nodes.col(n).norm();
      if (r <= p.r1) CHECK((b.dYdt.col(n) + Vector3d(1, 0, 0)).norm() == 0.0);
      if (r >= p.r2) {
        CHECK(b.dYdt.col(n).norm() == 0.0);
        CHECK(b.dJXdt[n].norm() == 0.0);
      }
    }
  }

  SUBCASE("match time differences of consecutive bundles") {
    RigidMotion<double> m = generic_motion();
    const double dt = 0.01;
    TransformBundle b = identity_bundle(mesh.primal.y);
    for (int s = 0; s < 10; ++s) {
      b = advance_flow_map(b, frozen_trajectory(m, b.t, dt), p);
      m.h += dt * m.l;
    }
    RigidMotion<double> back = m;
    back.l = -m.l;
    back.omega = -m.omega;
    const TransformBundle prev = advance_flow_map(b, frozen_trajectory(back, b.t, dt), p);
    const TransformBundle next = advance_flow_map(b, frozen_trajectory(m, b.t, dt), p);
    frame_time_derivs(b, m, p);
    double ey = 0, ej = 0;
    for (int n = 0; n < b.size(); ++n) {
      const Vector3d dX = (next.X.col(n) - prev.X.col(n)) / (2 * dt);
      ey = std::max(ey, (b.dYdt.col(n) + b.JY[n] * dX).norm());
      ej = std::max(ej, (b.dJXdt[n] - (next.JX[n] - prev.JX[n]) / (2 * dt)).cwiseAbs().maxCoeff());
    }
    CHECK(ey <= 1e-3);
    CHECK(ej <= 1e-3);
  }
}

TEST_CASE("second derivatives of X match differences of JX") {
  // X is smooth in y, so HX can be checked against JX at a displaced node set.
  const CutoffProfile<double> p;
  const RigidMotion<double> m0 = generic_motion();
  Eigen::Matrix3Xd nodes(3, 4);
  nodes << 1.8, -2.0, 0.3, 2.4,  //
      0.2, 1.1, -2.2, 0.5,       //
      -0.4, 0.9, 0.6, -1.3;
  const double h = 1e-4;
  auto run = [&](const Eigen::Matrix3Xd& y) {
    RigidMotion<double> m = m0;
    TransformBundle b = identity_bundle(y);
    for (int s = 0; s < 20; ++s) {
      b = advance_flow_map(b, frozen_trajectory(m, b.t, 0.02), p);
      m.h += 0.02 * m.l;
    }
    return b;
  };
  const TransformBundle b = run(nodes);
  for (int q = 0; q < 3; ++q) {
    Eigen::Matrix3Xd yp = nodes, ym = nodes;
    yp.row(q).array() += h;
    ym.row(q).array() -= h;
    const TransformBundle bp = run(yp), bm = run(ym);
    for (int n = 0; n < b.size(); ++n) {
      const Matrix3d dJ = (bp.JX[n] - bm.JX[n]) / (2 * h);
      for (int c = 0; c < 3; ++c) CHECK((b.HX[n][c].col(q) - dJ.row(c).transpose()).norm() <= 1e-6);
    }
  }
}
