#include "eulerbody/flow_map.hpp"

#include <cmath>
#include <sstream>

#include "eulerbody/errors.hpp"

namespace eulerbody {

using Eigen::Matrix3d;
using Eigen::Vector3d;

RigidTrajectory frozen_trajectory(const RigidMotion<double>& m, double t0, double dt) {
  RigidTrajectory tr;
  tr.t0 = t0;
  tr.dt = dt;
  tr.m0 = m;
  tr.mh = m;
  tr.mh.h = m.h + 0.5 * dt * m.l;
  tr.m1 = m;
  tr.m1.h = m.h + dt * m.l;
  return tr;
}

TransformBundle identity_bundle(const Eigen::Matrix3Xd& nodes, double t) {
  TransformBundle b;
  const int n = static_cast<int>(nodes.cols());
  b.t = t;
  b.nodes = nodes;
  b.X = nodes;
  b.JX.assign(n, Matrix3d::Identity());
  b.JY.assign(n, Matrix3d::Identity());
  b.HX.assign(n, Christoffel{Matrix3d::Zero(), Matrix3d::Zero(), Matrix3d::Zero()});
  b.g_lo.assign(n, Matrix3d::Identity());
  b.g_up.assign(n, Matrix3d::Identity());
  Christoffel zero{Matrix3d::Zero(), Matrix3d::Zero(), Matrix3d::Zero()};
  b.Gamma.assign(n, zero);
  b.dYdt = Eigen::Matrix3Xd::Zero(3, n);
  b.dJXdt.assign(n, Matrix3d::Zero());
  b.identity.assign(n, 1);
  return b;
}

TransformBundle advance_flow_map(const TransformBundle& b, const RigidTrajectory& traj,
                                 const CutoffProfile<double>& profile) {
  if (!profile.valid()) throw InvalidStateError("advance_flow_map: invalid cut-off profile");
  if (!(traj.dt > 0)) throw InvalidStateError("advance_flow_map: dt must be positive");
  TransformBundle out = b;
  const double dt = traj.dt;
  const double r2 = profile.r2;
  double worst = 0;
  int worst_node = -1;
  for (int n = 0; n < b.size(); ++n) {
    const Vector3d x = b.X.col(n);
    if (b.identity[n] && (x - traj.m0.h).norm() >= r2 && (x - traj.mh.h).norm() >= r2 &&
        (x - traj.m1.h).norm() >= r2) {
      continue;
    }
    const Matrix3d& J = b.JX[n];
    const Christoffel& H = b.HX[n];
    // d(HX_m)/dt = JX^T Hess(Lambda_m) JX + sum_p dLambda_m/dx_p HX_p
    auto hrate = [&](const Vector3d& xs, const RigidMotion<double>& m, const Matrix3d& Js, const Christoffel& Hs,
                     const Matrix3d& DL) {
      const Christoffel HL = eval_lambda_hessian(xs, m, profile);
      Christoffel r;
      for (int c = 0; c < 3; ++c) {
        r[c] = Js.transpose() * HL[c] * Js;
        for (int q = 0; q < 3; ++q) r[c] += DL(c, q) * Hs[q];
      }
      return r;
    };
    auto axpy = [](const Christoffel& a, double s, const Christoffel& d) {
      return Christoffel{a[0] + s * d[0], a[1] + s * d[1], a[2] + s * d[2]};
    };
    const Vector3d k1 = eval_lambda(x, traj.m0, profile);
    const Matrix3d D1 = eval_lambda_jacobian(x, traj.m0, profile);
    const Matrix3d K1 = D1 * J;
    const Christoffel L1 = hrate(x, traj.m0, J, H, D1);
    const Vector3d x2 = x + 0.5 * dt * k1;
    const Matrix3d J2 = J + 0.5 * dt * K1;
    const Christoffel H2 = axpy(H, 0.5 * dt, L1);
    const Vector3d k2 = eval_lambda(x2, traj.mh, profile);
    const Matrix3d D2 = eval_lambda_jacobian(x2, traj.mh, profile);
    const Matrix3d K2 = D2 * J2;
    const Christoffel L2 = hrate(x2, traj.mh, J2, H2, D2);
    const Vector3d x3 = x + 0.5 * dt * k2;
    const Matrix3d J3 = J + 0.5 * dt * K2;
    const Christoffel H3 = axpy(H, 0.5 * dt, L2);
    const Vector3d k3 = eval_lambda(x3, traj.mh, profile);
    const Matrix3d D3 = eval_lambda_jacobian(x3, traj.mh, profile);
    const Matrix3d K3 = D3 * J3;
    const Christoffel L3 = hrate(x3, traj.mh, J3, H3, D3);
    const Vector3d x4 = x + dt * k3;
    const Matrix3d J4 = J + dt * K3;
    const Christoffel H4 = axpy(H, dt, L3);
    const Vector3d k4 = eval_lambda(x4, traj.m1, profile);
    const Matrix3d D4 = eval_lambda_jacobian(x4, traj.m1, profile);
    const Matrix3d K4 = D4 * J4;
    const Christoffel L4 = hrate(x4, traj.m1, J4, H4, D4);
    for (int c = 0; c < 3; ++c) out.HX[n][c] = H[c] + dt / 6 * (L1[c] + 2 * L2[c] + 2 * L3[c] + L4[c]);

    const Vector3d xn = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    Matrix3d Jn = J + dt / 6 * (K1 + 2 * K2 + 2 * K3 + K4);
    if (!xn.allFinite() || !Jn.allFinite()) throw InvalidStateError("advance_flow_map: non-finite flow map");
    const double d = Jn.determinant();
    if (std::abs(d - 1) > worst) {
      worst = std::abs(d - 1);
      worst_node = n;
    }
    Jn *= 1.0 - (d - 1.0) / (3.0 * d);
    out.X.col(n) = xn;
    out.JX[n] = Jn;
    out.JY[n] = Jn.inverse();
    out.identity[n] = 0;
  }
  if (worst > 1e-3) {
    std::ostringstream msg;
    msg << "advance_flow_map: |det JX - 1| = " << worst << " at node " << worst_node;
    throw DiffeomorphismError(msg.str());
  }
  out.t = b.t + dt;
  return out;
}

TransformBundle advance_flow_map(const TransformBundle& b, const RigidBodyState<double>& state,
                                 const CutoffProfile<double>& profile, double dt) {
  return advance_flow_map(b, frozen_trajectory(motion_of(state), b.t, dt), profile);
}

namespace {

// d/dxi of a per-node matrix field along one logical direction, 4th order.
template <typename Get>
Matrix3d d4(Get&& f, const int idx[5], double h) {
  return (-f(idx[0]) + 8.0 * f(idx[1]) - 8.0 * f(idx[3]) + f(idx[4])) / (12.0 * h);
}

}  // namespace

void metric_and_christoffel(TransformBundle& b, const CellGeometry& geom) {
  const LogicalGrid& gr = geom.grid;
  if (gr.size() != b.size()) throw AssemblyError("metric_and_christoffel: bundle/mesh size mismatch");
  for (int n = 0; n < b.size(); ++n) {
    if (b.identity[n]) {
      b.g_lo[n].setIdentity();
      b.g_up[n].setIdentity();
      continue;
    }
    b.g_lo[n] = b.JX[n].transpose() * b.JX[n];
    b.g_up[n] = b.JY[n] * b.JY[n].transpose();
    Eigen::LLT<Matrix3d> llt(b.g_up[n]);
    if (llt.info() != Eigen::Success || !b.g_up[n].allFinite()) {
      std::ostringstream msg;
      msg << "metric_and_christoffel: g^ij lost positive definiteness at node " << n;
      throw DegradedMetricError(msg.str());
    }
  }
  for (int n = 0; n < b.size(); ++n) {
    Christoffel& G = b.Gamma[n];
    if (b.identity[n]) {
      for (auto& m : G) m.setZero();
      continue;
    }
    const Christoffel& H = b.HX[n];
    const Matrix3d& JY = b.JY[n];
    for (int k = 0; k < 3; ++k) G[k] = JY(k, 0) * H[0] + JY(k, 1) * H[1] + JY(k, 2) * H[2];
  }
}

std::vector<Christoffel> christoffel_by_differences(const TransformBundle& b, const CellGeometry& geom) {
  const LogicalGrid& gr = geom.grid;
  if (gr.size() != b.size()) throw AssemblyError("christoffel_by_differences: bundle/mesh size mismatch");
  std::vector<Christoffel> out(b.size(), Christoffel{Matrix3d::Zero(), Matrix3d::Zero(), Matrix3d::Zero()});
  const double ds = geom.ds(0), dth = M_PI / gr.nt, dph = 2 * M_PI / gr.np;
  auto g = [&](int m) -> const Matrix3d& { return b.g_lo[m]; };
  for (int i = 0; i < gr.ni; ++i)
    for (int j = 0; j < gr.nt; ++j)
      for (int k = 0; k < gr.np; ++k) {
        const int n = gr.index(i, j, k);
        Christoffel& G = out[n];
        if (b.identity[n]) {
          for (auto& m : G) m.setZero();
          continue;
        }
        std::array<Matrix3d, 3> dxi;
        // s direction: centred where possible, one-sided 4th order near the ends
        if (i >= 2 && i <= gr.ni - 3) {
          const int idx[5] = {gr.index(i + 2, j, k), gr.index(i + 1, j, k), n, gr.index(i - 1, j, k),
                              gr.index(i - 2, j, k)};
          dxi[0] = d4(g, idx, ds);
        } else {
          const int sgn = i < 2 ? 1 : -1;
          const int off = i < 2 ? i : gr.ni - 1 - i;
          auto at = [&](int q) { return g(gr.index(i + sgn * (q - off), j, k)); };
          static const double c0[5] = {-25, 48, -36, 16, -3};
          static const double c1[5] = {-3, -10, 18, -6, 1};
          const double* c = off == 0 ? c0 : c1;
          Matrix3d acc = Matrix3d::Zero();
          for (int q = 0; q < 5; ++q) acc += c[q] * at(q);
          dxi[0] = sgn * acc / (12.0 * ds);
        }
        {
          const int idx[5] = {gr.theta_shift(i, j, k, 2), gr.theta_shift(i, j, k, 1), n,
                              gr.theta_shift(i, j, k, -1), gr.theta_shift(i, j, k, -2)};
          dxi[1] = d4(g, idx, dth);
        }
        {
          const int idx[5] = {gr.phi_shift(i, j, k, 2), gr.phi_shift(i, j, k, 1), n, gr.phi_shift(i, j, k, -1),
                              gr.phi_shift(i, j, k, -2)};
          dxi[2] = d4(g, idx, dph);
        }
        std::array<Matrix3d, 3> dy;
        const Matrix3d& Ji = geom.jac_inv[n];
        for (int l = 0; l < 3; ++l) dy[l] = Ji(0, l) * dxi[0] + Ji(1, l) * dxi[1] + Ji(2, l) * dxi[2];
        const Matrix3d& gu = b.g_up[n];
        for (int kk = 0; kk < 3; ++kk) {
          for (int a = 0; a < 3; ++a)
            for (int c = a; c < 3; ++c) {
              double s = 0;
              for (int l = 0; l < 3; ++l) s += gu(kk, l) * (dy[c](a, l) + dy[a](c, l) - dy[l](a, c));
              G[kk](a, c) = 0.5 * s;
              G[kk](c, a) = 0.5 * s;
            }
        }
      }
  return out;
}

void frame_time_derivs(TransformBundle& b, const RigidMotion<double>& m, const CutoffProfile<double>& profile) {
  for (int n = 0; n < b.size(); ++n) {
    // Unmoved nodes still see the frame velocity when they sit inside the support of Lambda.
    const Vector3d x = b.X.col(n);
    b.dYdt.col(n) = -b.JY[n] * eval_lambda(x, m, profile);
    b.dJXdt[n] = eval_lambda_jacobian(x, m, profile) * b.JX[n];
  }
}

double max_det_drift(const TransformBundle& b) {
  double w = 0;
  for (int n = 0; n < b.size(); ++n) {
    if (!b.identity[n]) w = std::max(w, std::abs(b.JX[n].determinant() - 1.0));
  }
  return w;
}

}  // namespace eulerbody
