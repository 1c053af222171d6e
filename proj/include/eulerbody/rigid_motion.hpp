#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <utility>

#include "eulerbody/errors.hpp"

namespace eulerbody {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Skew map A(w) with A(w) x = w x x.
template <typename Scalar>
Mat3<Scalar> skew(const Vec3<Scalar>& w) {
  Mat3<Scalar> a;
  a << Scalar(0), -w(2), w(1),
       w(2), Scalar(0), -w(0),
       -w(1), w(0), Scalar(0);
  return a;
}

/// Inverse of skew() on the antisymmetric part of `a`.
template <typename Scalar>
Vec3<Scalar> axial(const Mat3<Scalar>& a) {
  return Vec3<Scalar>(a(2, 1) - a(1, 2), a(0, 2) - a(2, 0), a(1, 0) - a(0, 1)) / Scalar(2);
}

/// Rotation about a unit axis by `angle`, closed form (Rodrigues).
template <typename Scalar>
Mat3<Scalar> rotation_about(const Vec3<Scalar>& axis, Scalar angle) {
  const Mat3<Scalar> k = skew<Scalar>(axis.normalized());
  return Mat3<Scalar>::Identity() + std::sin(angle) * k + (Scalar(1) - std::cos(angle)) * k * k;
}

/// Kinematic state of the body.
///
/// Body-frame velocities (L, R) are the primary unknowns of the fixed-domain
/// system; the world-frame pair (l, omega) is derived from them through Q and
/// must be refreshed with sync_world() whenever Q, L or R change.
template <typename Scalar = double>
struct RigidBodyState {
  Scalar t{0};
  Vec3<Scalar> h = Vec3<Scalar>::Zero();
  Mat3<Scalar> Q = Mat3<Scalar>::Identity();
  Vec3<Scalar> L = Vec3<Scalar>::Zero();
  Vec3<Scalar> R = Vec3<Scalar>::Zero();
  Vec3<Scalar> l = Vec3<Scalar>::Zero();
  Vec3<Scalar> omega = Vec3<Scalar>::Zero();
  Scalar mass{1};
  Mat3<Scalar> Jbar = Mat3<Scalar>::Identity();
  Scalar rho_body{1};
};

/// The three quantities the rigid extension needs at one instant.
template <typename Scalar = double>
struct RigidMotion {
  Vec3<Scalar> h = Vec3<Scalar>::Zero();
  Vec3<Scalar> l = Vec3<Scalar>::Zero();
  Vec3<Scalar> omega = Vec3<Scalar>::Zero();
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// l = Q L and omega = axial(Q A(R) Q^T).
template <typename Scalar>
std::pair<Vec3<Scalar>, Vec3<Scalar>> body_to_world(const RigidBodyState<Scalar>& s) {
  if (!all_finite(s.Q) || !all_finite(s.L) || !all_finite(s.R)) {
    throw InvalidStateError("body_to_world: non-finite rigid state");
  }
  // For det Q = 1 the conjugated skew matrix is the skew matrix of Q R.
  return {s.Q * s.L, s.Q * s.R};
}

template <typename Scalar>
void sync_world(RigidBodyState<Scalar>& s) {
  auto [l, w] = body_to_world(s);
  s.l = l;
  s.omega = w;
}

template <typename Scalar>
RigidMotion<Scalar> motion_of(const RigidBodyState<Scalar>& s) {
  return {s.h, s.l, s.omega};
}

/// Nearest rotation (polar factor) via SVD, with det forced to +1.
template <typename Scalar>
Mat3<Scalar> polar_orthonormalize(const Mat3<Scalar>& m) {
  Eigen::JacobiSVD<Mat3<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3<Scalar> u = svd.matrixU();
  const Mat3<Scalar> v = svd.matrixV();
  if ((u * v.transpose()).determinant() < Scalar(0)) u.col(2) = -u.col(2);
  return u * v.transpose();
}

/// One RK4 step of dQ/dt = Q A(R(t)) where R varies linearly from r0 to r1
/// over the step, followed by polar re-orthonormalization.
template <typename Scalar>
Mat3<Scalar> advance_rotation(const Mat3<Scalar>& Q, const Vec3<Scalar>& r0, const Vec3<Scalar>& r1,
                              Scalar dt) {
  if (!all_finite(Q) || !all_finite(r0) || !all_finite(r1) || !std::isfinite(dt)) {
    throw InvalidStateError("advance_rotation: non-finite input");
  }
  const Vec3<Scalar> rm = (r0 + r1) / Scalar(2);
  const Mat3<Scalar> a0 = skew<Scalar>(r0), am = skew<Scalar>(rm), a1 = skew<Scalar>(r1);
  const Mat3<Scalar> k1 = Q * a0;
  const Mat3<Scalar> k2 = (Q + dt / 2 * k1) * am;
  const Mat3<Scalar> k3 = (Q + dt / 2 * k2) * am;
  const Mat3<Scalar> k4 = (Q + dt * k3) * a1;
  return polar_orthonormalize<Scalar>(Q + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4));
}

/// Constant body angular velocity over `dt`, split into `substeps` RK4 steps.
template <typename Scalar>
Mat3<Scalar> advance_rotation(const Mat3<Scalar>& Q, const Vec3<Scalar>& R, Scalar dt, int substeps = 1) {
  if (!(dt > Scalar(0))) throw InvalidStateError("advance_rotation: dt must be positive");
  Mat3<Scalar> q = Q;
  const Scalar h = dt / Scalar(substeps);
  for (int i = 0; i < substeps; ++i) q = advance_rotation<Scalar>(q, R, R, h);
  return q;
}

/// Radial cut-off: 1 inside r1, 0 outside r2, and between them 1 - S(t) with
/// S(t) = t^5 (c0 + c1 t + ... + c4 t^4), the C^4 smoothstep. Christoffel symbols
/// need third derivatives of zeta to be continuous.
template <typename Scalar = double>
struct CutoffProfile {
  Scalar r1{1.5};
  Scalar r2{3.0};
  std::array<Scalar, 5> blend{Scalar(126), Scalar(-420), Scalar(540), Scalar(-315), Scalar(70)};

  bool valid() const { return r1 > Scalar(0) && r2 > r1; }

  /// d^k/dt^k of S at t.
  Scalar smoothstep(Scalar t, int k) const {
    Scalar acc(0);
    for (int n = 4; n >= 0; --n) {
      const int p = n + 5;
      if (p < k) continue;
      Scalar c = blend[n];
      for (int q = 0; q < k; ++q) c *= Scalar(p - q);
      acc = acc * t + c;
    }
    Scalar tk(1);
    for (int q = 0; q < 5 - k; ++q) tk *= t;
    return acc * tk;
  }
  Scalar value(Scalar r) const {
    if (r <= r1) return Scalar(1);
    if (r >= r2) return Scalar(0);
    return Scalar(1) - smoothstep((r - r1) / (r2 - r1), 0);
  }
  Scalar d1(Scalar r) const {
    if (r <= r1 || r >= r2) return Scalar(0);
    const Scalar w = r2 - r1;
    return -smoothstep((r - r1) / w, 1) / w;
  }
  Scalar d2(Scalar r) const {
    if (r <= r1 || r >= r2) return Scalar(0);
    const Scalar w = r2 - r1;
    return -smoothstep((r - r1) / w, 2) / (w * w);
  }
  Scalar d3(Scalar r) const {
    if (r <= r1 || r >= r2) return Scalar(0);
    const Scalar w = r2 - r1;
    return -smoothstep((r - r1) / w, 3) / (w * w * w);
  }
};

template <typename Scalar>
Vec3<Scalar> eval_rigid_velocity(const Vec3<Scalar>& x, const RigidMotion<Scalar>& m) {
  return m.l + m.omega.cross(x - m.h);
}

/// Vector potential W = 1/2 l x (x-h) + |x-h|^2/2 omega.
template <typename Scalar>
Vec3<Scalar> eval_stream_moment(const Vec3<Scalar>& x, const RigidMotion<Scalar>& m) {
  const Vec3<Scalar> r = x - m.h;
  return m.l.cross(r) / Scalar(2) + r.squaredNorm() / Scalar(2) * m.omega;
}

/// psi(x) = zeta(|x - h|). The cut-off is radial, so the body rotation does not enter.
template <typename Scalar>
Scalar eval_cutoff(const Vec3<Scalar>& x, const RigidMotion<Scalar>& m, const CutoffProfile<Scalar>& p) {
  return p.value((x - m.h).norm());
}

/// Second derivatives of Lambda: H[m](p, q) = d^2 Lambda_m / dx_p dx_q.
template <typename Scalar>
std::array<Mat3<Scalar>, 3> eval_lambda_hessian(const Vec3<Scalar>& x, const RigidMotion<Scalar>& m,
                                                const CutoffProfile<Scalar>& p) {
  std::array<Mat3<Scalar>, 3> H{Mat3<Scalar>::Zero(), Mat3<Scalar>::Zero(), Mat3<Scalar>::Zero()};
  const Vec3<Scalar> r = x - m.h;
  const Scalar rho = r.norm();
  if (rho <= p.r1 || rho >= p.r2) return H;
  const Scalar z1 = p.d1(rho), z2 = p.d2(rho), z3 = p.d3(rho);
  const Scalar da = Scalar(1.5) * z1 + rho * z2 / 2;
  const Scalar dda = 2 * z2 + rho * z3 / 2;
  const Scalar beta = -z1 / (2 * rho);
  const Scalar db = -z2 / (2 * rho) + z1 / (2 * rho * rho);
  const Scalar ddb = -z3 / (2 * rho) + z2 / (rho * rho) - z1 / (rho * rho * rho);
  const Scalar dg = z1 / 2 - rho * z2 / 2;
  const Scalar ddg = -rho * z3 / 2;
  const Vec3<Scalar> u = r / rho;
  const Mat3<Scalar> P = (Mat3<Scalar>::Identity() - u * u.transpose()) / rho;  // d u / dx
  const Mat3<Scalar> uu = u * u.transpose();
  const Scalar rl = r.dot(m.l);
  const Vec3<Scalar> wr = m.omega.cross(r);
  const Mat3<Scalar> A = skew<Scalar>(m.omega);
  for (int c = 0; c < 3; ++c) {
    Mat3<Scalar>& h = H[c];
    h = (dda * m.l(c) + ddb * rl * r(c) + ddg * wr(c)) * uu;
    h += (da * m.l(c) + db * rl * r(c) + dg * wr(c)) * P;
    const Vec3<Scalar> e = Vec3<Scalar>::Unit(c);
    // first-order factors that pair with one radial derivative
    const Vec3<Scalar> a = db * (rl * e + r(c) * m.l) + dg * A.row(c).transpose();
    h += u * a.transpose() + a * u.transpose();
    h += beta * (m.l * e.transpose() + e * m.l.transpose());
  }
  return H;
}

/// Lambda = psi V + grad(psi) x W.
///
/// With r = x - h, rho = |r| this expands to
///   (zeta + rho zeta'/2) l - zeta'/(2 rho) r (r.l) + (zeta - rho zeta'/2) omega x r,
/// which is what is evaluated. Inside r1 the rigid velocity is returned directly.
template <typename Scalar>
Vec3<Scalar> eval_lambda(const Vec3<Scalar>& x, const RigidMotion<Scalar>& m, const CutoffProfile<Scalar>& p) {
  const Vec3<Scalar> r = x - m.h;
  const Scalar rho = r.norm();
  if (rho <= p.r1) return m.l + m.omega.cross(r);
  if (rho >= p.r2) return Vec3<Scalar>::Zero();
  const Scalar z = p.value(rho), z1 = p.d1(rho);
  const Scalar alpha = z + rho * z1 / 2;
  const Scalar beta = -z1 / (2 * rho);
  const Scalar gamma = z - rho * z1 / 2;
  return alpha * m.l + beta * r.dot(m.l) * r + gamma * m.omega.cross(r);
}

/// Analytic spatial Jacobian d(Lambda)/dx.
template <typename Scalar>
Mat3<Scalar> eval_lambda_jacobian(const Vec3<Scalar>& x, const RigidMotion<Scalar>& m,
                                  const CutoffProfile<Scalar>& p) {
  const Vec3<Scalar> r = x - m.h;
  const Scalar rho = r.norm();
  if (rho <= p.r1) return skew<Scalar>(m.omega);
  if (rho >= p.r2) return Mat3<Scalar>::Zero();
  const Scalar z = p.value(rho), z1 = p.d1(rho), z2 = p.d2(rho);
  const Scalar da = Scalar(1.5) * z1 + rho * z2 / 2;
  const Scalar beta = -z1 / (2 * rho);
  const Scalar db = -z2 / (2 * rho) + z1 / (2 * rho * rho);
  const Scalar gamma = z - rho * z1 / 2;
  const Scalar dg = z1 / 2 - rho * z2 / 2;
  const Vec3<Scalar> rhat = r / rho;
  const Scalar rl = r.dot(m.l);
  const Vec3<Scalar> wr = m.omega.cross(r);
  Mat3<Scalar> j = da * m.l * rhat.transpose();
  j += db * rl * r * rhat.transpose() + beta * rl * Mat3<Scalar>::Identity() + beta * r * m.l.transpose();
  j += dg * wr * rhat.transpose() + gamma * skew<Scalar>(m.omega);
  return j;
}

}  // namespace eulerbody
