#include "eulerbody/shell_mesh.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "eulerbody/errors.hpp"
#include "eulerbody/quadrature.hpp"

namespace eulerbody {

using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

constexpr double kPi = std::numbers::pi;

// sin/cos of theta evaluated so that theta = pi gives exact values.
inline void sincos_theta(double th, double& st, double& ct) {
  if (th > 0.5 * kPi) {
    st = std::sin(kPi - th);
    ct = -std::cos(kPi - th);
  } else {
    st = std::sin(th);
    ct = std::cos(th);
  }
}

}  // namespace

double Ellipsoid::volume() const {
  return 4.0 / 3.0 * kPi * semi_axes.prod();
}

Matrix3d Ellipsoid::inertia() const {
  const double m = mass();
  const double a2 = semi_axes(0) * semi_axes(0), b2 = semi_axes(1) * semi_axes(1),
               c2 = semi_axes(2) * semi_axes(2);
  return Vector3d(m / 5 * (b2 + c2), m / 5 * (a2 + c2), m / 5 * (a2 + b2)).asDiagonal();
}

double Ellipsoid::radius_along(const Vector3d& n) const {
  const Vector3d d = semi_axes.cwiseInverse().cwiseAbs2();
  return 1.0 / std::sqrt(n.cwiseAbs2().dot(d));
}

double Ellipsoid::surface_area() const {
  if (semi_axes(0) == semi_axes(1) && semi_axes(1) == semi_axes(2)) {
    return 4.0 * kPi * semi_axes(0) * semi_axes(0);
  }
  // Parametrize x = (a sin t cos p, b sin t sin p, c cos t).
  auto [tq, tw] = gauss_legendre(96, 0.0, kPi);
  const int np = 256;
  const double a = semi_axes(0), b = semi_axes(1), c = semi_axes(2);
  double area = 0;
  for (std::size_t i = 0; i < tq.size(); ++i) {
    const double st = std::sin(tq[i]), ct = std::cos(tq[i]);
    for (int k = 0; k < np; ++k) {
      const double p = 2 * kPi * k / np;
      const Vector3d xt(a * ct * std::cos(p), b * ct * std::sin(p), -c * st);
      const Vector3d xp(-a * st * std::sin(p), b * st * std::cos(p), 0.0);
      area += tw[i] * (2 * kPi / np) * xt.cross(xp).norm();
    }
  }
  return area;
}

int LogicalGrid::theta_shift(int i, int j, int k, int dj) const {
  int jj = j + dj;
  int kk = k;
  if (jj < 0) {
    jj = -jj - 1;
    kk = (k + np / 2) % np;
  } else if (jj >= nt) {
    jj = 2 * nt - jj - 1;
    kk = (k + np / 2) % np;
  }
  return index(i, jj, kk);
}

void validate_mesh_request(const Ellipsoid& body, const MeshSpec& spec) {
  std::ostringstream msg;
  if (!(body.semi_axes.minCoeff() > 0) || !body.semi_axes.allFinite()) {
    throw ValidationError("body.semi_axes: semi-axes must be positive and finite");
  }
  if (body.semi_axes.maxCoeff() / body.semi_axes.minCoeff() > 20.0) {
    throw ValidationError("body.semi_axes: axis ratio exceeds 20, refusing degenerate ellipsoid");
  }
  if (!(body.rho > 0)) throw ValidationError("body.rho_body: density must be positive");
  if (spec.n_r < 8 || spec.n_theta < 8 || spec.n_phi < 8) {
    throw ValidationError("mesh: n_r, n_theta and n_phi must each be at least 8");
  }
  if (spec.n_phi % 2 != 0) throw ValidationError("mesh.n_phi: must be even (pole reflection)");
  if (!(spec.R_out > body.max_axis())) {
    throw ValidationError("mesh.R_out: must exceed the largest semi-axis");
  }
  if (!std::isfinite(spec.stretch) || spec.stretch < 0 || spec.stretch > 10) {
    throw ValidationError("mesh.stretch: must lie in [0, 10]");
  }
}

ShellMesh::ShellMesh(const Ellipsoid& body, const MeshSpec& spec) : body_(body), spec_(spec) {
  validate_mesh_request(body, spec);
  ds_ = 1.0 / spec.n_r;
  dth_ = kPi / spec.n_theta;
  dph_ = 2 * kPi / spec.n_phi;

  std::vector<double> sf(spec.n_r + 1), sn(spec.n_r);
  for (int i = 0; i <= spec.n_r; ++i) sf[i] = i * ds_;
  for (int i = 0; i < spec.n_r; ++i) sn[i] = (i + 0.5) * ds_;
  build_block(primal, sf, sn);

  std::vector<double> df(spec.n_r + 2), dn(spec.n_r + 1);
  df[0] = 0.0;
  for (int i = 1; i <= spec.n_r; ++i) df[i] = (i - 0.5) * ds_;
  df[spec.n_r + 1] = 1.0;
  for (int i = 0; i <= spec.n_r; ++i) dn[i] = i * ds_;
  build_block(dual, df, dn);

  build_boundary();
  build_body_quadrature();
  mass = body_.mass();
  Jbar = body_.inertia();
}

Vector3d ShellMesh::map(double s, double th, double ph) const {
  double st, ct;
  sincos_theta(th, st, ct);
  const Vector3d n(st * std::cos(ph), st * std::sin(ph), ct);
  const double rb = body_.radius_along(n);
  const double beta = spec_.stretch;
  const double sig = beta > 0 ? std::expm1(beta * s) / std::expm1(beta) : s;
  return (rb + (spec_.R_out - rb) * sig) * n;
}

Matrix3d ShellMesh::map_jacobian(double s, double th, double ph) const {
  double st, ct;
  sincos_theta(th, st, ct);
  const double cp = std::cos(ph), sp = std::sin(ph);
  const Vector3d n(st * cp, st * sp, ct);
  const Vector3d nt(ct * cp, ct * sp, -st);
  const Vector3d np(-st * sp, st * cp, 0.0);
  const Vector3d d = body_.semi_axes.cwiseInverse().cwiseAbs2();
  const double rb = body_.radius_along(n);
  const double rb3 = rb * rb * rb;
  const double drb_t = -rb3 * n.cwiseProduct(d).dot(nt);
  const double drb_p = -rb3 * n.cwiseProduct(d).dot(np);
  const double beta = spec_.stretch;
  const double sig = beta > 0 ? std::expm1(beta * s) / std::expm1(beta) : s;
  const double dsig = beta > 0 ? beta * std::exp(beta * s) / std::expm1(beta) : 1.0;
  const double rho = rb + (spec_.R_out - rb) * sig;
  Matrix3d j;
  j.col(0) = (spec_.R_out - rb) * dsig * n;
  j.col(1) = drb_t * (1 - sig) * n + rho * nt;
  j.col(2) = drb_p * (1 - sig) * n + rho * np;
  return j;
}

// Each edge integral is 1/2 int y x dy, taken along the + direction.
Vector3d ShellMesh::edge_s(double s0, double s1, double th, double ph) const {
  static const auto gl = gauss_legendre(4);
  Vector3d e = Vector3d::Zero();
  for (int q = 0; q < 4; ++q) {
    const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * gl.first[q];
    e += gl.second[q] * map(s, th, ph).cross(map_jacobian(s, th, ph).col(0));
  }
  return 0.25 * (s1 - s0) * e;
}

Vector3d ShellMesh::edge_t(double s, double t0, double t1, double ph) const {
  static const auto gl = gauss_legendre(4);
  Vector3d e = Vector3d::Zero();
  for (int q = 0; q < 4; ++q) {
    const double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gl.first[q];
    e += gl.second[q] * map(s, t, ph).cross(map_jacobian(s, t, ph).col(1));
  }
  return 0.25 * (t1 - t0) * e;
}

Vector3d ShellMesh::edge_p(double s, double th, double p0, double p1) const {
  static const auto gl = gauss_legendre(4);
  Vector3d e = Vector3d::Zero();
  for (int q = 0; q < 4; ++q) {
    const double p = 0.5 * (p0 + p1) + 0.5 * (p1 - p0) * gl.first[q];
    e += gl.second[q] * map(s, th, p).cross(map_jacobian(s, th, p).col(2));
  }
  return 0.25 * (p1 - p0) * e;
}

void ShellMesh::build_block(CellGeometry& g, const std::vector<double>& sf, const std::vector<double>& sn) const {
  const int ni = static_cast<int>(sn.size()), nt = spec_.n_theta, np = spec_.n_phi;
  g.grid = LogicalGrid{ni, nt, np};
  g.s_faces = sf;
  g.s_nodes = sn;
  const int n = g.grid.size();
  g.y.resize(3, n);
  g.jac.resize(n);
  g.jac_inv.resize(n);
  g.jdet.resize(n);
  g.volume.resize(n);

  auto th_v = [&](int j) { return j * dth_; };
  // phi lattice wraps so the face at 2 pi is bitwise the face at 0
  auto ph_v = [&](int k) { return (k % np) * dph_; };

  // Canonical edges on the vertex lattice (i over sf, j over 0..nt, k over 0..np-1).
  const int nsv = ni + 1, ntv = nt + 1;
  std::vector<Vector3d> Es(ni * ntv * np), Et(nsv * nt * np), Ep(nsv * ntv * np);
  for (int i = 0; i < ni; ++i)
    for (int j = 0; j <= nt; ++j)
      for (int k = 0; k < np; ++k) Es[(i * ntv + j) * np + k] = edge_s(sf[i], sf[i + 1], th_v(j), ph_v(k));
  for (int i = 0; i <= ni; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < np; ++k) Et[(i * nt + j) * np + k] = edge_t(sf[i], th_v(j), th_v(j + 1), ph_v(k));
  for (int i = 0; i <= ni; ++i)
    for (int j = 0; j <= nt; ++j)
      for (int k = 0; k < np; ++k) Ep[(i * ntv + j) * np + k] = edge_p(sf[i], th_v(j), k * dph_, (k + 1) * dph_);
  auto es = [&](int i, int j, int k) -> const Vector3d& { return Es[(i * ntv + j) * np + (k % np)]; };
  auto et = [&](int i, int j, int k) -> const Vector3d& { return Et[(i * nt + j) * np + (k % np)]; };
  auto ep = [&](int i, int j, int k) -> const Vector3d& { return Ep[(i * ntv + j) * np + (k % np)]; };

  g.S_s.resize(3, (ni + 1) * nt * np);
  for (int i = 0; i <= ni; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < np; ++k)
        g.S_s.col(g.sface(i, j, k)) = et(i, j, k) + ep(i, j + 1, k) - et(i, j, k + 1) - ep(i, j, k);
  g.S_t.resize(3, ni * (nt + 1) * np);
  for (int i = 0; i < ni; ++i)
    for (int j = 0; j <= nt; ++j)
      for (int k = 0; k < np; ++k) {
        if (j == 0 || j == nt) {
          g.S_t.col(g.tface(i, j, k)).setZero();
        } else {
          g.S_t.col(g.tface(i, j, k)) = ep(i, j, k) + es(i, j, k + 1) - ep(i + 1, j, k) - es(i, j, k);
        }
      }
  g.S_p.resize(3, ni * nt * np);
  for (int i = 0; i < ni; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < np; ++k)
        g.S_p.col(g.pface(i, j, k)) = es(i, j, k) + et(i + 1, j, k) - es(i, j + 1, k) - et(i, j, k);

  static const auto g3 = gauss_legendre(3);
  for (int i = 0; i < ni; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < np; ++k) {
        const int c = g.grid.index(i, j, k);
        const double th = (j + 0.5) * dth_, ph = (k + 0.5) * dph_;
        g.y.col(c) = map(sn[i], th, ph);
        g.jac[c] = map_jacobian(sn[i], th, ph);
        g.jac_inv[c] = g.jac[c].inverse();
        g.jdet(c) = g.jac[c].determinant();
        double v = 0;
        const double s0 = sf[i], s1 = sf[i + 1];
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            for (int d = 0; d < 3; ++d) {
              const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * g3.first[a];
              const double t = th + 0.5 * dth_ * g3.first[b];
              const double p = ph + 0.5 * dph_ * g3.first[d];
              v += g3.second[a] * g3.second[b] * g3.second[d] * map_jacobian(s, t, p).determinant();
            }
        g.volume(c) = v * 0.125 * (s1 - s0) * dth_ * dph_;
      }
}

void ShellMesh::build_boundary() {
  const int nt = spec_.n_theta, np = spec_.n_phi;
  bnd_point.resize(3, nt * np);
  bnd_nA.resize(3, nt * np);
  bnd_T.resize(3, nt * np);
  bnd_area.resize(nt * np);
  static const auto g3 = gauss_legendre(3);
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < np; ++k) {
      const int f = j * np + k;
      const double th = (j + 0.5) * dth_, ph = (k + 0.5) * dph_;
      bnd_point.col(f) = map(0.0, th, ph);
      bnd_nA.col(f) = -primal.S_s.col(primal.sface(0, j, k));
      Vector3d t = Vector3d::Zero();
      double area = 0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double tt = th + 0.5 * dth_ * g3.first[a];
          const double pp = ph + 0.5 * dph_ * g3.first[b];
          const Matrix3d jm = map_jacobian(0.0, tt, pp);
          const Vector3d nda = -jm.col(1).cross(jm.col(2));
          const double w = g3.second[a] * g3.second[b] * 0.25 * dth_ * dph_;
          t += w * map(0.0, tt, pp).cross(nda);
          area += w * nda.norm();
        }
      bnd_T.col(f) = t;
      bnd_area(f) = area;
    }
  // The closed-surface identity sum(y x n) = 0 holds to quadrature error; make it exact.
  const Vector3d mean = bnd_T.rowwise().mean();
  bnd_T.colwise() -= mean;
}

void ShellMesh::build_body_quadrature() {
  const int nr = 8, nmu = 12, nph = 24;
  auto [rq, rw] = gauss_legendre(nr, 0.0, 1.0);
  auto [mq, mw] = gauss_legendre(nmu, -1.0, 1.0);
  body_points.resize(3, nr * nmu * nph);
  body_weights.resize(nr * nmu * nph);
  const Vector3d ax = body_.semi_axes;
  int n = 0;
  for (int a = 0; a < nr; ++a)
    for (int b = 0; b < nmu; ++b)
      for (int c = 0; c < nph; ++c) {
        const double mu = mq[b], st = std::sqrt(1 - mu * mu), p = 2 * kPi * c / nph;
        body_points.col(n) = ax.cwiseProduct(Vector3d(st * std::cos(p), st * std::sin(p), mu)) * rq[a];
        body_weights(n) = ax.prod() * rq[a] * rq[a] * rw[a] * mw[b] * (2 * kPi / nph);
        ++n;
      }
  mass_quad = body_.rho * body_weights.sum();
  Jbar_quad.setZero();
  for (int q = 0; q < n; ++q) {
    const Vector3d y = body_points.col(q);
    Jbar_quad += body_.rho * body_weights(q) * (y.squaredNorm() * Matrix3d::Identity() - y * y.transpose());
  }
}

}  // namespace eulerbody
