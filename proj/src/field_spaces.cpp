#include "eulerbody/field_spaces.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "eulerbody/errors.hpp"

namespace eulerbody {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using Eigen::VectorXd;

GridField operator+(const GridField& a, const GridField& b) {
  GridField r;
  r.fluid = a.fluid + b.fluid;
  r.rigid_l = a.rigid_l + b.rigid_l;
  r.rigid_omega = a.rigid_omega + b.rigid_omega;
  r.has_rigid_part = a.has_rigid_part || b.has_rigid_part;
  return r;
}

GridField operator-(const GridField& a, const GridField& b) { return a + (-1.0) * b; }

GridField operator*(double s, const GridField& a) {
  GridField r;
  r.fluid = s * a.fluid;
  r.rigid_l = s * a.rigid_l;
  r.rigid_omega = s * a.rigid_omega;
  r.has_rigid_part = a.has_rigid_part;
  return r;
}

double inner_product_xtilde(const ShellMesh& mesh, const GridField& u, const GridField& v) {
  if (u.fluid.cols() != mesh.primal.grid.size() || v.fluid.cols() != mesh.primal.grid.size()) {
    throw ValidationError("inner_product_xtilde: field does not match the mesh");
  }
  double s = (u.fluid.cwiseProduct(v.fluid).colwise().sum().transpose().cwiseProduct(mesh.primal.volume)).sum();
  s += mesh.mass * u.rigid_l.dot(v.rigid_l);
  s += (mesh.Jbar * u.rigid_omega).dot(v.rigid_omega);
  return s;
}

double norm_xtilde(const ShellMesh& mesh, const GridField& u) {
  return std::sqrt(std::max(0.0, inner_product_xtilde(mesh, u, u)));
}

std::pair<Vector3d, Vector3d> extract_rigid_components(const ShellMesh& mesh, const Eigen::Matrix3Xd& body_values) {
  if (body_values.cols() != mesh.body_points.cols()) {
    throw ValidationError("extract_rigid_components: samples must be given at the body quadrature points");
  }
  const double rho = mesh.body().rho;
  Vector3d mom = Vector3d::Zero(), ang = Vector3d::Zero();
  for (int q = 0; q < body_values.cols(); ++q) {
    const double w = rho * mesh.body_weights(q);
    mom += w * body_values.col(q);
    ang += w * body_values.col(q).cross(mesh.body_points.col(q));
  }
  return {mom / mesh.mass_quad, -mesh.Jbar_quad.ldlt().solve(ang)};
}

std::pair<Vector3d, Vector3d> extract_rigid_components(const ShellMesh& mesh, const GridField& u) {
  if (u.has_rigid_part) return {u.rigid_l, u.rigid_omega};
  (void)mesh;
  return {Vector3d::Zero(), Vector3d::Zero()};
}

Projector::Projector(const ShellMesh& mesh) : mesh_(mesh) {
  const CellGeometry& g = mesh.primal;
  const LogicalGrid& gr = g.grid;
  const int n = gr.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 36);
  auto add_face = [&](int a, int b, const Vector3d& S) {
    for (int d = 0; d < 3; ++d) {
      trip.emplace_back(a, 3 * a + d, 0.5 * S(d));
      trip.emplace_back(a, 3 * b + d, 0.5 * S(d));
      trip.emplace_back(b, 3 * a + d, -0.5 * S(d));
      trip.emplace_back(b, 3 * b + d, -0.5 * S(d));
    }
  };
  for (int i = 0; i < gr.ni; ++i)
    for (int j = 0; j < gr.nt; ++j)
      for (int k = 0; k < gr.np; ++k) {
        const int c = gr.index(i, j, k);
        if (i + 1 < gr.ni) add_face(c, gr.index(i + 1, j, k), g.S_s.col(g.sface(i + 1, j, k)));
        if (j + 1 < gr.nt) add_face(c, gr.index(i, j + 1, k), g.S_t.col(g.tface(i, j + 1, k)));
        const int kn = (k + 1) % gr.np;
        add_face(c, gr.index(i, j, kn), g.S_p.col(g.pface(i, j, kn)));
      }
  C_.resize(n, 3 * n);
  C_.setFromTriplets(trip.begin(), trip.end());

  F_ = Eigen::MatrixXd::Zero(n, 6);
  for (int j = 0; j < gr.nt; ++j)
    for (int k = 0; k < gr.np; ++k) {
      const int c = gr.index(0, j, k), f = j * gr.np + k;
      F_.block<1, 3>(c, 0) = mesh.bnd_nA.col(f).transpose();
      F_.block<1, 3>(c, 3) = mesh.bnd_T.col(f).transpose();
    }
  VectorXd minv(3 * n);
  for (int c = 0; c < n; ++c) minv.segment<3>(3 * c).setConstant(1.0 / g.volume(c));
  A_ = C_ * minv.asDiagonal() * C_.transpose();
  D_.setZero();
  D_.topLeftCorner<3, 3>() = Matrix3d::Identity() / mesh.mass;
  D_.bottomRightCorner<3, 3>() = mesh.Jbar.inverse();

  // Preconditioner: drop the couplings between the eight index-parity classes. On a
  // smooth shell mesh those couplings are small, and what is left factors cheaply.
  auto parity = [&gr](Eigen::Index c) {
    const int k = static_cast<int>(c % gr.np), j = static_cast<int>((c / gr.np) % gr.nt),
              i = static_cast<int>(c / (gr.np * gr.nt));
    return (i & 1) * 4 + (j & 1) * 2 + (k & 1);
  };
  SpMat Ap = A_;
  Ap.prune([&](const Eigen::Index& r, const Eigen::Index& c, const double&) { return parity(r) == parity(c); });
  precond_.compute(Ap, F_, D_, -1);
}

VectorXd Projector::net_flux(const GridField& u) const {
  const Eigen::Map<const VectorXd> v(u.fluid.data(), u.fluid.size());
  VectorXd r = C_ * v;
  if (u.has_rigid_part) {
    Eigen::Matrix<double, 6, 1> lr;
    lr << u.rigid_l, u.rigid_omega;
    r += F_ * lr;
  }
  return r;
}

double Projector::divergence_residual(const GridField& u) const {
  return net_flux(u).cwiseQuotient(mesh_.primal.volume).cwiseAbs().maxCoeff();
}

GridField Projector::project(const GridField& u, double rel_tol) const {
  if (u.fluid.cols() != mesh_.primal.grid.size()) throw ValidationError("Projector: field does not match the mesh");
  if (!u.fluid.allFinite() || !u.rigid_l.allFinite() || !u.rigid_omega.allFinite()) {
    throw InvalidStateError("Projector: non-finite field");
  }
  const VectorXd r = net_flux(u);
  const auto op = [this](const VectorXd& x) -> VectorXd { return A_ * x + F_ * (D_ * (F_.transpose() * x)); };
  const auto pre = [this](const VectorXd& x) -> VectorXd { return precond_.solve(x); };
  const CgResult cg = pcg(op, pre, r, VectorXd::Zero(r.size()), rel_tol, 4000);
  last_iterations_ = cg.iterations;
  if (!cg.converged) {
    std::ostringstream msg;
    msg << "Projector: CG stalled at relative residual " << cg.history.back();
    throw ProjectionError(msg.str(), cg.history.back());
  }
  const VectorXd& lam = cg.x;
  GridField p = u;
  p.has_rigid_part = true;
  if (!u.has_rigid_part) {
    p.rigid_l.setZero();
    p.rigid_omega.setZero();
  }
  const VectorXd ct = C_.transpose() * lam;
  const VectorXd& vol = mesh_.primal.volume;
  for (int c = 0; c < p.fluid.cols(); ++c) p.fluid.col(c) -= ct.segment<3>(3 * c) / vol(c);
  const Eigen::Matrix<double, 6, 1> ft = F_.transpose() * lam;
  p.rigid_l -= ft.head<3>() / mesh_.mass;
  p.rigid_omega -= mesh_.Jbar.ldlt().solve(ft.tail<3>());

  const double before = r.norm();
  const double after = net_flux(p).norm();
  if (before > 0 && after > std::max(1e-6, 100 * rel_tol) * before && after > 1e-13) {
    std::ostringstream msg;
    msg << "Projector: constraint residual " << after << " after projection (input " << before << ")";
    throw ProjectionError(msg.str(), after);
  }
  return p;
}

}  // namespace eulerbody
