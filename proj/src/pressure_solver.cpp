#include "eulerbody/pressure_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eulerbody/errors.hpp"

namespace eulerbody {

using Eigen::Matrix3d;
using Eigen::Matrix3Xd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using Trip = Eigen::Triplet<double>;

// Face and node geometry of the dual block that does not depend on the metric.
struct PressureSolver::DualGeometry {
  std::vector<Matrix3d> t_jinv, p_jinv, n_jinv;
  std::vector<double> t_det, p_det, n_det;
};

namespace {

using DualGeometry = PressureSolver::DualGeometry;

DualGeometry build_dual_geometry(const ShellMesh& mesh) {
  DualGeometry cache;
  const CellGeometry& d = mesh.dual;
  const LogicalGrid& g = d.grid;
  const int n = g.size();
  cache.t_jinv.resize(n);
  cache.p_jinv.resize(n);
  cache.n_jinv.resize(n);
  cache.t_det.resize(n);
  cache.p_det.resize(n);
  cache.n_det.resize(n);
  const double dth = mesh.dtheta(), dph = mesh.dphi();
  for (int i = 0; i < g.ni; ++i) {
    const double sc = 0.5 * (d.s_faces[i] + d.s_faces[i + 1]);
    for (int j = 0; j < g.nt; ++j) {
      for (int k = 0; k < g.np; ++k) {
        const int c = g.index(i, j, k);
        auto store = [&](double th, double ph, Matrix3d& jinv, double& det) {
          const Matrix3d J = mesh.map_jacobian(sc, th, ph);
          det = J.determinant();
          jinv = J.inverse();
        };
        // theta face above node j (unused for j = nt - 1)
        store((j + 1) * dth, mesh.phi_of(k), cache.t_jinv[c], cache.t_det[c]);
        // phi face below node k, at phi = k dphi
        store(mesh.theta_of(j), k * dph, cache.p_jinv[c], cache.p_det[c]);
        store(mesh.theta_of(j), mesh.phi_of(k), cache.n_jinv[c], cache.n_det[c]);
      }
    }
  }
  return cache;
}

// Centred logical difference operators on the dual nodes.
std::array<SpMat, 3> dual_differences(const ShellMesh& mesh) {
  const CellGeometry& d = mesh.dual;
  const LogicalGrid& g = d.grid;
  const int n = g.size();
  std::array<std::vector<Trip>, 3> t;
  const double dth = mesh.dtheta(), dph = mesh.dphi();
  for (int i = 0; i < g.ni; ++i) {
    for (int j = 0; j < g.nt; ++j) {
      for (int k = 0; k < g.np; ++k) {
        const int c = g.index(i, j, k);
        const int lo = std::max(i - 1, 0), hi = std::min(i + 1, g.ni - 1);
        const double h = d.s_nodes[hi] - d.s_nodes[lo];
        t[0].emplace_back(c, g.index(hi, j, k), 1.0 / h);
        t[0].emplace_back(c, g.index(lo, j, k), -1.0 / h);
        t[1].emplace_back(c, g.theta_shift(i, j, k, 1), 0.5 / dth);
        t[1].emplace_back(c, g.theta_shift(i, j, k, -1), -0.5 / dth);
        t[2].emplace_back(c, g.phi_shift(i, j, k, 1), 0.5 / dph);
        t[2].emplace_back(c, g.phi_shift(i, j, k, -1), -0.5 / dph);
      }
    }
  }
  std::array<SpMat, 3> D;
  for (int a = 0; a < 3; ++a) {
    D[a].resize(n, n);
    D[a].setFromTriplets(t[a].begin(), t[a].end());
  }
  return D;
}

SpMat assemble_stiffness(const PressureSolver& ps, const DualGeometry& dg, const std::vector<Matrix3d>* g_up,
                         bool with_cross) {
  const ShellMesh& mesh = ps.mesh();
  const CellGeometry& pr = mesh.primal;
  const CellGeometry& d = mesh.dual;
  const LogicalGrid& g = d.grid;
  const int n = g.size();
  const double dth = mesh.dtheta(), dph = mesh.dphi(), ds = mesh.ds();

  const Matrix3d I = Matrix3d::Identity();
  auto G_primal = [&](int i, int j, int k) -> Matrix3d {
    return g_up ? (*g_up)[pr.grid.index(i, j, k)] : I;
  };
  auto G_dual = [&](int i, int j, int k) -> Matrix3d {
    if (!g_up) return I;
    return ps.to_dual<Matrix3d>(i, j, k, G_primal);
  };
  auto kmat = [](const Matrix3d& jinv, double det, const Matrix3d& G) -> Matrix3d {
    return det * jinv * G * jinv.transpose();
  };

  std::vector<Trip> trip;
  trip.reserve(static_cast<std::size_t>(n) * 13);
  auto link = [&](int a, int b, double kappa) {
    trip.emplace_back(a, a, kappa);
    trip.emplace_back(b, b, kappa);
    trip.emplace_back(a, b, -kappa);
    trip.emplace_back(b, a, -kappa);
  };
  for (int i = 0; i < g.ni; ++i) {
    const double dsi = d.ds(i);
    for (int j = 0; j < g.nt; ++j) {
      for (int k = 0; k < g.np; ++k) {
        const int c = g.index(i, j, k);
        if (i + 1 < g.ni) {
          const int p = pr.grid.index(i, j, k);
          const Matrix3d K = kmat(pr.jac_inv[p], pr.jdet(p), G_primal(i, j, k));
          link(c, g.index(i + 1, j, k), K(0, 0) * dth * dph / ds);
        }
        if (j + 1 < g.nt) {
          const Matrix3d G = g_up ? Matrix3d(0.5 * (G_dual(i, j, k) + G_dual(i, j + 1, k))) : I;
          const Matrix3d K = kmat(dg.t_jinv[c], dg.t_det[c], G);
          link(c, g.index(i, j + 1, k), K(1, 1) * dsi * dph / dth);
        }
        {
          const int km = (k - 1 + g.np) % g.np;
          const Matrix3d G = g_up ? Matrix3d(0.5 * (G_dual(i, j, k) + G_dual(i, j, km))) : I;
          const Matrix3d K = kmat(dg.p_jinv[c], dg.p_det[c], G);
          link(c, g.index(i, j, km), K(2, 2) * dsi * dth / dph);
        }
      }
    }
  }
  SpMat K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());

  if (!with_cross) return K;
  // Off-diagonal metric couplings from centred node differences.
  std::array<VectorXd, 3> w;
  for (auto& v : w) v = VectorXd::Zero(n);
  double wmax = 0;
  for (int i = 0; i < g.ni; ++i) {
    const double vol = d.ds(i) * dth * dph;
    for (int j = 0; j < g.nt; ++j) {
      for (int k = 0; k < g.np; ++k) {
        const int c = g.index(i, j, k);
        const Matrix3d Kn = kmat(dg.n_jinv[c], dg.n_det[c], G_dual(i, j, k));
        w[0](c) = vol * Kn(0, 1);
        w[1](c) = vol * Kn(0, 2);
        w[2](c) = vol * Kn(1, 2);
        wmax = std::max({wmax, std::abs(w[0](c)), std::abs(w[1](c)), std::abs(w[2](c))});
      }
    }
  }
  if (wmax <= 1e-13 * (K.diagonal().cwiseAbs().maxCoeff() * ds * ds)) return K;
  const auto D = dual_differences(mesh);
  const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  SpMat cross(n, n);
  for (int p = 0; p < 3; ++p) {
    const SpMat& Da = D[pairs[p][0]];
    const SpMat& Db = D[pairs[p][1]];
    const SpMat WDb = w[p].asDiagonal() * Db;
    const SpMat WDa = w[p].asDiagonal() * Da;
    cross += SpMat(Da.transpose() * WDb) + SpMat(Db.transpose() * WDa);
  }
  K += cross;
  return K;
}

}  // namespace

PressureSolver::PressureSolver(const ShellMesh& mesh, PressureOptions opt)
    : mesh_(mesh), opt_(opt), geom_(std::make_shared<DualGeometry>(build_dual_geometry(mesh))) {
  const CellGeometry& d = mesh_.dual;
  const LogicalGrid& g = d.grid;
  const int n = g.size();
  K0_ = assemble_stiffness(*this, *geom_, nullptr, true);

  F_ = Eigen::MatrixXd::Zero(n, 6);
  for (int j = 0; j < g.nt; ++j) {
    for (int k = 0; k < g.np; ++k) {
      const int f = j * g.np + k;
      F_.block<1, 3>(g.index(0, j, k), 0) = mesh_.bnd_nA.col(f).transpose();
      F_.block<1, 3>(g.index(0, j, k), 3) = mesh_.bnd_T.col(f).transpose();
    }
  }
  D_.setZero();
  D_.topLeftCorner<3, 3>() = Matrix3d::Identity() / mesh_.mass;
  D_.bottomRightCorner<3, 3>() = mesh_.Jbar.inverse();
  // The two-point part keeps the factor sparse on skewed meshes.
  precond_.compute(assemble_stiffness(*this, *geom_, nullptr, false), F_, D_, 0);

  gauge_w_ = VectorXd::Zero(n);
  const double radius = std::min(4.0 * mesh_.body().max_axis(), mesh_.spec().R_out);
  for (int c = 0; c < n; ++c) {
    if (d.y.col(c).norm() <= radius * (1 + 1e-12)) gauge_w_(c) = d.volume(c);
  }
  gauge_w_ /= gauge_w_.sum();
}

SpMat PressureSolver::stiffness(const std::vector<Matrix3d>& g_up) const {
  if (g_up.empty()) return K0_;
  if (static_cast<int>(g_up.size()) != mesh_.primal.grid.size()) {
    throw AssemblyError("pressure stiffness: metric has the wrong number of nodes");
  }
  return assemble_stiffness(*this, *geom_, &g_up, true);
}

double PressureSolver::bilinear(const SpMat& K, const VectorXd& q, const VectorXd& eta) const {
  const Eigen::Matrix<double, 6, 1> fq = F_.transpose() * q;
  const Eigen::Matrix<double, 6, 1> fe = F_.transpose() * eta;
  return eta.dot(K * q) + fe.dot(D_ * fq);
}

void PressureSolver::gauge(VectorXd& q) const {
  q.array() -= gauge_w_.dot(q);
}

PressureSolution PressureSolver::solve_with(const SpMat& K, const VectorXd& rhs, const VectorXd* warm_start) const {
  const int n = size();
  if (rhs.size() != n) throw AssemblyError("pressure solve: rhs has the wrong size");
  if (!rhs.allFinite()) throw NumericalError("pressure solve: non-finite right-hand side");
  VectorXd b = rhs;
  b.array() -= b.mean();
  const VectorXd x0 = (warm_start && warm_start->size() == n) ? *warm_start : VectorXd::Zero(n);
  auto A = [&](const VectorXd& x) -> VectorXd { return K * x + F_ * (D_ * (F_.transpose() * x)); };
  auto M = [&](const VectorXd& r) -> VectorXd { return precond_.solve(r); };
  CgResult cg = pcg(A, M, b, x0, opt_.rel_tol, opt_.max_iter);
  if (!cg.converged) {
    std::ostringstream os;
    os << "pressure solve did not converge in " << cg.iterations << " iterations (residual "
       << (cg.history.empty() ? 0.0 : cg.history.back()) << ")";
    throw SolverError(os.str(), cg.history);
  }
  PressureSolution sol;
  sol.q = std::move(cg.x);
  gauge(sol.q);
  sol.history = std::move(cg.history);
  sol.residual = sol.history.back();
  sol.iterations = cg.iterations;
  sol.grad_q = gradient(sol.q);
  std::tie(sol.force, sol.torque) = surface_force_torque(mesh_, sol.q);
  return sol;
}

PressureSolution PressureSolver::solve(const PressureProblem& p, const VectorXd* warm_start) const {
  return solve_with(stiffness(p.g_up), p.rhs, warm_start);
}

Matrix3Xd PressureSolver::gradient(const VectorXd& q) const {
  const CellGeometry& pr = mesh_.primal;
  const LogicalGrid& pg = pr.grid;
  const LogicalGrid& dg = mesh_.dual.grid;
  const double ds = mesh_.ds(), dth = mesh_.dtheta(), dph = mesh_.dphi();
  Matrix3Xd grad(3, pg.size());
  for (int i = 0; i < pg.ni; ++i) {
    for (int j = 0; j < pg.nt; ++j) {
      for (int k = 0; k < pg.np; ++k) {
        Vector3d dxi;
        dxi(0) = (q(dg.index(i + 1, j, k)) - q(dg.index(i, j, k))) / ds;
        double t = 0, p = 0;
        for (int ii : {i, i + 1}) {
          t += q(dg.theta_shift(ii, j, k, 1)) - q(dg.theta_shift(ii, j, k, -1));
          p += q(dg.phi_shift(ii, j, k, 1)) - q(dg.phi_shift(ii, j, k, -1));
        }
        dxi(1) = t / (4 * dth);
        dxi(2) = p / (4 * dph);
        const int c = pg.index(i, j, k);
        grad.col(c) = pr.jac_inv[c].transpose() * dxi;
      }
    }
  }
  return grad;
}

PressureProblem assemble_pressure_problem(const PressureSolver& solver, const Matrix3Xd& w,
                                          const TransformBundle& bundle, const RigidBodyState<double>& state) {
  const ShellMesh& mesh = solver.mesh();
  const CellGeometry& pr = mesh.primal;
  const CellGeometry& d = mesh.dual;
  const LogicalGrid& g = d.grid;
  const int n = g.size();
  if (w.cols() != pr.grid.size()) throw AssemblyError("pressure rhs: convective field has the wrong size");
  if (!w.allFinite()) throw NumericalError("pressure rhs: non-finite convective field");

  PressureProblem prob;
  if (!bundle.g_up.empty()) {
    if (static_cast<int>(bundle.g_up.size()) != pr.grid.size()) {
      throw AssemblyError("pressure rhs: bundle does not match the mesh");
    }
    prob.g_up = bundle.g_up;
    double floor = INFINITY;
    for (const auto& G : prob.g_up) {
      Eigen::SelfAdjointEigenSolver<Matrix3d> es(G, Eigen::EigenvaluesOnly);
      floor = std::min(floor, es.eigenvalues()(0));
    }
    prob.metric_floor = floor;
    if (!(floor > 0)) throw DegradedMetricError("pressure rhs: metric is not positive definite");
  }

  auto w_primal = [&](int i, int j, int k) -> Vector3d { return w.col(pr.grid.index(i, j, k)); };
  auto w_dual = [&](int i, int j, int k) -> Vector3d { return solver.to_dual<Vector3d>(i, j, k, w_primal); };

  VectorXd b = VectorXd::Zero(n);
  for (int i = 0; i < g.ni; ++i) {
    for (int j = 0; j < g.nt; ++j) {
      for (int k = 0; k < g.np; ++k) {
        const int c = g.index(i, j, k);
        if (i + 1 < g.ni) {
          const double flux = w_primal(i, j, k).dot(d.S_s.col(d.sface(i + 1, j, k)));
          b(c) += flux;
          b(g.index(i + 1, j, k)) -= flux;
        }
        if (j + 1 < g.nt) {
          const double flux = (0.5 * (w_dual(i, j, k) + w_dual(i, j + 1, k))).dot(d.S_t.col(d.tface(i, j + 1, k)));
          b(c) += flux;
          b(g.index(i, j + 1, k)) -= flux;
        }
        {
          const int km = (k - 1 + g.np) % g.np;
          const double flux = (0.5 * (w_dual(i, j, km) + w_dual(i, j, k))).dot(d.S_p.col(d.pface(i, j, k)));
          b(g.index(i, j, km)) += flux;
          b(c) -= flux;
        }
      }
    }
  }
  const Vector3d lin = state.R.cross(state.L);
  const Vector3d ang = state.Jbar.ldlt().solve((state.Jbar * state.R).cross(state.R));
  const Eigen::MatrixXd& F = solver.boundary_functionals();
  b += F.leftCols<3>() * lin - F.rightCols<3>() * ang;

  const double total = b.cwiseAbs().sum();
  prob.compat_residual = total > 0 ? std::abs(b.sum()) / total : 0.0;
  b.array() -= b.mean();
  prob.rhs = std::move(b);
  return prob;
}

std::pair<Vector3d, Vector3d> surface_force_torque(const ShellMesh& mesh, const VectorXd& q) {
  const LogicalGrid& g = mesh.dual.grid;
  if (q.size() != g.size()) throw AssemblyError("surface force: field has the wrong size");
  Vector3d F = Vector3d::Zero(), T = Vector3d::Zero();
  for (int j = 0; j < g.nt; ++j) {
    for (int k = 0; k < g.np; ++k) {
      const int f = j * g.np + k;
      const double qv = q(g.index(0, j, k));
      F += qv * mesh.bnd_nA.col(f);
      T += qv * mesh.bnd_T.col(f);
    }
  }
  return {F, T};
}

double gradient_l2(const ShellMesh& mesh, const Matrix3Xd& grad_q) {
  return std::sqrt((grad_q.colwise().squaredNorm().transpose().array() * mesh.primal.volume.array()).sum());
}

}  // namespace eulerbody
