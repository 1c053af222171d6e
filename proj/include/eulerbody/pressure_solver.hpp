#pragma once

#include <Eigen/Dense>
#include <memory>
#include <utility>
#include <vector>

#include "eulerbody/flow_map.hpp"
#include "eulerbody/linear_solvers.hpp"
#include "eulerbody/rigid_motion.hpp"
#include "eulerbody/shell_mesh.hpp"

namespace eulerbody {

/// Pressure problem on the dual (pressure) nodes.
struct PressureProblem {
  /// Contravariant metric G at the primal nodes; empty means G = I.
  std::vector<Eigen::Matrix3d> g_up;
  /// Right-hand side per dual node, already made compatible (zero sum).
  Eigen::VectorXd rhs;
  /// |sum rhs| / sum |rhs| before the compatibility correction.
  double compat_residual{0};
  /// Smallest eigenvalue of G over the nodes.
  double metric_floor{1};
};

struct PressureSolution {
  Eigen::VectorXd q;
  /// grad q at the primal nodes.
  Eigen::Matrix3Xd grad_q;
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();
  double residual{0};
  std::vector<double> history;
  int iterations{0};
};

struct PressureOptions {
  double rel_tol{1e-10};
  int max_iter{500};
};

/// Vertex-centred finite-volume discretization of div(G grad q) on the dual block,
/// with the force/torque coupling added as a rank-6 symmetric term.
class PressureSolver {
 public:
  explicit PressureSolver(const ShellMesh& mesh, PressureOptions opt = {});

  const ShellMesh& mesh() const { return mesh_; }
  int size() const { return mesh_.dual.grid.size(); }

  /// Stiffness of int (G grad q).(grad eta) on the dual block.
  SpMat stiffness(const std::vector<Eigen::Matrix3d>& g_up) const;
  const SpMat& flat_stiffness() const { return K0_; }
  /// Columns: n dsigma (3) and y x n dsigma (3) on the body nodes.
  const Eigen::MatrixXd& boundary_functionals() const { return F_; }
  const Matrix6d& coupling() const { return D_; }

  /// B(q, eta) for a given stiffness.
  double bilinear(const SpMat& K, const Eigen::VectorXd& q, const Eigen::VectorXd& eta) const;

  PressureSolution solve(const PressureProblem& p, const Eigen::VectorXd* warm_start = nullptr) const;
  /// Solve with an explicitly given stiffness (used by the manufactured tests).
  PressureSolution solve_with(const SpMat& K, const Eigen::VectorXd& rhs, const Eigen::VectorXd* warm_start) const;

  Eigen::Matrix3Xd gradient(const Eigen::VectorXd& q) const;
  void gauge(Eigen::VectorXd& q) const;
  const Eigen::VectorXd& gauge_weights() const { return gauge_w_; }

  /// Interpolates a primal-node quantity to the centre of each dual cell's s-range.
  template <typename T, typename Get>
  T to_dual(int i, int j, int k, Get&& get) const {
    const int nr = mesh_.spec().n_r;
    if (i == 0) return 1.25 * get(0, j, k) - 0.25 * get(1, j, k);
    if (i == nr) return 1.25 * get(nr - 1, j, k) - 0.25 * get(nr - 2, j, k);
    return 0.5 * (get(i - 1, j, k) + get(i, j, k));
  }

 struct DualGeometry;

 private:
  const ShellMesh& mesh_;
  PressureOptions opt_;
  std::shared_ptr<const DualGeometry> geom_;
  SpMat K0_;
  Eigen::MatrixXd F_;
  Matrix6d D_;
  LowRankUpdatedSolver precond_;
  Eigen::VectorXd gauge_w_;
};

/// RHS for the convective term w = Mv + Nv at the primal nodes and the rigid state.
PressureProblem assemble_pressure_problem(const PressureSolver& solver, const Eigen::Matrix3Xd& w,
                                          const TransformBundle& bundle, const RigidBodyState<double>& state);

/// (int q n dsigma, int y x q n dsigma) from the body-node values of a dual field.
std::pair<Eigen::Vector3d, Eigen::Vector3d> surface_force_torque(const ShellMesh& mesh, const Eigen::VectorXd& q);

/// ||grad q||_{L2} over the primal cells.
double gradient_l2(const ShellMesh& mesh, const Eigen::Matrix3Xd& grad_q);

}  // namespace eulerbody
