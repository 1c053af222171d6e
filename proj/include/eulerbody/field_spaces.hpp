#pragma once

#include <Eigen/Dense>
#include <utility>

#include "eulerbody/linear_solvers.hpp"
#include "eulerbody/shell_mesh.hpp"

namespace eulerbody {

/// Velocity field on the primal nodes plus an optional rigid trace l + omega x y on the body.
struct GridField {
  Eigen::Matrix3Xd fluid;
  Eigen::Vector3d rigid_l = Eigen::Vector3d::Zero();
  Eigen::Vector3d rigid_omega = Eigen::Vector3d::Zero();
  bool has_rigid_part{false};

  static GridField zero(int n) {
    GridField f;
    f.fluid = Eigen::Matrix3Xd::Zero(3, n);
    f.has_rigid_part = true;
    return f;
  }
};

GridField operator+(const GridField& a, const GridField& b);
GridField operator-(const GridField& a, const GridField& b);
GridField operator*(double s, const GridField& a);

/// sum_c V_c u_c . v_c + m l_u . l_v + (Jbar omega_u) . omega_v
double inner_product_xtilde(const ShellMesh& mesh, const GridField& u, const GridField& v);
double norm_xtilde(const ShellMesh& mesh, const GridField& u);

/// (l, omega) from velocity samples at mesh.body_points, weighted by the body density.
std::pair<Eigen::Vector3d, Eigen::Vector3d> extract_rigid_components(const ShellMesh& mesh,
                                                                     const Eigen::Matrix3Xd& body_values);
std::pair<Eigen::Vector3d, Eigen::Vector3d> extract_rigid_components(const ShellMesh& mesh, const GridField& u);

/// Orthogonal projector onto discretely divergence-free fields that are rigid on the body.
///
/// The constraint is one net-flux balance per primal cell: face fluxes use the mean of
/// the two adjacent nodal values, the body face carries l.nA + omega.(y x n dsigma), and
/// the outer sphere is impermeable.
class Projector {
 public:
  explicit Projector(const ShellMesh& mesh);

  /// `rel_tol` bounds the constraint residual relative to that of the input.
  GridField project(const GridField& u, double rel_tol = 1e-12) const;
  GridField complement(const GridField& u, double rel_tol = 1e-12) const { return u - project(u, rel_tol); }
  /// Net outflow per primal cell.
  Eigen::VectorXd net_flux(const GridField& u) const;
  /// max_c |net flux| / V_c.
  double divergence_residual(const GridField& u) const;
  const ShellMesh& mesh() const { return mesh_; }
  int last_iterations() const { return last_iterations_; }

 private:
  const ShellMesh& mesh_;
  SpMat C_;
  SpMat A_;
  Eigen::MatrixXd F_;
  Matrix6d D_;
  LowRankUpdatedSolver precond_;
  mutable int last_iterations_{0};
};

inline GridField project_onto_xstar(const Projector& p, const GridField& u) { return p.project(u); }

}  // namespace eulerbody
