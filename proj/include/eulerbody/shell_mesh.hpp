#pragma once

#include <Eigen/Dense>
#include <vector>

namespace eulerbody {

/// Solid ellipsoid x^2/a^2 + y^2/b^2 + z^2/c^2 <= 1 centred at the origin.
struct Ellipsoid {
  Eigen::Vector3d semi_axes{1.0, 1.0, 1.0};
  double rho{1.0};

  double max_axis() const { return semi_axes.maxCoeff(); }
  double volume() const;
  double mass() const { return rho * volume(); }
  /// Closed-form inertia about the centre.
  Eigen::Matrix3d inertia() const;
  /// Distance from the centre to the surface along the unit direction `n`.
  double radius_along(const Eigen::Vector3d& n) const;
  /// Surface area by high-order quadrature (closed form for the sphere).
  double surface_area() const;
};

struct MeshSpec {
  int n_r{16};
  int n_theta{8};
  int n_phi{16};
  double R_out{6.0};
  /// Exponential clustering toward the body; 0 gives uniform radial spacing.
  double stretch{0.0};
};

/// Index arithmetic for an (s, theta, phi) block of cells with the pole reflection.
struct LogicalGrid {
  int ni{0}, nt{0}, np{0};

  int size() const { return ni * nt * np; }
  int index(int i, int j, int k) const { return (i * nt + j) * np + k; }
  /// Neighbour reached by moving dj cells in theta, reflecting across the poles.
  int theta_shift(int i, int j, int k, int dj) const;
  int phi_shift(int i, int j, int k, int dk) const {
    return index(i, j, ((k + dk) % np + np) % np);
  }
};

/// Geometry of one structured block: nodes, Jacobians, volumes and face area vectors.
///
/// Face vectors point in the + direction of their logical coordinate. s-faces are
/// indexed (i = 0..ni, j, k), theta-faces (i, j = 0..nt, k) with the pole faces
/// identically zero, phi-faces (i, j, k) with face k lying at phi = k dphi.
struct CellGeometry {
  LogicalGrid grid;
  std::vector<double> s_faces;
  std::vector<double> s_nodes;
  Eigen::Matrix3Xd y;
  std::vector<Eigen::Matrix3d> jac;
  std::vector<Eigen::Matrix3d> jac_inv;
  Eigen::VectorXd jdet;
  Eigen::VectorXd volume;
  Eigen::Matrix3Xd S_s, S_t, S_p;

  int sface(int i, int j, int k) const { return (i * grid.nt + j) * grid.np + k; }
  int tface(int i, int j, int k) const { return (i * (grid.nt + 1) + j) * grid.np + k; }
  int pface(int i, int j, int k) const { return grid.index(i, j, k); }
  double ds(int i) const { return s_faces[i + 1] - s_faces[i]; }
};

/// Body-fitted shell between the ellipsoid surface (s = 0) and the sphere |y| = R_out (s = 1).
///
/// Two staggered blocks are kept: the primal block whose cell centres carry the
/// velocity, and a dual block whose nodes sit on s = i ds (i = 0..n_r) and carry the
/// pressure, so that dual node i = 0 lies on the body.
class ShellMesh {
 public:
  ShellMesh(const Ellipsoid& body, const MeshSpec& spec);

  const Ellipsoid& body() const { return body_; }
  const MeshSpec& spec() const { return spec_; }
  double dtheta() const { return dth_; }
  double dphi() const { return dph_; }
  double ds() const { return ds_; }

  Eigen::Vector3d map(double s, double th, double ph) const;
  /// Columns d y / d s, d y / d theta, d y / d phi.
  Eigen::Matrix3d map_jacobian(double s, double th, double ph) const;

  CellGeometry primal;
  CellGeometry dual;

  /// Per boundary patch (j, k): centre point, n dsigma (n out of the fluid), y x n dsigma, area.
  Eigen::Matrix3Xd bnd_point;
  Eigen::Matrix3Xd bnd_nA;
  Eigen::Matrix3Xd bnd_T;
  Eigen::VectorXd bnd_area;

  /// Interior quadrature of the solid body.
  Eigen::Matrix3Xd body_points;
  Eigen::VectorXd body_weights;

  double mass{0};
  Eigen::Matrix3d Jbar = Eigen::Matrix3d::Identity();
  double mass_quad{0};
  Eigen::Matrix3d Jbar_quad = Eigen::Matrix3d::Identity();

  double theta_of(int j) const { return (j + 0.5) * dth_; }
  double phi_of(int k) const { return (k + 0.5) * dph_; }

 private:
  void build_block(CellGeometry& g, const std::vector<double>& sf, const std::vector<double>& sn) const;
  void build_boundary();
  void build_body_quadrature();

  Eigen::Vector3d edge_s(double s0, double s1, double th, double ph) const;
  Eigen::Vector3d edge_t(double s, double t0, double t1, double ph) const;
  Eigen::Vector3d edge_p(double s, double th, double p0, double p1) const;

  Ellipsoid body_;
  MeshSpec spec_;
  double ds_{0}, dth_{0}, dph_{0};
};

/// Throws ValidationError if the mesh request is unusable.
void validate_mesh_request(const Ellipsoid& body, const MeshSpec& spec);

}  // namespace eulerbody
