#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "eulerbody/rigid_motion.hpp"
#include "eulerbody/shell_mesh.hpp"

namespace eulerbody {

using Christoffel = std::array<Eigen::Matrix3d, 3>;  // Gamma[k](i, j)

/// Per-node flow-map data on the velocity nodes.
struct TransformBundle {
  double t{0};
  Eigen::Matrix3Xd nodes;
  Eigen::Matrix3Xd X;
  std::vector<Eigen::Matrix3d> JX;
  std::vector<Eigen::Matrix3d> JY;
  /// HX[n][m](i, j) = d^2 X_m / dy_i dy_j
  std::vector<Christoffel> HX;
  std::vector<Eigen::Matrix3d> g_lo;
  std::vector<Eigen::Matrix3d> g_up;
  std::vector<Christoffel> Gamma;
  Eigen::Matrix3Xd dYdt;
  std::vector<Eigen::Matrix3d> dJXdt;
  /// True while the node has never been moved (X = y, JX = I bitwise).
  std::vector<char> identity;

  int size() const { return static_cast<int>(nodes.cols()); }
};

/// Rigid motion sampled at the start, midpoint and end of one step.
struct RigidTrajectory {
  double t0{0};
  double dt{0};
  RigidMotion<double> m0, mh, m1;
};

/// Straight-line trajectory with frozen l and omega (h moves with l).
RigidTrajectory frozen_trajectory(const RigidMotion<double>& m, double t0, double dt);

TransformBundle identity_bundle(const Eigen::Matrix3Xd& nodes, double t = 0.0);

/// One RK4 step of dX/dt = Lambda(X, t), dJX/dt = dLambda/dx(X, t) JX and the matching
/// equation for the second derivatives of X, for every node,
/// followed by a Newton rescale of JX toward det = 1 and JY = JX^{-1}.
/// Only X, JX, JY, HX, identity and t are updated.
TransformBundle advance_flow_map(const TransformBundle& b, const RigidTrajectory& traj,
                                 const CutoffProfile<double>& profile);

/// Convenience form with l, omega frozen over the step.
TransformBundle advance_flow_map(const TransformBundle& b, const RigidBodyState<double>& state,
                                 const CutoffProfile<double>& profile, double dt);

/// g_lo = JX^T JX, g_up = JY JY^T and Gamma^k_ij = JY_km d^2 X_m / dy_i dy_j.
/// `geom` must be the block whose nodes are b.nodes.
void metric_and_christoffel(TransformBundle& b, const CellGeometry& geom);

/// Christoffel symbols from 4th-order logical differences of g_lo (needs g_lo filled).
std::vector<Christoffel> christoffel_by_differences(const TransformBundle& b, const CellGeometry& geom);

/// dYdt = -JY Lambda(X) and dJXdt = dLambda/dx(X) JX.
void frame_time_derivs(TransformBundle& b, const RigidMotion<double>& m, const CutoffProfile<double>& profile);

double max_det_drift(const TransformBundle& b);

}  // namespace eulerbody
