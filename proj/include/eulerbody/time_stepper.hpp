#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "eulerbody/field_spaces.hpp"
#include "eulerbody/flow_map.hpp"
#include "eulerbody/pressure_solver.hpp"
#include "eulerbody/rigid_motion.hpp"
#include "eulerbody/shell_mesh.hpp"

namespace eulerbody {

struct StepperOptions {
  double picard_tol{1e-8};
  int picard_max_iter{25};
  double cfl_max{0.5};
  /// Projector tolerance used when a step is committed.
  double commit_tol{1e-12};
  /// Projector tolerance used only to measure ||Qv||.
  double monitor_tol{1e-3};
  bool monitor_qv{true};
  /// Optional 2nd-difference filter on v after each step; 0 disables it.
  double filter{0.0};
  /// Smallest dt the controller will try after repeated halving, relative to the requested dt.
  double min_dt_fraction{1.0 / 64};
};

struct StepDiagnostics {
  double energy{0};
  double fluid_energy{0};
  double det_drift{0};
  double qv_ratio{0};
  double pressure_ratio{0};
  double grad_v_inf{0};
  double pressure_residual{0};
  double cfl{0};
  int picard_iters{0};
  int pressure_iters{0};
};

/// Time derivatives (v', L', R') at one state.
struct Rates {
  Eigen::Matrix3Xd dv;
  Eigen::Vector3d dL = Eigen::Vector3d::Zero();
  Eigen::Vector3d dR = Eigen::Vector3d::Zero();
};

struct SimState {
  double t{0};
  GridField v;
  RigidBodyState<double> rigid;
  TransformBundle bundle;
  PressureSolution last_q;
  Rates rates;
  Rates prev_rates;
  bool has_prev_rates{false};
  StepDiagnostics diag;
};

/// Mv + Nv at the primal nodes. Logical derivatives are 2nd-order centred with
/// one-sided closures at the two s ends and the reflection across the poles.
Eigen::Matrix3Xd apply_convection(const ShellMesh& mesh, const Eigen::Matrix3Xd& v, const TransformBundle& bundle);

/// max over nodes of the largest |d v_i / d y_j|.
double max_velocity_gradient(const ShellMesh& mesh, const Eigen::Matrix3Xd& v);

/// 1/2 sum V v.g v (fluid only).
double fluid_energy(const ShellMesh& mesh, const Eigen::Matrix3Xd& v, const TransformBundle& bundle);
double total_energy(const ShellMesh& mesh, const SimState& s);

/// Potential flow around a sphere of radius a translating with L0 (world = body frame at t = 0).
Eigen::Matrix3Xd potential_flow_sphere(const ShellMesh& mesh, const Eigen::Vector3d& L0);

struct PhysicalSnapshot {
  double t{0};
  Eigen::Matrix3Xd x;
  Eigen::Matrix3Xd u;
  Eigen::Vector3d h, l, omega;
  Eigen::Matrix3d Q;
};

PhysicalSnapshot reconstruct_physical(const SimState& s);

/// Owns nothing heavy; refers to a mesh, projector and pressure solver built once per run.
class Stepper {
 public:
  Stepper(const ShellMesh& mesh, const Projector& projector, const PressureSolver& pressure, CutoffProfile<double> profile,
          StepperOptions opt = {});

  const ShellMesh& mesh() const { return mesh_; }
  const StepperOptions& options() const { return opt_; }
  StepperOptions& options() { return opt_; }
  const CutoffProfile<double>& profile() const { return profile_; }

  /// Projects (u0, L, R) onto the discrete X~* and evaluates the rates at t0.
  SimState initialize(const RigidBodyState<double>& rigid0, const Eigen::Matrix3Xd& u0) const;

  /// One committed step of size dt: trapezoidal rule solved by fixed-point iteration.
  SimState picard_step(const SimState& s, double dt) const;

  /// Steps to t_end with dt, halving on step failure; `on_commit` sees every committed state.
  SimState advance(SimState s, double t_end, double dt, const std::function<void(const SimState&)>& on_commit = {}) const;

  /// Transport CFL number of the state for step dt.
  double cfl(const SimState& s, double dt) const;

  /// Rates and pressure at a given (v, rigid, bundle).
  Rates evaluate(const Eigen::Matrix3Xd& v, const RigidBodyState<double>& rigid, const TransformBundle& bundle,
                 PressureSolution& q, const Eigen::VectorXd* warm) const;

 private:
  void fill_diagnostics(SimState& s) const;
  Eigen::Matrix3Xd filtered(const Eigen::Matrix3Xd& v) const;

  const ShellMesh& mesh_;
  const Projector& projector_;
  const PressureSolver& pressure_;
  CutoffProfile<double> profile_;
  StepperOptions opt_;
};

struct TwinReport {
  std::vector<double> t;
  std::vector<double> e;
  double rate{0};
  double intercept{0};
  /// max |log e - (intercept + rate t)|
  double max_log_residual{0};
  /// ||grad q|| / (1 + ||v||) of the base and perturbed runs at each sample
  std::vector<double> pressure_a, pressure_b;
};

/// e(t) = ||v1 - v2||^2 + m |L1 - L2|^2 + (Jbar dR).dR for two runs whose initial L differs by delta * dir.
TwinReport twin_run_divergence(const Stepper& stepper, const RigidBodyState<double>& rigid0, const Eigen::Matrix3Xd& u0,
                               double delta, const Eigen::Vector3d& dir, double t_end, double dt);

/// Least-squares line through (t, log e) and the max residual; entries with e <= 0 are skipped.
void fit_log_linear(TwinReport& r);

}  // namespace eulerbody
