#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eulerbody/config.hpp"
#include "eulerbody/field_spaces.hpp"
#include "eulerbody/pressure_solver.hpp"
#include "eulerbody/shell_mesh.hpp"
#include "eulerbody/time_stepper.hpp"

namespace eulerbody {

/// 4th-order finite-difference divergence of Lambda at random blend-annulus points.
struct DivLambdaReport {
  std::vector<double> steps;
  /// Per step: max over states and points.
  std::vector<double> max_div;
  /// Smallest observed order over states and step pairs.
  double min_order{0};
  int states{0};
};
DivLambdaReport study_div_lambda(const CutoffProfile<double>& profile, int states, std::uint64_t seed,
                                 std::vector<double> steps = {0.08, 0.04, 0.02}, int points_per_state = 20);

/// max |det JX - 1| after repeated flow-map steps with random constant (l, omega), |l|, |omega| <= 1.
struct VolumeReport {
  double max_det_drift{0};
  int runs{0};
};
VolumeReport study_volume_preservation(const ShellMesh& mesh, const CutoffProfile<double>& profile, int steps,
                                       double dt, int runs, std::uint64_t seed);

/// Pure rotation about z up to t_end: max |X - Q(t) y| and max |JX - Q(t)| over nodes with |y| <= r1.
struct RigidRegionReport {
  double max_x_err{0};
  double max_jac_err{0};
  int nodes{0};
};
RigidRegionReport study_rigid_region(const ShellMesh& mesh, const CutoffProfile<double>& profile, double t_end,
                                     int steps);

struct ProjectionReport {
  double max_orthogonality{0};
  double max_idempotence{0};
  double max_div_before{0};
  double max_div_after{0};
  int fields{0};
};
ProjectionReport study_projection(const Projector& P, int fields, std::uint64_t seed);

/// q = sin(y1/2) cos(y2/3) exp(y3/5) on a sphere exterior with its exact Neumann data.
struct ManufacturedLevel {
  MeshSpec spec;
  int unknowns{0};
  double l2_error{0};
  int iterations{0};
};
struct ManufacturedReport {
  std::vector<ManufacturedLevel> levels;
  std::vector<double> orders;
  double min_order{0};
};
double manufactured_q(const Eigen::Vector3d& y);
ManufacturedLevel solve_manufactured(const MeshSpec& spec);
ManufacturedReport study_pressure_convergence(int levels, MeshSpec base = {8, 8, 16, 4.0, 0.0});

/// Random probes of B(eta, eta) with the metric of a moved flow map.
struct CoercivityReport {
  int probes{0};
  double min_B{0};
  /// min over probes of B_G(eta, eta) / B_I(eta, eta)
  double min_ratio{0};
  double metric_floor{0};
  double max_asymmetry{0};
};
CoercivityReport study_coercivity(const ShellMesh& mesh, const PressureSolver& ps, const CutoffProfile<double>& profile,
                                  int probes, std::uint64_t seed);

/// Monitored run: deviations are measured against L_ref, R_ref.
struct RunRecord {
  std::vector<double> t, L_dev, R_dev, fluid_ke, energy, qv, pressure_ratio;
  int steps{0};
  double seconds{0};

  double max_L_dev() const;
  double max_R_dev() const;
  double max_fluid_ke() const;
  double max_energy_drift() const;
  double max_qv() const;
  /// max over the run of pressure_ratio / max(initial, floor)
  double pressure_growth(double floor = 1e-10) const;
};
RunRecord run_monitored(const Stepper& stepper, const SimState& s0, double t_end, double dt,
                        const Eigen::Vector3d& L_ref, const Eigen::Vector3d& R_ref,
                        const std::function<void(const SimState&)>& on_commit = {});

/// Initial rigid state and fluid field described by a config.
RigidBodyState<double> initial_rigid_state(const SimConfig& cfg);
Eigen::Matrix3Xd initial_field(const SimConfig& cfg, const ShellMesh& mesh);

/// Full `run`: writes timeseries.csv and config.echo into out_dir.
struct RunSummary {
  SimState final_state;
  int rows{0};
  std::string timeseries_path;
};
RunSummary run_simulation(const SimConfig& cfg, const std::string& out_dir, bool verbose);

/// Named pass/fail result of one invariant check.
struct CheckResult {
  std::string name;
  bool pass{false};
  std::string detail;
};
std::vector<CheckResult> run_checks(const MeshSpec& spec, bool verbose);

}  // namespace eulerbody
