#pragma once

#include <Eigen/Dense>
#include <string>

#include "eulerbody/rigid_motion.hpp"
#include "eulerbody/shell_mesh.hpp"
#include "eulerbody/time_stepper.hpp"

namespace eulerbody {

/// Run parameters. Text form is one `section.key = value` per line; `[section]`
/// headers prefix the keys that follow; `#` starts a comment; vectors are
/// comma- or space-separated triples.
struct SimConfig {
  std::string body_shape{"sphere"};
  Eigen::Vector3d semi_axes{1.0, 1.0, 1.0};
  double rho_body{1.0};
  double fluid_rho{1.0};

  MeshSpec mesh{16, 8, 16, 6.0, 1.0};

  double r1{1.5};
  double r2{3.0};

  double dt{0.01};
  double t_end{0.5};
  double picard_tol{1e-8};
  int picard_max_iter{25};
  double cfl_max{0.5};
  double filter{0.0};
  double pressure_tol{1e-10};

  Eigen::Vector3d L0 = Eigen::Vector3d::Zero();
  Eigen::Vector3d R0 = Eigen::Vector3d::Zero();
  std::string flow{"rest"};

  std::string output_path{"out"};
  int cadence{1};

  Ellipsoid body() const { return Ellipsoid{semi_axes, rho_body}; }
  CutoffProfile<double> profile() const;
  StepperOptions stepper_options() const;
};

/// Throws ValidationError with "<source>:<line>: ..." on malformed or unknown entries.
SimConfig parse_config(const std::string& text, const std::string& source = "<config>");
SimConfig load_config(const std::string& path);

/// Throws ValidationError naming the offending key.
void validate_config(const SimConfig& cfg);

/// Resolved configuration in the same text format; parse_config(echo_config(c)) == c.
std::string echo_config(const SimConfig& cfg);

}  // namespace eulerbody
