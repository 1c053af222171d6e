// sim: command-line front end for the rigid body / perfect fluid solver.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>

#include "eulerbody/config.hpp"
#include "eulerbody/diagnostics.hpp"
#include "eulerbody/errors.hpp"

using namespace eulerbody;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kNumerical = 3;

MeshSpec named_mesh(const std::string& name) {
  if (name == "small") return {16, 8, 16, 6.0, 1.0};
  if (name == "ref") return {48, 24, 48, 6.0, 1.0};
  throw ValidationError("--mesh: expected small or ref, got '" + name + "'");
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out, bool quiet) {
  SimConfig cfg = load_config(config_path);
  if (out) cfg.output_path = *out;
  const RunSummary r = run_simulation(cfg, cfg.output_path, !quiet);
  std::printf("wrote %d rows to %s (t = %.6g, E = %.12g)\n", r.rows, r.timeseries_path.c_str(), r.final_state.t,
              r.final_state.diag.energy);
  return kOk;
}

int cmd_check(const std::string& mesh_name, bool quiet) {
  const auto results = run_checks(named_mesh(mesh_name), false);
  int failed = 0;
  for (const auto& c : results) {
    if (!c.pass) ++failed;
    if (!quiet || !c.pass) std::printf("%-4s %s: %s\n", c.pass ? "ok" : "FAIL", c.name.c_str(), c.detail.c_str());
  }
  std::printf("%zu checks, %d failed\n", results.size(), failed);
  return failed == 0 ? kOk : kNumerical;
}

int cmd_pressure(int levels) {
  if (levels < 1 || levels > 4) throw ValidationError("--levels: must lie in [1, 4]");
  const ManufacturedReport r = study_pressure_convergence(levels);
  std::printf("%8s %10s %14s %8s %6s\n", "mesh", "unknowns", "L2 error", "order", "iters");
  for (std::size_t l = 0; l < r.levels.size(); ++l) {
    const auto& lv = r.levels[l];
    char mesh[32];
    std::snprintf(mesh, sizeof mesh, "%dx%dx%d", lv.spec.n_r, lv.spec.n_theta, lv.spec.n_phi);
    if (l == 0)
      std::printf("%8s %10d %14.6e %8s %6d\n", mesh, lv.unknowns, lv.l2_error, "-", lv.iterations);
    else
      std::printf("%8s %10d %14.6e %8.3f %6d\n", mesh, lv.unknowns, lv.l2_error, r.orders[l - 1], lv.iterations);
  }
  return kOk;
}

int cmd_twin(double delta, const std::optional<std::string>& config_path, bool quiet) {
  if (!(delta > 0) || !std::isfinite(delta)) throw ValidationError("--delta: must be positive");
  SimConfig cfg;
  if (config_path) {
    cfg = load_config(*config_path);
  } else {
    cfg.mesh = {24, 12, 24, 6.0, 1.0};
    cfg.L0 = Eigen::Vector3d(0.5, 0, 0);
    cfg.flow = "potential_uniform";
    cfg.t_end = 0.3;
    cfg.picard_tol = 1e-11;
  }
  const ShellMesh mesh(cfg.body(), cfg.mesh);
  const Projector P(mesh);
  PressureOptions popt;
  popt.rel_tol = cfg.pressure_tol;
  const PressureSolver ps(mesh, popt);
  const Stepper st(mesh, P, ps, cfg.profile(), cfg.stepper_options());
  const TwinReport r = twin_run_divergence(st, initial_rigid_state(cfg), initial_field(cfg, mesh), delta,
                                           Eigen::Vector3d::Ones().normalized(), cfg.t_end, cfg.dt);
  if (!quiet) {
    std::printf("%10s %16s %12s\n", "t", "e(t)", "log e");
    for (std::size_t i = 0; i < r.t.size(); ++i)
      std::printf("%10.4f %16.8e %12.6f\n", r.t[i], r.e[i], r.e[i] > 0 ? std::log(r.e[i]) : -INFINITY);
  }
  std::printf("log e = %.6f + %.6f t, max residual %.4e\n", r.intercept, r.rate, r.max_log_residual);
  return kOk;
}

GridField named_field(const std::string& name, const ShellMesh& mesh) {
  const int n = mesh.primal.grid.size();
  GridField u = GridField::zero(n);
  if (name == "random") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index i = 0; i < u.fluid.size(); ++i) u.fluid.data()[i] = nd(rng);
    u.rigid_l = Eigen::Vector3d(nd(rng), nd(rng), nd(rng));
    u.rigid_omega = Eigen::Vector3d(nd(rng), nd(rng), nd(rng));
  } else if (name == "gradient") {
    for (int c = 0; c < n; ++c) {
      const Eigen::Vector3d y = mesh.primal.y.col(c);
      u.fluid.col(c) = Eigen::Vector3d(0.5 * std::cos(y(0) / 2) * std::cos(y(1) / 3), -std::sin(y(0) / 2) * std::sin(y(1) / 3) / 3, 0);
    }
  } else if (name == "swirl") {
    for (int c = 0; c < n; ++c) {
      const Eigen::Vector3d y = mesh.primal.y.col(c);
      u.fluid.col(c) = Eigen::Vector3d(-y(1), y(0), 0) * std::exp(-y.squaredNorm() / 4);
    }
  } else if (name == "potential") {
    if (mesh.body().semi_axes.minCoeff() != mesh.body().semi_axes.maxCoeff())
      throw ValidationError("--field potential needs a spherical body");
    u.fluid = potential_flow_sphere(mesh, Eigen::Vector3d(1, 0, 0));
    u.rigid_l = Eigen::Vector3d(1, 0, 0);
  } else {
    throw ValidationError("--field: expected random, gradient, swirl or potential, got '" + name + "'");
  }
  return u;
}

int cmd_project(const std::string& field, const std::string& mesh_name) {
  const ShellMesh mesh(Ellipsoid{}, named_mesh(mesh_name));
  const GridField u = named_field(field, mesh);
  const Projector P(mesh);
  const GridField pu = P.project(u);
  const GridField qu = u - pu;
  const double nu = norm_xtilde(mesh, u);
  std::printf("field %s on %dx%dx%d\n", field.c_str(), mesh.spec().n_r, mesh.spec().n_theta, mesh.spec().n_phi);
  std::printf("  |u|            %.10e\n", nu);
  std::printf("  |Pu|           %.10e\n", norm_xtilde(mesh, pu));
  std::printf("  |Qu|           %.10e\n", norm_xtilde(mesh, qu));
  std::printf("  <Pu,Qu>/|u|^2  %.3e\n", inner_product_xtilde(mesh, pu, qu) / (nu * nu));
  std::printf("  div u          %.3e\n", P.divergence_residual(u));
  std::printf("  div Pu         %.3e\n", P.divergence_residual(pu));
  std::printf("  Pu rigid l     %.8f %.8f %.8f\n", pu.rigid_l(0), pu.rigid_l(1), pu.rigid_l(2));
  std::printf("  Pu rigid omega %.8f %.8f %.8f\n", pu.rigid_omega(0), pu.rigid_omega(1), pu.rigid_omega(2));
  std::printf("  iterations     %d\n", P.last_iterations());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rigid body moving in a perfect incompressible fluid"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Less output");

  std::string config_path;
  std::optional<std::string> out_dir;
  auto* run = app.add_subcommand("run", "Simulate from a config file");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output.path)");

  std::string mesh_name = "small";
  auto* check = app.add_subcommand("check", "Run the invariant suites");
  check->add_option("--mesh", mesh_name, "small or ref");

  int levels = 3;
  auto* pressure = app.add_subcommand("pressure", "Manufactured-solution convergence table");
  pressure->add_option("--levels", levels, "Number of mesh levels");

  double delta = 1e-6;
  std::optional<std::string> twin_config;
  auto* twin = app.add_subcommand("twin", "Divergence of two runs with perturbed initial momentum");
  twin->add_option("--delta", delta, "Perturbation size");
  twin->add_option("--config", twin_config, "Config for the base run");

  std::string field = "random";
  std::string project_mesh = "small";
  auto* project = app.add_subcommand("project", "Decompose an analytic field into P u + Q u");
  project->add_option("--field", field, "random, gradient, swirl or potential");
  project->add_option("--mesh", project_mesh, "small or ref");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, quiet);
    if (*check) return cmd_check(mesh_name, quiet);
    if (*pressure) return cmd_pressure(levels);
    if (*twin) return cmd_twin(delta, twin_config, quiet);
    if (*project) return cmd_project(field, project_mesh);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
