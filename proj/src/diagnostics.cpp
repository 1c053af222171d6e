#include "eulerbody/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "eulerbody/errors.hpp"
#include "eulerbody/quadrature.hpp"
#include "eulerbody/timeseries.hpp"

namespace eulerbody {

using Eigen::Matrix3d;
using Eigen::Matrix3Xd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;

Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector3d v(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-8) v = Vector3d(n(rng), n(rng), n(rng));
  return v.normalized();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector3d grad_manufactured(const Vector3d& y) {
  const double a = std::sin(y(0) / 2), b = std::cos(y(1) / 3), c = std::exp(y(2) / 5);
  return {0.5 * std::cos(y(0) / 2) * b * c, -a * std::sin(y(1) / 3) / 3 * c, a * b * c / 5};
}

double lap_manufactured(const Vector3d& y) { return manufactured_q(y) * (-0.25 - 1.0 / 9 + 1.0 / 25); }

}  // namespace

DivLambdaReport study_div_lambda(const CutoffProfile<double>& profile, int states, std::uint64_t seed,
                                 std::vector<double> steps, int points_per_state) {
  DivLambdaReport rep;
  rep.steps = steps;
  rep.states = states;
  rep.max_div.assign(steps.size(), 0.0);
  rep.min_order = INFINITY;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double margin = 2 * *std::max_element(steps.begin(), steps.end()) + 0.05;
  for (int s = 0; s < states; ++s) {
    RigidMotion<double> m;
    m.h = 0.5 * (2 * Vector3d(u(rng), u(rng), u(rng)) - Vector3d::Ones());
    m.l = (0.5 + 0.5 * u(rng)) * random_unit(rng);
    m.omega = (0.5 + 0.5 * u(rng)) * random_unit(rng);
    std::vector<double> err(steps.size(), 0.0);
    for (int p = 0; p < points_per_state; ++p) {
      const double rho = profile.r1 + margin + u(rng) * (profile.r2 - profile.r1 - 2 * margin);
      const Vector3d x = m.h + rho * random_unit(rng);
      for (std::size_t k = 0; k < steps.size(); ++k) {
        const double h = steps[k];
        double div = 0;
        for (int a = 0; a < 3; ++a) {
          const Vector3d e = h * Vector3d::Unit(a);
          const double d = (-eval_lambda<double>(x + 2 * e, m, profile)(a) + 8 * eval_lambda<double>(x + e, m, profile)(a) -
                            8 * eval_lambda<double>(x - e, m, profile)(a) + eval_lambda<double>(x - 2 * e, m, profile)(a)) /
                           (12 * h);
          div += d;
        }
        err[k] = std::max(err[k], std::abs(div));
      }
    }
    for (std::size_t k = 0; k < steps.size(); ++k) rep.max_div[k] = std::max(rep.max_div[k], err[k]);
    for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
      const double o = std::log(err[k] / err[k + 1]) / std::log(steps[k] / steps[k + 1]);
      rep.min_order = std::min(rep.min_order, o);
    }
  }
  return rep;
}

VolumeReport study_volume_preservation(const ShellMesh& mesh, const CutoffProfile<double>& profile, int steps,
                                       double dt, int runs, std::uint64_t seed) {
  VolumeReport rep;
  rep.runs = runs;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < runs; ++r) {
    RigidMotion<double> m;
    m.h.setZero();
    m.l = u(rng) * random_unit(rng);
    m.omega = u(rng) * random_unit(rng);
    TransformBundle b = identity_bundle(mesh.primal.y);
    for (int s = 0; s < steps; ++s) {
      b = advance_flow_map(b, frozen_trajectory(m, b.t, dt), profile);
      m.h += dt * m.l;
    }
    rep.max_det_drift = std::max(rep.max_det_drift, max_det_drift(b));
  }
  return rep;
}

RigidRegionReport study_rigid_region(const ShellMesh& mesh, const CutoffProfile<double>& profile, double t_end,
                                     int steps) {
  RigidMotion<double> m;
  m.h.setZero();
  m.l.setZero();
  m.omega = Vector3d(0, 0, 1);
  TransformBundle b = identity_bundle(mesh.primal.y);
  const double dt = t_end / steps;
  for (int s = 0; s < steps; ++s) b = advance_flow_map(b, frozen_trajectory(m, b.t, dt), profile);
  const Matrix3d Q = rotation_about<double>(Vector3d(0, 0, 1), t_end);
  RigidRegionReport rep;
  for (int n = 0; n < b.size(); ++n) {
    const Vector3d y = b.nodes.col(n);
    if (y.norm() > profile.r1) continue;
    ++rep.nodes;
    rep.max_x_err = std::max(rep.max_x_err, (b.X.col(n) - Q * y).norm());
    rep.max_jac_err = std::max(rep.max_jac_err, (b.JX[n] - Q).cwiseAbs().maxCoeff());
  }
  return rep;
}

ProjectionReport study_projection(const Projector& P, int fields, std::uint64_t seed) {
  const ShellMesh& mesh = P.mesh();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  ProjectionReport rep;
  rep.fields = fields;
  for (int f = 0; f < fields; ++f) {
    GridField u;
    u.fluid.resize(3, mesh.primal.grid.size());
    for (Eigen::Index i = 0; i < u.fluid.size(); ++i) u.fluid.data()[i] = nd(rng);
    u.rigid_l = Vector3d(nd(rng), nd(rng), nd(rng));
    u.rigid_omega = Vector3d(nd(rng), nd(rng), nd(rng));
    u.has_rigid_part = true;
    const double n2 = inner_product_xtilde(mesh, u, u);
    const GridField pu = P.project(u);
    const GridField ppu = P.project(pu);
    rep.max_orthogonality = std::max(rep.max_orthogonality, std::abs(inner_product_xtilde(mesh, pu, u - pu)) / n2);
    rep.max_idempotence = std::max(rep.max_idempotence, norm_xtilde(mesh, ppu - pu) / std::sqrt(n2));
    rep.max_div_before = std::max(rep.max_div_before, P.divergence_residual(u));
    rep.max_div_after = std::max(rep.max_div_after, P.divergence_residual(pu));
  }
  return rep;
}

double manufactured_q(const Vector3d& y) { return std::sin(y(0) / 2) * std::cos(y(1) / 3) * std::exp(y(2) / 5); }

ManufacturedLevel solve_manufactured(const MeshSpec& spec) {
  const ShellMesh mesh(Ellipsoid{Vector3d::Ones(), 1.0}, spec);
  PressureOptions opt;
  opt.rel_tol = 1e-12;
  const PressureSolver ps(mesh, opt);
  const CellGeometry& d = mesh.dual;
  const LogicalGrid& g = d.grid;
  const int n = g.size();
  VectorXd b = VectorXd::Zero(n), qx(n);
  const auto [gx, gw] = gauss_legendre(3);
  const double dth = mesh.dtheta(), dph = mesh.dphi();
  for (int i = 0; i < g.ni; ++i)
    for (int j = 0; j < g.nt; ++j)
      for (int k = 0; k < g.np; ++k) {
        const int c = g.index(i, j, k);
        qx(c) = manufactured_q(d.y.col(c));
        const double s0 = d.s_faces[i], s1 = d.s_faces[i + 1];
        double vol = 0;
        for (int a = 0; a < 3; ++a)
          for (int bb = 0; bb < 3; ++bb)
            for (int cc = 0; cc < 3; ++cc) {
              const double s = s0 + (s1 - s0) * (gx[a] + 1) / 2;
              const double th = dth * (j + (gx[bb] + 1) / 2), ph = dph * (k + (gx[cc] + 1) / 2);
              const double w = gw[a] * gw[bb] * gw[cc] / 8 * (s1 - s0) * dth * dph;
              vol += w * mesh.map_jacobian(s, th, ph).determinant() * lap_manufactured(mesh.map(s, th, ph));
            }
        b(c) -= vol;
        if (i == 0 || i == g.ni - 1) {
          // Exact normal flux through the body (outward = into the body) or the outer sphere.
          const double s = i == 0 ? 0.0 : 1.0, sign = i == 0 ? -1.0 : 1.0;
          double flux = 0;
          for (int bb = 0; bb < 3; ++bb)
            for (int cc = 0; cc < 3; ++cc) {
              const double th = dth * (j + (gx[bb] + 1) / 2), ph = dph * (k + (gx[cc] + 1) / 2);
              const Matrix3d J = mesh.map_jacobian(s, th, ph);
              flux += gw[bb] * gw[cc] / 4 * dth * dph * sign *
                      grad_manufactured(mesh.map(s, th, ph)).dot(J.col(1).cross(J.col(2)));
            }
          b(c) += flux;
        }
      }
  const Eigen::MatrixXd& F = ps.boundary_functionals();
  b += F * (ps.coupling() * (F.transpose() * qx));
  const PressureSolution sol = ps.solve_with(ps.flat_stiffness(), b, nullptr);
  ps.gauge(qx);
  const VectorXd e = sol.q - qx;
  ManufacturedLevel lev;
  lev.spec = spec;
  lev.unknowns = n;
  lev.iterations = sol.iterations;
  lev.l2_error = std::sqrt((e.array().square() * d.volume.array()).sum() / (qx.array().square() * d.volume.array()).sum());
  return lev;
}

ManufacturedReport study_pressure_convergence(int levels, MeshSpec base) {
  ManufacturedReport rep;
  MeshSpec s = base;
  for (int l = 0; l < levels; ++l) {
    rep.levels.push_back(solve_manufactured(s));
    s.n_r *= 2;
    s.n_theta *= 2;
    s.n_phi *= 2;
  }
  rep.min_order = levels > 1 ? INFINITY : 0.0;
  for (int l = 0; l + 1 < levels; ++l) {
    const double o = std::log2(rep.levels[l].l2_error / rep.levels[l + 1].l2_error);
    rep.orders.push_back(o);
    rep.min_order = std::min(rep.min_order, o);
  }
  return rep;
}

CoercivityReport study_coercivity(const ShellMesh& mesh, const PressureSolver& ps, const CutoffProfile<double>& profile,
                                  int probes, std::uint64_t seed) {
  // Metric of a flow map after a generic rigid motion.
  RigidMotion<double> m;
  m.h.setZero();
  m.l = Vector3d(0.6, -0.3, 0.4);
  m.omega = Vector3d(0.3, 0.5, -0.8);
  TransformBundle b = identity_bundle(mesh.primal.y);
  for (int s = 0; s < 40; ++s) {
    b = advance_flow_map(b, frozen_trajectory(m, b.t, 0.02), profile);
    m.h += 0.02 * m.l;
  }
  metric_and_christoffel(b, mesh.primal);
  CoercivityReport rep;
  rep.probes = probes;
  rep.metric_floor = INFINITY;
  for (const auto& G : b.g_up) {
    Eigen::SelfAdjointEigenSolver<Matrix3d> es(G, Eigen::EigenvaluesOnly);
    rep.metric_floor = std::min(rep.metric_floor, es.eigenvalues()(0));
  }
  const SpMat K = ps.stiffness(b.g_up);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  rep.min_B = INFINITY;
  rep.min_ratio = INFINITY;
  for (int p = 0; p < probes; ++p) {
    VectorXd eta(ps.size()), zeta(ps.size());
    for (int i = 0; i < eta.size(); ++i) {
      eta(i) = nd(rng);
      zeta(i) = nd(rng);
    }
    eta.array() -= eta.mean();
    const double B = ps.bilinear(K, eta, eta);
    const double B0 = ps.bilinear(ps.flat_stiffness(), eta, eta);
    rep.min_B = std::min(rep.min_B, B / eta.squaredNorm());
    rep.min_ratio = std::min(rep.min_ratio, B / B0);
    const double bez = ps.bilinear(K, eta, zeta), bze = ps.bilinear(K, zeta, eta);
    rep.max_asymmetry = std::max(rep.max_asymmetry, std::abs(bez - bze) / (std::abs(bez) + 1e-300));
  }
  return rep;
}

double RunRecord::max_L_dev() const { return L_dev.empty() ? 0 : *std::max_element(L_dev.begin(), L_dev.end()); }
double RunRecord::max_R_dev() const { return R_dev.empty() ? 0 : *std::max_element(R_dev.begin(), R_dev.end()); }
double RunRecord::max_fluid_ke() const { return fluid_ke.empty() ? 0 : *std::max_element(fluid_ke.begin(), fluid_ke.end()); }
double RunRecord::max_qv() const { return qv.size() < 2 ? 0 : *std::max_element(qv.begin() + 1, qv.end()); }

double RunRecord::max_energy_drift() const {
  double w = 0;
  for (double e : energy) w = std::max(w, std::abs(e - energy.front()) / std::abs(energy.front()));
  return w;
}

double RunRecord::pressure_growth(double floor) const {
  if (pressure_ratio.empty()) return 0;
  const double base = std::max(pressure_ratio.front(), floor);
  double w = 0;
  for (double p : pressure_ratio) w = std::max(w, p / base);
  return w;
}

RunRecord run_monitored(const Stepper& stepper, const SimState& s0, double t_end, double dt, const Vector3d& L_ref,
                        const Vector3d& R_ref, const std::function<void(const SimState&)>& on_commit) {
  RunRecord rec;
  const auto t0 = std::chrono::steady_clock::now();
  auto record = [&](const SimState& s) {
    rec.t.push_back(s.t);
    rec.L_dev.push_back((s.rigid.L - L_ref).norm() / std::max(L_ref.norm(), 1e-300));
    rec.R_dev.push_back((s.rigid.R - R_ref).norm());
    rec.fluid_ke.push_back(s.diag.fluid_energy);
    rec.energy.push_back(s.diag.energy);
    rec.qv.push_back(s.diag.qv_ratio);
    rec.pressure_ratio.push_back(s.diag.pressure_ratio);
  };
  record(s0);
  stepper.advance(s0, t_end, dt, [&](const SimState& s) {
    ++rec.steps;
    record(s);
    if (on_commit) on_commit(s);
  });
  rec.seconds = seconds_since(t0);
  return rec;
}

RigidBodyState<double> initial_rigid_state(const SimConfig& cfg) {
  RigidBodyState<double> r;
  r.t = 0;
  r.h.setZero();
  r.Q.setIdentity();
  r.L = cfg.L0;
  r.R = cfg.R0;
  const Ellipsoid body = cfg.body();
  r.mass = body.mass();
  r.Jbar = body.inertia();
  r.rho_body = cfg.rho_body;
  sync_world(r);
  return r;
}

Matrix3Xd initial_field(const SimConfig& cfg, const ShellMesh& mesh) {
  if (cfg.flow == "potential_uniform") return potential_flow_sphere(mesh, cfg.L0);
  return Matrix3Xd::Zero(3, mesh.primal.grid.size());
}

RunSummary run_simulation(const SimConfig& cfg, const std::string& out_dir, bool verbose) {
  validate_config(cfg);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream echo(std::filesystem::path(out_dir) / "config.echo");
    if (!echo) throw ValidationError("cannot write into '" + out_dir + "'");
    echo << echo_config(cfg);
  }
  const ShellMesh mesh(cfg.body(), cfg.mesh);
  const Projector P(mesh);
  PressureOptions popt;
  popt.rel_tol = cfg.pressure_tol;
  const PressureSolver ps(mesh, popt);
  const Stepper stepper(mesh, P, ps, cfg.profile(), cfg.stepper_options());

  RunSummary sum;
  sum.timeseries_path = (std::filesystem::path(out_dir) / "timeseries.csv").string();
  TimeseriesWriter w(sum.timeseries_path);
  SimState s = stepper.initialize(initial_rigid_state(cfg), initial_field(cfg, mesh));
  int step = 0;
  auto report = [&](const SimState& x) {
    if (verbose) {
      std::cerr << "t=" << x.t << " E=" << x.diag.energy << " |L|=" << x.rigid.L.norm() << " picard=" << x.diag.picard_iters
                << " qv=" << x.diag.qv_ratio << "\n";
    }
  };
  report(s);
  s = stepper.advance(s, cfg.t_end, cfg.dt, [&](const SimState& x) {
    ++step;
    if (step % cfg.cadence == 0) w.write(x);
    report(x);
  });
  if (step % cfg.cadence != 0) w.write(s);
  sum.rows = w.rows_written();
  sum.final_state = std::move(s);
  return sum;
}

std::vector<CheckResult> run_checks(const MeshSpec& spec, bool verbose) {
  std::vector<CheckResult> out;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    out.push_back({name, pass, detail});
    if (verbose) std::cerr << (pass ? "ok   " : "FAIL ") << name << ": " << detail << "\n";
  };
  auto str = [](std::initializer_list<std::pair<const char*, double>> kv) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, v] : kv) {
      os << (first ? "" : ", ") << k << "=" << v;
      first = false;
    }
    return os.str();
  };
  const CutoffProfile<double> profile;

  {
    const Matrix3d Q = advance_rotation<double>(Matrix3d::Identity(), Vector3d(0, 0, 1), kPi / 2, 100);
    const double e = (Q - rotation_about<double>(Vector3d(0, 0, 1), kPi / 2)).cwiseAbs().maxCoeff();
    const double orth = (Q.transpose() * Q - Matrix3d::Identity()).cwiseAbs().maxCoeff();
    add("rotation RK4 vs closed form", e <= 1e-8 && orth <= 1e-10, str({{"err", e}, {"orth", orth}}));
  }
  {
    const auto r = study_div_lambda(profile, 10, 7);
    add("div Lambda 4th-order decay", r.min_order >= 3.5, str({{"min_order", r.min_order}, {"max_div", r.max_div.back()}}));
  }

  const ShellMesh mesh(Ellipsoid{Vector3d::Ones(), 1.0}, spec);
  {
    const double closure = mesh.bnd_nA.rowwise().sum().norm();
    const double area = std::abs(mesh.bnd_area.sum() / mesh.body().surface_area() - 1);
    const double mass = std::abs(mesh.mass_quad / mesh.mass - 1);
    const double inertia = (mesh.Jbar_quad - mesh.Jbar).cwiseAbs().maxCoeff() / mesh.Jbar.cwiseAbs().maxCoeff();
    add("mesh closure, area, mass, inertia", closure <= 1e-10 && area <= 1e-3 && mass <= 1e-3 && inertia <= 1e-3,
        str({{"closure", closure}, {"area", area}, {"mass", mass}, {"inertia", inertia}}));
  }
  {
    const auto r = study_volume_preservation(mesh, profile, 100, 1e-2, 3, 11);
    add("flow map det JX", r.max_det_drift <= 1e-6, str({{"max_drift", r.max_det_drift}}));
  }
  {
    const auto r = study_rigid_region(mesh, profile, kPi / 2, 100);
    add("rigid region exactness", r.max_x_err <= 1e-7, str({{"x_err", r.max_x_err}, {"jac_err", r.max_jac_err}}));
  }
  const Projector P(mesh);
  {
    const auto r = study_projection(P, 5, 13);
    add("projector orthogonality/idempotence", r.max_orthogonality <= 1e-8 && r.max_idempotence <= 1e-8,
        str({{"orth", r.max_orthogonality}, {"idem", r.max_idempotence}, {"div_after", r.max_div_after}}));
  }
  const PressureSolver ps(mesh);
  {
    const auto r = study_coercivity(mesh, ps, profile, 5, 17);
    add("pressure form symmetric and coercive", r.min_B > 0 && r.max_asymmetry <= 1e-10,
        str({{"min_B", r.min_B}, {"floor", r.metric_floor}, {"asym", r.max_asymmetry}}));
  }
  {
    const auto sol = ps.solve_with(ps.flat_stiffness(), VectorXd::Zero(ps.size()), nullptr);
    add("pressure zero rhs", sol.q.norm() == 0.0 && sol.force.norm() == 0.0, str({{"|q|", sol.q.norm()}}));
  }
  {
    const Stepper st(mesh, P, ps, profile);
    RigidBodyState<double> r0;
    r0.h.setZero();
    r0.Q.setIdentity();
    r0.L = Vector3d(0.5, 0, 0);
    r0.R.setZero();
    sync_world(r0);
    const SimState s0 = st.initialize(r0, potential_flow_sphere(mesh, r0.L));
    const RunRecord rec = run_monitored(st, s0, 0.05, 0.01, r0.L, r0.R);
    add("short potential-flow run", rec.max_qv() <= 1e-8 && rec.max_energy_drift() <= 1e-2 && rec.max_L_dev() <= 0.05,
        str({{"qv", rec.max_qv()}, {"dE", rec.max_energy_drift()}, {"dL", rec.max_L_dev()}}));
  }
  return out;
}

}  // namespace eulerbody
