#include "eulerbody/time_stepper.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eulerbody/errors.hpp"

namespace eulerbody {

using Eigen::Matrix3d;
using Eigen::Matrix3Xd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

// Logical derivatives of a nodal vector field at primal node (i, j, k); columns d/ds, d/dtheta, d/dphi.
Matrix3d logical_gradient(const ShellMesh& mesh, const Matrix3Xd& v, int i, int j, int k) {
  const LogicalGrid& g = mesh.primal.grid;
  const double ds = mesh.ds(), dth = mesh.dtheta(), dph = mesh.dphi();
  Matrix3d d;
  if (i == 0) {
    d.col(0) = (-3 * v.col(g.index(0, j, k)) + 4 * v.col(g.index(1, j, k)) - v.col(g.index(2, j, k))) / (2 * ds);
  } else if (i == g.ni - 1) {
    d.col(0) = (3 * v.col(g.index(i, j, k)) - 4 * v.col(g.index(i - 1, j, k)) + v.col(g.index(i - 2, j, k))) / (2 * ds);
  } else {
    d.col(0) = (v.col(g.index(i + 1, j, k)) - v.col(g.index(i - 1, j, k))) / (2 * ds);
  }
  d.col(1) = (v.col(g.theta_shift(i, j, k, 1)) - v.col(g.theta_shift(i, j, k, -1))) / (2 * dth);
  d.col(2) = (v.col(g.phi_shift(i, j, k, 1)) - v.col(g.phi_shift(i, j, k, -1))) / (2 * dph);
  return d;
}

double xt_norm2(const ShellMesh& mesh, const Matrix3Xd& v, const Vector3d& L, const Vector3d& R) {
  return (v.colwise().squaredNorm().transpose().array() * mesh.primal.volume.array()).sum() +
         mesh.mass * L.squaredNorm() + R.dot(mesh.Jbar * R);
}

RigidMotion<double> world_motion(const Vector3d& h, const Matrix3d& Q, const Vector3d& L, const Vector3d& R) {
  RigidMotion<double> m;
  m.h = h;
  m.l = Q * L;
  m.omega = Q * R;
  return m;
}

}  // namespace

Matrix3Xd apply_convection(const ShellMesh& mesh, const Matrix3Xd& v, const TransformBundle& b) {
  const CellGeometry& pr = mesh.primal;
  const LogicalGrid& g = pr.grid;
  if (v.cols() != g.size() || b.size() != g.size()) throw AssemblyError("apply_convection: size mismatch");
  Matrix3Xd w(3, g.size());
  for (int i = 0; i < g.ni; ++i)
    for (int j = 0; j < g.nt; ++j)
      for (int k = 0; k < g.np; ++k) {
        const int n = g.index(i, j, k);
        const Matrix3d grad = logical_gradient(mesh, v, i, j, k) * pr.jac_inv[n];
        const Vector3d vn = v.col(n);
        const Vector3d adv = b.dYdt.col(n) + vn;
        Vector3d r = grad * adv;
        if (!b.identity[n]) {
          for (int a = 0; a < 3; ++a) r(a) += vn.dot(b.Gamma[n][a] * adv);
          r += b.JY[n] * (b.dJXdt[n] * vn);
        } else {
          r += b.dJXdt[n] * vn;
        }
        w.col(n) = r;
      }
  return w;
}

double max_velocity_gradient(const ShellMesh& mesh, const Matrix3Xd& v) {
  const CellGeometry& pr = mesh.primal;
  const LogicalGrid& g = pr.grid;
  double m = 0;
  for (int i = 0; i < g.ni; ++i)
    for (int j = 0; j < g.nt; ++j)
      for (int k = 0; k < g.np; ++k) {
        const int n = g.index(i, j, k);
        m = std::max(m, (logical_gradient(mesh, v, i, j, k) * pr.jac_inv[n]).cwiseAbs().maxCoeff());
      }
  return m;
}

double fluid_energy(const ShellMesh& mesh, const Matrix3Xd& v, const TransformBundle& b) {
  double e = 0;
  for (int n = 0; n < v.cols(); ++n) {
    const Vector3d vn = v.col(n);
    e += mesh.primal.volume(n) * (b.identity[n] ? vn.squaredNorm() : vn.dot(b.g_lo[n] * vn));
  }
  return 0.5 * e;
}

double total_energy(const ShellMesh& mesh, const SimState& s) {
  const auto& r = s.rigid;
  return fluid_energy(mesh, s.v.fluid, s.bundle) + 0.5 * r.mass * r.L.squaredNorm() + 0.5 * r.R.dot(r.Jbar * r.R);
}

Matrix3Xd potential_flow_sphere(const ShellMesh& mesh, const Vector3d& L0) {
  const double a = mesh.body().semi_axes.mean();
  const double a3 = a * a * a;
  const Matrix3Xd& y = mesh.primal.y;
  Matrix3Xd u(3, y.cols());
  for (int n = 0; n < y.cols(); ++n) {
    const Vector3d p = y.col(n);
    const double r = p.norm(), r3 = r * r * r, r5 = r3 * r * r;
    u.col(n) = -0.5 * a3 * (L0 / r3 - 3.0 * L0.dot(p) * p / r5);
  }
  return u;
}

PhysicalSnapshot reconstruct_physical(const SimState& s) {
  PhysicalSnapshot p;
  p.t = s.t;
  p.x = s.bundle.X;
  p.u.resize(3, s.v.fluid.cols());
  for (int n = 0; n < s.v.fluid.cols(); ++n) {
    p.u.col(n) = s.bundle.identity[n] ? Vector3d(s.v.fluid.col(n)) : Vector3d(s.bundle.JX[n] * s.v.fluid.col(n));
  }
  p.h = s.rigid.h;
  p.Q = s.rigid.Q;
  std::tie(p.l, p.omega) = body_to_world(s.rigid);
  return p;
}

Stepper::Stepper(const ShellMesh& mesh, const Projector& projector, const PressureSolver& pressure,
                 CutoffProfile<double> profile, StepperOptions opt)
    : mesh_(mesh), projector_(projector), pressure_(pressure), profile_(profile), opt_(opt) {
  if (!profile_.valid()) throw ValidationError("cutoff profile is invalid");
  if (profile_.r1 <= mesh_.body().max_axis()) throw ValidationError("cutoff.r1 must exceed the largest semi-axis");
  if (profile_.r2 >= mesh_.spec().R_out) throw ValidationError("cutoff.r2 must be smaller than mesh.R_out");
}

Rates Stepper::evaluate(const Matrix3Xd& v, const RigidBodyState<double>& rigid, const TransformBundle& bundle,
                        PressureSolution& q, const VectorXd* warm) const {
  const Matrix3Xd w = apply_convection(mesh_, v, bundle);
  const PressureProblem prob = assemble_pressure_problem(pressure_, w, bundle, rigid);
  q = pressure_.solve(prob, warm);
  Rates r;
  r.dv.resize(3, v.cols());
  for (int n = 0; n < v.cols(); ++n) {
    r.dv.col(n) = -(w.col(n) + bundle.g_up[n] * q.grad_q.col(n));
  }
  r.dL = q.force / rigid.mass - rigid.R.cross(rigid.L);
  r.dR = rigid.Jbar.ldlt().solve(q.torque + (rigid.Jbar * rigid.R).cross(rigid.R));
  return r;
}

double Stepper::cfl(const SimState& s, double dt) const {
  const CellGeometry& pr = mesh_.primal;
  const Vector3d h(mesh_.ds(), mesh_.dtheta(), mesh_.dphi());
  double c = 0;
  for (int n = 0; n < pr.grid.size(); ++n) {
    const Vector3d a = pr.jac_inv[n] * (s.v.fluid.col(n) + s.bundle.dYdt.col(n));
    c = std::max(c, a.cwiseAbs().cwiseQuotient(h).maxCoeff());
  }
  return c * dt;
}

SimState Stepper::initialize(const RigidBodyState<double>& rigid0, const Matrix3Xd& u0) const {
  if (u0.cols() != mesh_.primal.grid.size()) throw ValidationError("initial field does not match the mesh");
  if (!u0.allFinite() || !all_finite(rigid0.L) || !all_finite(rigid0.R)) {
    throw InvalidStateError("initial data is not finite");
  }
  SimState s;
  s.t = rigid0.t;
  s.rigid = rigid0;
  s.rigid.mass = mesh_.mass;
  s.rigid.Jbar = mesh_.Jbar;
  s.rigid.rho_body = mesh_.body().rho;
  GridField f;
  f.fluid = u0;
  f.rigid_l = rigid0.L;
  f.rigid_omega = rigid0.R;
  f.has_rigid_part = true;
  s.v = projector_.project(f, opt_.commit_tol);
  s.rigid.L = s.v.rigid_l;
  s.rigid.R = s.v.rigid_omega;
  sync_world(s.rigid);
  s.bundle = identity_bundle(mesh_.primal.y, s.t);
  frame_time_derivs(s.bundle, motion_of(s.rigid), profile_);
  s.rates = evaluate(s.v.fluid, s.rigid, s.bundle, s.last_q, nullptr);
  fill_diagnostics(s);
  return s;
}

Matrix3Xd Stepper::filtered(const Matrix3Xd& v) const {
  const LogicalGrid& g = mesh_.primal.grid;
  Matrix3Xd out = v;
  const double c = opt_.filter / 4.0;
  for (int i = 0; i < g.ni; ++i)
    for (int j = 0; j < g.nt; ++j)
      for (int k = 0; k < g.np; ++k) {
        const int n = g.index(i, j, k);
        Vector3d lap = v.col(g.theta_shift(i, j, k, 1)) + v.col(g.theta_shift(i, j, k, -1)) +
                       v.col(g.phi_shift(i, j, k, 1)) + v.col(g.phi_shift(i, j, k, -1)) - 4 * v.col(n);
        if (i > 0 && i < g.ni - 1) lap += v.col(g.index(i + 1, j, k)) + v.col(g.index(i - 1, j, k)) - 2 * v.col(n);
        out.col(n) += c * lap;
      }
  return out;
}

SimState Stepper::picard_step(const SimState& s, double dt) const {
  if (!(dt > 0) || !std::isfinite(dt)) throw InvalidStateError("picard_step: dt must be positive");
  const double c = cfl(s, dt);
  if (c > opt_.cfl_max) {
    std::ostringstream os;
    os << "picard_step: CFL " << c << " exceeds " << opt_.cfl_max;
    throw CflViolation(os.str(), c);
  }
  const RigidBodyState<double>& r0 = s.rigid;
  const Matrix3Xd& v0 = s.v.fluid;
  const Rates& f0 = s.rates;

  Matrix3Xd v1;
  Vector3d L1, R1;
  if (s.has_prev_rates) {
    v1 = v0 + dt * (1.5 * f0.dv - 0.5 * s.prev_rates.dv);
    L1 = r0.L + dt * (1.5 * f0.dL - 0.5 * s.prev_rates.dL);
    R1 = r0.R + dt * (1.5 * f0.dR - 0.5 * s.prev_rates.dR);
  } else {
    v1 = v0 + dt * f0.dv;
    L1 = r0.L + dt * f0.dL;
    R1 = r0.R + dt * f0.dR;
  }

  const Vector3d l0 = r0.Q * r0.L;
  RigidBodyState<double> r1 = r0;
  TransformBundle b1;
  PressureSolution q;
  Rates f1;
  VectorXd warm = s.last_q.q;
  bool converged = false;
  int it = 0;
  // Rates are taken at projected iterates so that they stay consistent with the committed state.
  GridField iterate;
  iterate.has_rigid_part = true;
  auto project_iterate = [&](Matrix3Xd& v, Vector3d& L, Vector3d& R) {
    iterate.fluid = std::move(v);
    iterate.rigid_l = L;
    iterate.rigid_omega = R;
    iterate = projector_.project(iterate, opt_.commit_tol);
    v = std::move(iterate.fluid);
    L = iterate.rigid_l;
    R = iterate.rigid_omega;
  };
  project_iterate(v1, L1, R1);
  for (it = 1; it <= opt_.picard_max_iter; ++it) {
    // Rigid trajectory over the step from the current end-point guess.
    const Vector3d Lh = 0.5 * (r0.L + L1), Rh = 0.5 * (r0.R + R1);
    const Matrix3d Qh = advance_rotation<double>(r0.Q, r0.R, Rh, 0.5 * dt);
    const Matrix3d Q1 = advance_rotation<double>(r0.Q, r0.R, R1, dt);
    const Vector3d lh = Qh * Lh, l1 = Q1 * L1;
    const Vector3d hh = r0.h + dt / 24.0 * (5 * l0 + 8 * lh - l1);
    const Vector3d h1 = r0.h + dt / 6.0 * (l0 + 4 * lh + l1);
    RigidTrajectory traj;
    traj.t0 = s.t;
    traj.dt = dt;
    traj.m0 = motion_of(r0);
    traj.mh = world_motion(hh, Qh, Lh, Rh);
    traj.m1 = world_motion(h1, Q1, L1, R1);

    r1.t = s.t + dt;
    r1.h = h1;
    r1.Q = Q1;
    r1.L = L1;
    r1.R = R1;
    sync_world(r1);
    b1 = advance_flow_map(s.bundle, traj, profile_);
    metric_and_christoffel(b1, mesh_.primal);
    frame_time_derivs(b1, traj.m1, profile_);

    f1 = evaluate(v1, r1, b1, q, &warm);
    warm = q.q;

    Matrix3Xd vn = v0 + 0.5 * dt * (f0.dv + f1.dv);
    Vector3d Ln = r0.L + 0.5 * dt * (f0.dL + f1.dL);
    Vector3d Rn = r0.R + 0.5 * dt * (f0.dR + f1.dR);
    if (!vn.allFinite() || !all_finite(Ln) || !all_finite(Rn)) throw StepFailure("picard_step: iterate is not finite");
    project_iterate(vn, Ln, Rn);
    const double diff = std::sqrt(xt_norm2(mesh_, vn - v1, Ln - L1, Rn - R1));
    const double scale = std::sqrt(xt_norm2(mesh_, vn, Ln, Rn));
    v1 = vn;
    L1 = Ln;
    R1 = Rn;
    if (diff <= opt_.picard_tol * scale || diff == 0.0) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "picard_step: no convergence in " << opt_.picard_max_iter << " iterations at t = " << s.t << ", dt = " << dt;
    throw StepFailure(os.str());
  }

  GridField g;
  g.fluid = opt_.filter > 0 ? filtered(v1) : v1;
  g.rigid_l = L1;
  g.rigid_omega = R1;
  g.has_rigid_part = true;

  SimState out;
  out.t = s.t + dt;
  out.v = opt_.filter > 0 ? projector_.project(g, opt_.commit_tol) : std::move(g);
  out.rigid = r1;
  out.rigid.t = out.t;
  out.rigid.L = out.v.rigid_l;
  out.rigid.R = out.v.rigid_omega;
  sync_world(out.rigid);
  out.bundle = std::move(b1);
  frame_time_derivs(out.bundle, motion_of(out.rigid), profile_);
  out.last_q = std::move(q);
  out.rates = std::move(f1);
  out.prev_rates = s.rates;
  out.has_prev_rates = true;
  out.diag.picard_iters = std::min(it, opt_.picard_max_iter);
  out.diag.cfl = c;
  fill_diagnostics(out);
  return out;
}

void Stepper::fill_diagnostics(SimState& s) const {
  StepDiagnostics& d = s.diag;
  d.fluid_energy = fluid_energy(mesh_, s.v.fluid, s.bundle);
  d.energy = total_energy(mesh_, s);
  d.det_drift = max_det_drift(s.bundle);
  const double vn = norm_xtilde(mesh_, s.v);
  d.qv_ratio = 0;
  if (opt_.monitor_qv && vn > 0) d.qv_ratio = norm_xtilde(mesh_, projector_.complement(s.v, opt_.monitor_tol)) / vn;
  d.pressure_ratio = gradient_l2(mesh_, s.last_q.grad_q) / (1.0 + vn);
  d.grad_v_inf = max_velocity_gradient(mesh_, s.v.fluid);
  d.pressure_residual = s.last_q.residual;
  d.pressure_iters = s.last_q.iterations;
}

SimState Stepper::advance(SimState s, double t_end, double dt,
                          const std::function<void(const SimState&)>& on_commit) const {
  if (!(dt > 0)) throw ValidationError("advance: dt must be positive");
  double h = dt;
  const double eps = 1e-12 * std::max(1.0, std::abs(t_end));
  while (s.t < t_end - eps) {
    const double step = std::min(h, t_end - s.t);
    try {
      s = picard_step(s, step);
    } catch (const StepFailure&) {
      h *= 0.5;
      if (h < dt * opt_.min_dt_fraction) throw;
      continue;
    }
    if (on_commit) on_commit(s);
    h = std::min(dt, 2 * h);
  }
  return s;
}

void fit_log_linear(TwinReport& r) {
  double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    if (!(r.e[i] > 0)) continue;
    const double y = std::log(r.e[i]);
    n += 1;
    st += r.t[i];
    sy += y;
    stt += r.t[i] * r.t[i];
    sty += r.t[i] * y;
  }
  if (n < 2) {
    r.rate = 0;
    r.intercept = n > 0 ? sy / n : 0;
    r.max_log_residual = 0;
    return;
  }
  const double den = n * stt - st * st;
  r.rate = den != 0 ? (n * sty - st * sy) / den : 0;
  r.intercept = (sy - r.rate * st) / n;
  r.max_log_residual = 0;
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    if (!(r.e[i] > 0)) continue;
    r.max_log_residual = std::max(r.max_log_residual, std::abs(std::log(r.e[i]) - (r.intercept + r.rate * r.t[i])));
  }
}

TwinReport twin_run_divergence(const Stepper& stepper, const RigidBodyState<double>& rigid0, const Matrix3Xd& u0,
                               double delta, const Vector3d& dir, double t_end, double dt) {
  if (!(delta >= 0)) throw ValidationError("twin run: perturbation must be non-negative");
  const ShellMesh& mesh = stepper.mesh();
  RigidBodyState<double> rb = rigid0;
  rb.L += delta * dir.normalized();
  SimState a = stepper.initialize(rigid0, u0);
  SimState b = stepper.initialize(rb, u0);
  TwinReport rep;
  auto record = [&]() {
    rep.t.push_back(a.t);
    rep.e.push_back(xt_norm2(mesh, a.v.fluid - b.v.fluid, a.rigid.L - b.rigid.L, a.rigid.R - b.rigid.R));
    rep.pressure_a.push_back(a.diag.pressure_ratio);
    rep.pressure_b.push_back(b.diag.pressure_ratio);
  };
  record();
  const double eps = 1e-12 * std::max(1.0, t_end);
  while (a.t < t_end - eps) {
    const double step = std::min(dt, t_end - a.t);
    a = stepper.picard_step(a, step);
    b = stepper.picard_step(b, step);
    record();
  }
  fit_log_linear(rep);
  return rep;
}

}  // namespace eulerbody
