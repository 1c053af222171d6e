#include "eulerbody/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "eulerbody/errors.hpp"

namespace eulerbody {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw std::invalid_argument("expected a number, got '" + t + "'");
  return v;
}

int parse_int(const std::string& s) {
  const std::string t = trim(s);
  int v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw std::invalid_argument("expected an integer, got '" + t + "'");
  return v;
}

Eigen::Vector3d parse_vec3(const std::string& s) {
  std::string t = s;
  for (char& c : t) {
    if (c == ',' || c == '(' || c == ')' || c == '[' || c == ']') c = ' ';
  }
  std::istringstream is(t);
  std::string a, b, c, extra;
  if (!(is >> a >> b >> c) || (is >> extra)) throw std::invalid_argument("expected three numbers, got '" + trim(s) + "'");
  return {parse_double(a), parse_double(b), parse_double(c)};
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(const Eigen::Vector3d& v) { return fmt(v(0)) + ", " + fmt(v(1)) + ", " + fmt(v(2)); }

using Setter = std::function<void(SimConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = {
      {"body.shape", [](SimConfig& c, const std::string& v) { c.body_shape = trim(v); }},
      {"body.semi_axes", [](SimConfig& c, const std::string& v) { c.semi_axes = parse_vec3(v); }},
      {"body.radius", [](SimConfig& c, const std::string& v) { c.semi_axes.setConstant(parse_double(v)); }},
      {"body.rho_body", [](SimConfig& c, const std::string& v) { c.rho_body = parse_double(v); }},
      {"fluid.rho", [](SimConfig& c, const std::string& v) { c.fluid_rho = parse_double(v); }},
      {"mesh.n_r", [](SimConfig& c, const std::string& v) { c.mesh.n_r = parse_int(v); }},
      {"mesh.n_theta", [](SimConfig& c, const std::string& v) { c.mesh.n_theta = parse_int(v); }},
      {"mesh.n_phi", [](SimConfig& c, const std::string& v) { c.mesh.n_phi = parse_int(v); }},
      {"mesh.R_out", [](SimConfig& c, const std::string& v) { c.mesh.R_out = parse_double(v); }},
      {"mesh.stretch", [](SimConfig& c, const std::string& v) { c.mesh.stretch = parse_double(v); }},
      {"cutoff.r1", [](SimConfig& c, const std::string& v) { c.r1 = parse_double(v); }},
      {"cutoff.r2", [](SimConfig& c, const std::string& v) { c.r2 = parse_double(v); }},
      {"time.dt", [](SimConfig& c, const std::string& v) { c.dt = parse_double(v); }},
      {"time.t_end", [](SimConfig& c, const std::string& v) { c.t_end = parse_double(v); }},
      {"time.picard_tol", [](SimConfig& c, const std::string& v) { c.picard_tol = parse_double(v); }},
      {"time.picard_max_iter", [](SimConfig& c, const std::string& v) { c.picard_max_iter = parse_int(v); }},
      {"time.cfl_max", [](SimConfig& c, const std::string& v) { c.cfl_max = parse_double(v); }},
      {"time.filter", [](SimConfig& c, const std::string& v) { c.filter = parse_double(v); }},
      {"time.pressure_tol", [](SimConfig& c, const std::string& v) { c.pressure_tol = parse_double(v); }},
      {"init.L0", [](SimConfig& c, const std::string& v) { c.L0 = parse_vec3(v); }},
      {"init.R0", [](SimConfig& c, const std::string& v) { c.R0 = parse_vec3(v); }},
      {"init.flow", [](SimConfig& c, const std::string& v) { c.flow = trim(v); }},
      {"output.path", [](SimConfig& c, const std::string& v) { c.output_path = trim(v); }},
      {"output.cadence", [](SimConfig& c, const std::string& v) { c.cadence = parse_int(v); }},
  };
  return m;
}

void require(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ValidationError(key + ": " + msg);
}

}  // namespace

CutoffProfile<double> SimConfig::profile() const {
  CutoffProfile<double> p;
  p.r1 = r1;
  p.r2 = r2;
  return p;
}

StepperOptions SimConfig::stepper_options() const {
  StepperOptions o;
  o.picard_tol = picard_tol;
  o.picard_max_iter = picard_max_iter;
  o.cfl_max = cfl_max;
  o.filter = filter;
  return o;
}

SimConfig parse_config(const std::string& text, const std::string& source) {
  SimConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto where = [&]() { return source + ":" + std::to_string(lineno) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where() + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where() + "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    const std::string value = line.substr(eq + 1);
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    const auto it = setters().find(key);
    if (it == setters().end()) throw ValidationError(where() + "unknown key '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(where() + key + ": " + e.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void validate_config(const SimConfig& c) {
  require(c.body_shape == "sphere" || c.body_shape == "ellipsoid", "body.shape", "must be sphere or ellipsoid");
  require((c.semi_axes.array() > 0).all() && c.semi_axes.allFinite(), "body.semi_axes", "must be positive");
  if (c.body_shape == "sphere") {
    require(c.semi_axes(0) == c.semi_axes(1) && c.semi_axes(1) == c.semi_axes(2), "body.semi_axes",
            "a sphere needs three equal semi-axes");
  }
  require(c.semi_axes.maxCoeff() <= 20 * c.semi_axes.minCoeff(), "body.semi_axes", "axis ratio above 20");
  require(c.rho_body > 0 && std::isfinite(c.rho_body), "body.rho_body", "must be positive");
  require(c.fluid_rho == 1.0, "fluid.rho", "fluid density is fixed at 1");
  require(c.mesh.n_r >= 8, "mesh.n_r", "must be at least 8");
  require(c.mesh.n_theta >= 8, "mesh.n_theta", "must be at least 8");
  require(c.mesh.n_phi >= 8, "mesh.n_phi", "must be at least 8");
  require(c.mesh.n_phi % 2 == 0, "mesh.n_phi", "must be even");
  require(c.mesh.stretch >= 0 && c.mesh.stretch <= 10, "mesh.stretch", "must lie in [0, 10]");
  require(c.r1 > c.semi_axes.maxCoeff(), "cutoff.r1", "must exceed the largest semi-axis");
  require(c.r2 > c.r1, "cutoff.r2", "must exceed cutoff.r1");
  require(c.mesh.R_out > c.r2, "cutoff.r2", "must be smaller than mesh.R_out");
  require(c.dt > 0 && std::isfinite(c.dt), "time.dt", "must be positive");
  require(c.t_end >= 0 && std::isfinite(c.t_end), "time.t_end", "must be non-negative");
  require(c.picard_tol > 0, "time.picard_tol", "must be positive");
  require(c.picard_max_iter >= 1, "time.picard_max_iter", "must be at least 1");
  require(c.cfl_max > 0, "time.cfl_max", "must be positive");
  require(c.filter >= 0 && c.filter <= 1, "time.filter", "must lie in [0, 1]");
  require(c.pressure_tol > 0 && c.pressure_tol < 1, "time.pressure_tol", "must lie in (0, 1)");
  require(c.L0.allFinite(), "init.L0", "must be finite");
  require(c.R0.allFinite(), "init.R0", "must be finite");
  require(c.flow == "rest" || c.flow == "potential_uniform", "init.flow", "must be rest or potential_uniform");
  require(c.flow != "potential_uniform" || c.body_shape == "sphere", "init.flow",
          "potential_uniform needs a spherical body");
  require(!c.output_path.empty(), "output.path", "must not be empty");
  require(c.cadence >= 1, "output.cadence", "must be at least 1");
}

std::string echo_config(const SimConfig& c) {
  std::ostringstream os;
  os << "[body]\nshape = " << c.body_shape << "\nsemi_axes = " << fmt(c.semi_axes) << "\nrho_body = " << fmt(c.rho_body)
     << "\n\n[fluid]\nrho = " << fmt(c.fluid_rho) << "\n\n[mesh]\nn_r = " << c.mesh.n_r << "\nn_theta = " << c.mesh.n_theta
     << "\nn_phi = " << c.mesh.n_phi << "\nR_out = " << fmt(c.mesh.R_out) << "\nstretch = " << fmt(c.mesh.stretch)
     << "\n\n[cutoff]\nr1 = " << fmt(c.r1) << "\nr2 = " << fmt(c.r2) << "\n\n[time]\ndt = " << fmt(c.dt)
     << "\nt_end = " << fmt(c.t_end) << "\npicard_tol = " << fmt(c.picard_tol)
     << "\npicard_max_iter = " << c.picard_max_iter << "\ncfl_max = " << fmt(c.cfl_max) << "\nfilter = " << fmt(c.filter)
     << "\npressure_tol = " << fmt(c.pressure_tol) << "\n\n[init]\nL0 = " << fmt(c.L0) << "\nR0 = " << fmt(c.R0)
     << "\nflow = " << c.flow << "\n\n[output]\npath = " << c.output_path << "\ncadence = " << c.cadence << "\n";
  return os.str();
}

}  // namespace eulerbody
