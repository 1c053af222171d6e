#include "eulerbody/timeseries.hpp"

#include <charconv>
#include <sstream>

#include "eulerbody/errors.hpp"

namespace eulerbody {

const std::vector<std::string>& timeseries_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c{"t"};
    for (const char* v : {"h", "L", "R", "l", "omega"})
      for (const char* ax : {"x", "y", "z"}) c.push_back(std::string(v) + "_" + ax);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) c.push_back("Q_" + std::to_string(i) + std::to_string(j));
    for (const char* n : {"E_total", "E_fluid", "det_drift", "qv_ratio", "gradq_ratio", "gradv_inf", "picard_iters",
                          "pressure_residual"})
      c.push_back(n);
    return c;
  }();
  return cols;
}

std::vector<double> timeseries_row(const SimState& s) {
  std::vector<double> r;
  r.reserve(timeseries_columns().size());
  r.push_back(s.t);
  const auto& b = s.rigid;
  for (const Eigen::Vector3d* v : {&b.h, &b.L, &b.R, &b.l, &b.omega})
    for (int a = 0; a < 3; ++a) r.push_back((*v)(a));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.push_back(b.Q(i, j));
  const StepDiagnostics& d = s.diag;
  for (double v : {d.energy, d.fluid_energy, d.det_drift, d.qv_ratio, d.pressure_ratio, d.grad_v_inf,
                   static_cast<double>(d.picard_iters), d.pressure_residual})
    r.push_back(v);
  return r;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string join_row(const std::vector<double>& row) {
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) line += ',';
    line += format_double(row[i]);
  }
  return line;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!s.empty() && s.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

TimeseriesWriter::TimeseriesWriter(const std::string& path) : out_(path), path_(path) {
  if (!out_) throw ValidationError("cannot open '" + path + "' for writing");
  out_ << "# schema: " << kTimeseriesSchema << '\n';
  const auto& c = timeseries_columns();
  for (std::size_t i = 0; i < c.size(); ++i) out_ << (i ? "," : "") << c[i];
  out_ << '\n';
  out_.flush();
}

void TimeseriesWriter::write(const SimState& s) { write_row(timeseries_row(s)); }

void TimeseriesWriter::write_row(const std::vector<double>& row) {
  if (row.size() != timeseries_columns().size()) throw ValidationError("timeseries row has the wrong width");
  out_ << join_row(row) << '\n';
  out_.flush();
  if (!out_) throw ValidationError("write to '" + path_ + "' failed");
  ++rows_;
}

TimeseriesTable read_timeseries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  TimeseriesTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("# schema: ", 0) == 0) {
      t.schema = line.substr(10);
      continue;
    }
    if (line.empty()) continue;
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    const auto fields = split(line);
    if (fields.size() != t.columns.size()) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                            " fields");
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto& f = fields[i];
      const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), row[i]);
      if (ec != std::errc() || p != f.data() + f.size()) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": bad number '" + f + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string emit_timeseries(const TimeseriesTable& t) {
  std::string s = "# schema: " + t.schema + "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) s += (i ? "," : "") + t.columns[i];
  s += '\n';
  for (const auto& r : t.rows) s += join_row(r) + '\n';
  return s;
}

}  // namespace eulerbody
