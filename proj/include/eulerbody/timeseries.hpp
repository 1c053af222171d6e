#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "eulerbody/time_stepper.hpp"

namespace eulerbody {

inline constexpr const char* kTimeseriesSchema = "eulerbody-timeseries/1";

/// Column names in output order.
const std::vector<std::string>& timeseries_columns();

/// One output row for a committed state.
std::vector<double> timeseries_row(const SimState& s);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

struct TimeseriesTable {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// CSV writer: a `# schema` line, a header row, then one row per call to write().
class TimeseriesWriter {
 public:
  explicit TimeseriesWriter(const std::string& path);
  void write(const SimState& s);
  void write_row(const std::vector<double>& row);
  int rows_written() const { return rows_; }

 private:
  std::ofstream out_;
  std::string path_;
  int rows_{0};
};

TimeseriesTable read_timeseries(const std::string& path);
std::string emit_timeseries(const TimeseriesTable& t);

}  // namespace eulerbody
