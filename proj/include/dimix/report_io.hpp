#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dimix/algorithm.hpp"
#include "dimix/topology.hpp"

namespace dimix {

/// Shortest decimal form that round-trips to the same double (at most 17
/// significant digits).
std::string format_double(double v);

/// `t,loss_pooled,loss_weighted,deviation_sq,dist_opt_sq`, one row per t.
void write_run_csv(std::ostream& os, const RunTrace& trace);

/// Per-t mean and stderr of the four run metrics plus avg_dist_sq.
void write_mean_csv(std::ostream& os, std::span<const AggregateRecord> aggregate);

/// Numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws std::out_of_range when missing.
  std::size_t column(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;
};

CsvTable read_csv(std::istream& is);

/// Ordered `key = value` lines. Keys under `config.` echo the experiment
/// config verbatim.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  std::optional<std::string> get(const std::string& key) const;
  /// Numeric value; throws std::runtime_error when missing or malformed.
  double number(const std::string& key) const;

  /// The `config.*` entries with the prefix stripped, in config syntax.
  std::string config_text() const;
};

void write_manifest(std::ostream& os, const Manifest& m);
Manifest read_manifest(std::istream& is);

/// Matrix file: rows are comma-separated lines, matrices are separated by
/// blank lines, `#` lines are comments. Throws std::runtime_error naming the
/// line on ragged or non-square blocks.
std::vector<MixingMatrix> read_matrix_blocks(std::istream& is);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal log-log line chart. Non-positive points are dropped.
void write_loglog_svg(std::ostream& os, const std::string& title, const std::string& y_label,
                      std::span<const PlotSeries> series);

}  // namespace dimix
