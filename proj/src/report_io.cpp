#include "dimix/report_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dimix {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw std::runtime_error(where + ": cannot parse number '" + text + "'");
  }
  return v;
}

constexpr const char* kMetricNames[] = {"loss_pooled", "loss_weighted", "deviation_sq",
                                        "dist_opt_sq", "avg_dist_sq"};
constexpr double TraceRecord::*kMetrics[] = {&TraceRecord::loss_pooled, &TraceRecord::loss_weighted,
                                             &TraceRecord::deviation_sq, &TraceRecord::dist_opt_sq,
                                             &TraceRecord::avg_dist_sq};

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_run_csv(std::ostream& os, const RunTrace& trace) {
  os << "t,loss_pooled,loss_weighted,deviation_sq,dist_opt_sq\n";
  for (const auto& r : trace.records) {
    os << r.t << ',' << format_double(r.loss_pooled) << ',' << format_double(r.loss_weighted) << ','
       << format_double(r.deviation_sq) << ',' << format_double(r.dist_opt_sq) << '\n';
  }
}

void write_mean_csv(std::ostream& os, std::span<const AggregateRecord> aggregate) {
  os << 't';
  for (const char* name : kMetricNames) os << ',' << name << "_mean," << name << "_stderr";
  os << '\n';
  for (const auto& a : aggregate) {
    os << a.t;
    for (auto field : kMetrics) {
      os << ',' << format_double(a.mean.*field) << ',' << format_double(a.stderr_.*field);
    }
    os << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::out_of_range("csv: no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> CsvTable::values(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[c]);
  return out;
}

CsvTable read_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("csv: missing header");
  table.header = split(trim(line), ',');
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = "csv line " + std::to_string(lineno);
    if (cells.size() != table.header.size()) throw std::runtime_error(where + ": wrong cell count");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, where));
    table.rows.push_back(std::move(row));
  }
  return table;
}

void Manifest::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

std::optional<std::string> Manifest::get(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  return std::nullopt;
}

double Manifest::number(const std::string& key) const {
  const auto v = get(key);
  if (!v) throw std::runtime_error("manifest: missing '" + key + "'");
  return parse_double(*v, "manifest " + key);
}

std::string Manifest::config_text() const {
  std::string out;
  for (const auto& [k, v] : entries) {
    if (k.rfind("config.", 0) == 0) out += k.substr(7) + " = " + v + "\n";
  }
  return out;
}

void write_manifest(std::ostream& os, const Manifest& m) {
  for (const auto& [k, v] : m.entries) os << k << " = " << v << '\n';
}

Manifest read_manifest(std::istream& is) {
  Manifest m;
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("manifest: malformed line '" + line + "'");
    m.entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return m;
}

std::vector<MixingMatrix> read_matrix_blocks(std::istream& is) {
  std::vector<MixingMatrix> out;
  std::vector<std::vector<double>> rows;
  int lineno = 0;
  int block_start = 0;
  auto flush = [&] {
    if (rows.empty()) return;
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix W(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n) {
        throw std::runtime_error("matrix file: block starting at line " +
                                 std::to_string(block_start) + " is not square");
      }
      for (Eigen::Index j = 0; j < n; ++j) W(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    out.push_back(MixingMatrix{std::move(W)});
    rows.clear();
  };
  std::string line;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (!line.empty() && line[0] == '#') continue;
    if (line.empty()) {
      flush();
      continue;
    }
    if (rows.empty()) block_start = lineno;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) {
      row.push_back(parse_double(cell, "matrix file line " + std::to_string(lineno)));
    }
    rows.push_back(std::move(row));
  }
  flush();
  if (out.empty()) throw std::runtime_error("matrix file: no matrices");
  for (const auto& m : out) {
    if (m.W.rows() != out.front().W.rows()) {
      throw std::runtime_error("matrix file: blocks have different sizes");
    }
  }
  return out;
}

void write_loglog_svg(std::ostream& os, const std::string& title, const std::string& y_label,
                      std::span<const PlotSeries> series) {
  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (s.x[k] > 0 && s.y[k] > 0) {
        x0 = std::min(x0, std::log10(s.x[k]));
        x1 = std::max(x1, std::log10(s.x[k]));
        y0 = std::min(y0, std::log10(s.y[k]));
        y1 = std::max(y1, std::log10(s.y[k]));
      }
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  x0 = std::floor(x0), x1 = std::max(std::ceil(x1), x0 + 1);
  y0 = std::floor(y0), y1 = std::max(std::ceil(y1), y0 + 1);
  auto px = [&](double lx) { return kLeft + (lx - x0) / (x1 - x0) * (kW - kLeft - kRight); };
  auto py = [&](double ly) { return kH - kBottom - (ly - y0) / (y1 - y0) * (kH - kTop - kBottom); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
     << "</text>\n";
  for (double e = x0; e <= x1; e += 1) {
    os << "<line x1=\"" << px(e) << "\" y1=\"" << py(y0) << "\" x2=\"" << px(e) << "\" y2=\""
       << py(y1) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << px(e) << "\" y=\"" << py(y0) + 18 << "\" text-anchor=\"middle\">1e"
       << e << "</text>\n";
  }
  for (double e = y0; e <= y1; e += 1) {
    os << "<line x1=\"" << px(x0) << "\" y1=\"" << py(e) << "\" x2=\"" << px(x1) << "\" y2=\""
       << py(e) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << px(x0) - 6 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\">1e" << e
       << "</text>\n";
  }
  os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">iteration t</text>\n";
  os << "<text x=\"16\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 16 " << kH / 2
     << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kColors[si % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (s.x[k] > 0 && s.y[k] > 0) {
        os << px(std::log10(s.x[k])) << ',' << py(std::log10(s.y[k])) << ' ';
      }
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 16 * (si + 1)
       << "\" text-anchor=\"end\" fill=\"" << color << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace dimix
