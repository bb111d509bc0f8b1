#include "dimix/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dimix {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) items.push_back(trim(item));
  return items;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : "\n") + s;
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, ptr);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid config:\n" + join(problems)), problems_(std::move(problems)) {}

std::string to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::kFixedCycle: return "fixed_cycle";
    case TopologyKind::kGossip: return "gossip";
    case TopologyKind::kMatrixFile: return "matrix_file";
  }
  return "?";
}

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kGaussian: return "gaussian";
    case NoiseKind::kQuantizer: return "quantizer";
  }
  return "?";
}

std::string to_string(WeightsKind k) {
  switch (k) {
    case WeightsKind::kRandom: return "random";
    case WeightsKind::kUniform: return "uniform";
    case WeightsKind::kList: return "list";
  }
  return "?";
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::vector<std::string> problems;

  using Setter = std::function<bool(const std::string&)>;
  auto integer = [](auto& field) {
    return Setter([&field](const std::string& v) { return parse_number(v, field); });
  };
  auto real = [](double& field) {
    return Setter([&field](const std::string& v) { return parse_number(v, field); });
  };
  auto text = [](std::string& field) {
    return Setter([&field](const std::string& v) {
      field = v;
      return !v.empty();
    });
  };
  const std::map<std::string, Setter> setters = {
      {"n", integer(cfg.n)},
      {"d", integer(cfg.d)},
      {"N", integer(cfg.N)},
      {"topology", [&](const std::string& v) {
         if (v == "fixed_cycle") cfg.topology = TopologyKind::kFixedCycle;
         else if (v == "gossip") cfg.topology = TopologyKind::kGossip;
         else if (v == "matrix_file") cfg.topology = TopologyKind::kMatrixFile;
         else return false;
         return true;
       }},
      {"topology.path", text(cfg.matrix_file)},
      {"topology.window", integer(cfg.window)},
      {"noise", [&](const std::string& v) {
         if (v == "none") cfg.noise = NoiseKind::kNone;
         else if (v == "gaussian") cfg.noise = NoiseKind::kGaussian;
         else if (v == "quantizer") cfg.noise = NoiseKind::kQuantizer;
         else return false;
         return true;
       }},
      {"noise.sigma", real(cfg.sigma)},
      {"noise.levels", integer(cfg.levels)},
      {"weights", [&](const std::string& v) {
         if (v == "random") cfg.weights = WeightsKind::kRandom;
         else if (v == "uniform") cfg.weights = WeightsKind::kUniform;
         else if (v == "list") cfg.weights = WeightsKind::kList;
         else return false;
         return true;
       }},
      {"weights.values", [&](const std::string& v) {
         cfg.weight_values.clear();
         for (const auto& item : split_list(v)) {
           double x;
           if (!parse_number(item, x)) return false;
           cfg.weight_values.push_back(x);
         }
         return true;
       }},
      {"step.alpha0", real(cfg.alpha0)},
      {"step.nu", real(cfg.nu)},
      {"step.beta0", real(cfg.beta0)},
      {"step.mu", real(cfg.mu)},
      {"T", integer(cfg.T)},
      {"seed", integer(cfg.seed)},
      {"num_runs", integer(cfg.num_runs)},
      {"output_dir", text(cfg.output_dir)},
      {"problem.noise_width", real(cfg.noise_width)},
      {"problem.file", text(cfg.problem_file)},
      {"sweep.T_grid", [&](const std::string& v) {
         cfg.T_grid.clear();
         for (const auto& item : split_list(v)) {
           Iteration x;
           if (!parse_number(item, x)) return false;
           cfg.T_grid.push_back(x);
         }
         return true;
       }},
      {"validate.horizon", integer(cfg.validate_horizon)},
  };

  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) {
      problems.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      problems.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (seen[key]++ > 0) {
      problems.push_back(where + key + ": duplicate key");
      continue;
    }
    if (!it->second(value)) problems.push_back(where + key + ": cannot parse '" + value + "'");
  }
  for (auto& p : config_problems(cfg)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::vector<std::string> config_problems(const ExperimentConfig& cfg) {
  std::vector<std::string> p;
  if (cfg.n < 1) p.push_back("n: must be >= 1");
  if (cfg.topology != TopologyKind::kMatrixFile && cfg.n < 3) {
    p.push_back("n: fixed_cycle and gossip need n >= 3");
  }
  if (cfg.d < 1) p.push_back("d: must be >= 1");
  if (cfg.N < 1) p.push_back("N: must be >= 1");
  if (cfg.N < cfg.n) p.push_back("N: must be >= n (every agent needs a sample)");
  if (cfg.topology == TopologyKind::kMatrixFile && cfg.matrix_file.empty()) {
    p.push_back("topology.path: required for topology = matrix_file");
  }
  if (cfg.window < 0) p.push_back("topology.window: must be >= 0");
  if (cfg.noise == NoiseKind::kGaussian && !(cfg.sigma >= 0.0)) {
    p.push_back("noise.sigma: must be >= 0");
  }
  if (cfg.noise == NoiseKind::kQuantizer && cfg.levels < 1) p.push_back("noise.levels: must be >= 1");
  if (cfg.weights == WeightsKind::kList) {
    if (static_cast<int>(cfg.weight_values.size()) != cfg.n) {
      p.push_back("weights.values: expected n = " + std::to_string(cfg.n) + " entries");
    }
    for (std::size_t i = 0; i < cfg.weight_values.size(); ++i) {
      if (!(cfg.weight_values[i] > 0.0)) {
        p.push_back("weights.values: entry " + std::to_string(i) + " must be positive");
      }
    }
  }
  if (!(cfg.alpha0 > 0.0)) p.push_back("step.alpha0: must be > 0");
  if (!(cfg.nu > 0.0 && cfg.nu < 1.0)) p.push_back("step.nu: must lie in (0,1)");
  if (!(cfg.beta0 > 0.0 && cfg.beta0 <= 1.0)) p.push_back("step.beta0: must lie in (0,1]");
  if (!(cfg.mu > 0.0 && cfg.mu < 1.0)) p.push_back("step.mu: must lie in (0,1)");
  if (cfg.T < 1) p.push_back("T: must be >= 1");
  if (cfg.num_runs < 1) p.push_back("num_runs: must be >= 1");
  if (!(cfg.noise_width >= 0.0)) p.push_back("problem.noise_width: must be >= 0");
  for (std::size_t i = 0; i < cfg.T_grid.size(); ++i) {
    if (cfg.T_grid[i] < 2) p.push_back("sweep.T_grid: entries must be >= 2");
    if (i > 0 && cfg.T_grid[i] <= cfg.T_grid[i - 1]) {
      p.push_back("sweep.T_grid: must be strictly increasing");
    }
  }
  if (cfg.validate_horizon < 1) p.push_back("validate.horizon: must be >= 1");
  return p;
}

void write_config(std::ostream& os, const ExperimentConfig& cfg) {
  os << "n = " << cfg.n << '\n' << "d = " << cfg.d << '\n' << "N = " << cfg.N << '\n';
  os << "topology = " << to_string(cfg.topology) << '\n';
  if (!cfg.matrix_file.empty()) os << "topology.path = " << cfg.matrix_file << '\n';
  os << "topology.window = " << cfg.window << '\n';
  os << "noise = " << to_string(cfg.noise) << '\n';
  os << "noise.sigma = " << fmt_double(cfg.sigma) << '\n';
  os << "noise.levels = " << cfg.levels << '\n';
  os << "weights = " << to_string(cfg.weights) << '\n';
  if (!cfg.weight_values.empty()) {
    os << "weights.values = ";
    for (std::size_t i = 0; i < cfg.weight_values.size(); ++i) {
      os << (i ? ", " : "") << fmt_double(cfg.weight_values[i]);
    }
    os << '\n';
  }
  os << "step.alpha0 = " << fmt_double(cfg.alpha0) << '\n';
  os << "step.nu = " << fmt_double(cfg.nu) << '\n';
  os << "step.beta0 = " << fmt_double(cfg.beta0) << '\n';
  os << "step.mu = " << fmt_double(cfg.mu) << '\n';
  os << "T = " << cfg.T << '\n' << "seed = " << cfg.seed << '\n';
  os << "num_runs = " << cfg.num_runs << '\n';
  if (!cfg.output_dir.empty()) os << "output_dir = " << cfg.output_dir << '\n';
  os << "problem.noise_width = " << fmt_double(cfg.noise_width) << '\n';
  if (!cfg.problem_file.empty()) os << "problem.file = " << cfg.problem_file << '\n';
  os << "sweep.T_grid = ";
  for (std::size_t i = 0; i < cfg.T_grid.size(); ++i) os << (i ? ", " : "") << cfg.T_grid[i];
  os << '\n';
  os << "validate.horizon = " << cfg.validate_horizon << '\n';
}

}  // namespace dimix
