#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dimix/types.hpp"

namespace dimix {

enum class TopologyKind { kFixedCycle, kGossip, kMatrixFile };
enum class NoiseKind { kNone, kGaussian, kQuantizer };
enum class WeightsKind { kRandom, kUniform, kList };

/// Flat experiment description, one `key = value` per line. Dotted keys
/// group related settings (`step.mu`, `noise.levels`, ...). `#` starts a
/// comment.
struct ExperimentConfig {
  int n = 20;
  int d = 25;
  int N = 100;

  TopologyKind topology = TopologyKind::kFixedCycle;
  std::string matrix_file;  // topology.path
  int window = 0;           // topology.window; 0 keeps the family default

  NoiseKind noise = NoiseKind::kQuantizer;
  double sigma = 0.1;  // noise.sigma
  int levels = 4;      // noise.levels

  WeightsKind weights = WeightsKind::kRandom;
  std::vector<double> weight_values;  // weights.values, normalized on use

  double alpha0 = 0.1;
  double nu = 0.25;
  double beta0 = 0.7;
  double mu = 0.75;

  Iteration T = 5000;
  std::uint64_t seed = 1;
  int num_runs = 20;
  std::string output_dir;  // empty: $DIMIX_OUT, then "dimix_out"

  double noise_width = 0.1;          // problem.noise_width
  std::string problem_file;          // problem.file; empty = synthesize
  std::vector<Iteration> T_grid{500, 1000, 2000, 4000, 5000};  // sweep.T_grid
  Iteration validate_horizon = 200;  // validate.horizon
};

/// Collects every invalid field before throwing; what() lists them one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Parses and validates. Unknown keys, duplicate keys and malformed values
/// are errors.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

/// Named-field checks of the value ranges; empty when the config is valid.
std::vector<std::string> config_problems(const ExperimentConfig& cfg);

/// Writes the config back in the same format; parse_config reads it back to
/// an equal config.
void write_config(std::ostream& os, const ExperimentConfig& cfg);

std::string to_string(TopologyKind k);
std::string to_string(NoiseKind k);
std::string to_string(WeightsKind k);

}  // namespace dimix
