#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dimix/algorithm.hpp"
#include "dimix/analysis.hpp"
#include "dimix/config.hpp"
#include "dimix/noise.hpp"
#include "dimix/objective.hpp"
#include "dimix/report_io.hpp"
#include "dimix/topology.hpp"

namespace dimix {

/// Everything a config describes, materialized. The data, the weights and
/// the partition come from the config seed; run k adds k for its noise.
struct Experiment {
  ExperimentConfig config;
  DistributedProblem problem;
  MixingSchedule schedule;
  NoiseModel noise;
  StepSchedule sched;
  std::vector<std::size_t> borrowed;  // shards that needed a stolen sample
};

Experiment build_experiment(const ExperimentConfig& cfg);

WeightVector build_weights(const ExperimentConfig& cfg);
MixingSchedule build_schedule(const ExperimentConfig& cfg, const WeightVector& r);
NoiseModel build_noise(const ExperimentConfig& cfg);

struct DerivedConstants {
  double eta = 0.0;
  int B = 1;
  double lambda = 0.0;
  double kappa = 1.0;
  double mu_f = 0.0;
  double L_f = 0.0;
  double D = 0.0;      // largest state norm seen
  double gamma = 0.0;  // noise second-moment bound at D
  double K = 0.0;      // largest squared local gradient seen
  std::optional<Thresholds> T;
  std::string note;  // why T is missing, if it is
};

DerivedConstants derive_constants(const Experiment& ex, std::span<const RunTrace> traces);

/// Config echo (under `config.`), derived constants, seeds and aborted runs.
Manifest make_manifest(const Experiment& ex, const DerivedConstants& c,
                       const MonteCarloResult& mc);

/// Output directory: explicit > config > $DIMIX_OUT > "dimix_out".
std::string resolve_output_dir(const ExperimentConfig& cfg,
                               const std::optional<std::string>& explicit_dir);

// -- theory -----------------------------------------------------------------

struct TheoryRow {
  double T = 0.0;
  double bound = 0.0;
  std::optional<double> empirical;
};

struct TheoryReport {
  TheoryParams params;
  std::vector<TheoryRow> rows;
  /// Smallest bound / empirical over rows that have both.
  std::optional<double> min_ratio;
  bool dominated = true;
};

/// Integer points log-spaced on [lo, hi], deduplicated, lo and hi included.
std::vector<double> log_grid(double lo, double hi, int points);

/// Evaluates the bound at `T_points` (each must clear the thresholds) and
/// pairs it with `mean_dist[T - 1]` where the curve reaches.
TheoryReport theory_report(const TheoryInputs& in, const StepSchedule& sched,
                           std::span<const double> mean_dist, std::span<const double> T_points);

// -- sweep ------------------------------------------------------------------

struct SweepReport {
  std::vector<Iteration> T;
  std::vector<double> mean;
  std::vector<double> stderr_;
  RateFit fit;
  std::size_t completed = 0;
};

/// Monte Carlo mean of dist_opt_sq at the final iterate for each T in the
/// grid. A trajectory does not depend on its horizon, so one batch of runs
/// to max(T) supplies every grid point.
SweepReport sweep_experiment(const Experiment& ex, std::span<const Iteration> grid, unsigned jobs);

// -- commands ---------------------------------------------------------------

struct CliOptions {
  bool plots = false;
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> assume_q0;
};

/// Each command prints its report to `out` and returns the process exit code.
int cmd_run(ExperimentConfig cfg, const CliOptions& opt, std::ostream& out);
int cmd_validate(ExperimentConfig cfg, const CliOptions& opt, std::ostream& out);
int cmd_theory(ExperimentConfig cfg, const CliOptions& opt, std::ostream& out);
int cmd_lemmas(const CliOptions& opt, std::ostream& out);
int cmd_sweep(ExperimentConfig cfg, const CliOptions& opt, std::ostream& out);

}  // namespace dimix
