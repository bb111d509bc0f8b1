#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dimix/noise.hpp"
#include "dimix/objective.hpp"
#include "dimix/topology.hpp"
#include "dimix/types.hpp"

namespace dimix {

/// alpha(t) = alpha0 / t^nu, beta(t) = beta0 / t^mu.
class StepSchedule {
 public:
  /// Throws std::invalid_argument unless alpha0 > 0, nu in (0,1),
  /// beta0 in (0,1] and mu in (0,1).
  StepSchedule(double alpha0, double nu, double beta0, double mu);

  double alpha(Iteration t) const;
  double beta(Iteration t) const;

  double alpha0() const { return alpha0_; }
  double nu() const { return nu_; }
  double beta0() const { return beta0_; }
  double mu() const { return mu_; }

 private:
  double alpha0_, nu_, beta0_, mu_;
};

struct RunState {
  Iteration t = 1;
  Matrix X;  // n x d, row i is agent i

  static RunState initial(std::size_t n, Eigen::Index d) {
    return {1, Matrix::Zero(static_cast<Eigen::Index>(n), d)};
  }
};

/// Thrown when an update produces a non-finite entry or one above kDivergenceLimit.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDivergenceLimit = 1e12;

/// Per-(agent, iteration) noise streams of one run.
class NoiseStreams {
 public:
  explicit NoiseStreams(std::uint64_t run_seed) : seed_(run_seed) {}
  Rng for_agent(std::size_t agent, Iteration t) const {
    return make_stream(seed_, Stream::kNoise,
                       {static_cast<std::uint64_t>(agent), static_cast<std::uint64_t>(t)});
  }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// One synchronous round, agent by agent:
///   x_i(t+1) = (1 - beta) x_i + beta x_hat_i - alpha beta grad f_i(x_i).
/// Every agent reads X(t). When `realized_noise` is given it receives
/// E(t) = X_hat - W X(t).
RunState step(const RunState& state, const MixingMatrix& W, const NoiseModel& noise,
              std::span<const LocalObjective> locals, const StepSchedule& sched,
              const NoiseStreams& streams, Matrix* realized_noise = nullptr);

/// The same round in stacked form:
///   X(t+1) = ((1 - beta) I + beta W) X + beta E - alpha beta grad F(X).
RunState step_matrix(const RunState& state, const MixingMatrix& W, const Matrix& E,
                     std::span<const LocalObjective> locals, const StepSchedule& sched);

/// grad F(X): row i is grad f_i(x_i).
Matrix stacked_gradient(std::span<const LocalObjective> locals, const Matrix& X);

struct TraceRecord {
  Iteration t = 0;
  double loss_pooled = 0.0;     // pooled least-squares loss at the weighted average
  double loss_weighted = 0.0;   // sum_i r_i f_i(x_i)
  double deviation_sq = 0.0;    // ||X - 1 x_bar||_r^2
  double dist_opt_sq = 0.0;     // ||X - 1 x*||_r^2
  double avg_dist_sq = 0.0;     // ||x_bar - x*||^2
  double grad_sq_max = 0.0;     // max_i ||grad f_i(x_i)||^2
  double state_norm_max = 0.0;  // max_i ||x_i||
};

struct RunTrace {
  std::uint64_t seed = 0;
  std::vector<TraceRecord> records;  // one per t in [1, T] (fewer if aborted)
  std::vector<std::pair<Iteration, Matrix>> checkpoints;
  bool aborted = false;
  std::string diagnostic;

  Iteration length() const { return static_cast<Iteration>(records.size()); }
  const TraceRecord& at(Iteration t) const { return records.at(static_cast<std::size_t>(t - 1)); }
};

/// Empirical K: max over the trace of max_i ||grad f_i(x_i(t))||^2.
double gradient_bound_estimate(const RunTrace& trace);

/// Largest agent-state norm seen along the trace.
double state_norm_bound(const RunTrace& trace);

struct RunOptions {
  /// Iterations at which the full state is kept.
  std::vector<Iteration> checkpoints;
  /// Start from this state instead of X(1) = 0.
  std::optional<Matrix> initial_state;
};

/// Algorithm 1: X(1) = 0, then T - 1 synchronous rounds. Records metrics for
/// every t in [1, T]. Divergence stops the run and flags the partial trace.
RunTrace run(const MixingSchedule& schedule, const NoiseModel& noise,
             const DistributedProblem& problem, const StepSchedule& sched, Iteration T,
             std::uint64_t seed, const RunOptions& options = {});

/// Metrics of one state, as recorded in a trace.
TraceRecord measure(const DistributedProblem& problem, const Matrix& X, Iteration t);

/// Per-t mean and standard error of each recorded metric over completed runs.
struct AggregateRecord {
  Iteration t = 0;
  TraceRecord mean;
  TraceRecord stderr_;
};

struct MonteCarloResult {
  std::vector<RunTrace> traces;
  std::vector<AggregateRecord> aggregate;
  std::size_t completed = 0;
  std::vector<std::uint64_t> aborted_seeds;
};

struct MonteCarloSetup {
  const MixingSchedule* schedule;
  NoiseModel noise;
  const DistributedProblem* problem;
  StepSchedule sched;
  Iteration T;
};

/// Runs seeds base_seed + k for k < num_runs on up to `jobs` threads and
/// aggregates the completed ones (stderr = sample sd / sqrt(runs)).
MonteCarloResult monte_carlo(const MonteCarloSetup& setup, std::size_t num_runs,
                             std::uint64_t base_seed, unsigned jobs = 1);

/// Aggregation step alone, over the given traces.
std::vector<AggregateRecord> aggregate_traces(std::span<const RunTrace> traces);

}  // namespace dimix
