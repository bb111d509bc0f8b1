#include "dimix/algorithm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "dimix/analysis.hpp"

namespace dimix {
namespace {

void check_finite(const Matrix& X, Iteration t) {
  for (Eigen::Index k = 0; k < X.size(); ++k) {
    const double v = X.data()[k];
    if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit) {
      throw DivergenceError("state diverged at t = " + std::to_string(t) + " (entry " +
                            std::to_string(v) + ")");
    }
  }
}

void check_shapes(const RunState& state, const MixingMatrix& W,
                  std::span<const LocalObjective> locals) {
  const Eigen::Index n = state.X.rows();
  if (W.W.rows() != n || W.W.cols() != n) {
    throw std::invalid_argument("step: mixing matrix does not match the agent count");
  }
  if (static_cast<Eigen::Index>(locals.size()) != n) {
    throw std::invalid_argument("step: objective count does not match the agent count");
  }
}

}  // namespace

StepSchedule::StepSchedule(double alpha0, double nu, double beta0, double mu)
    : alpha0_(alpha0), nu_(nu), beta0_(beta0), mu_(mu) {
  if (!(alpha0 > 0.0)) throw std::invalid_argument("step schedule: alpha0 must be positive");
  if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("step schedule: nu must lie in (0,1)");
  if (!(beta0 > 0.0 && beta0 <= 1.0)) {
    throw std::invalid_argument("step schedule: beta0 must lie in (0,1]");
  }
  if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("step schedule: mu must lie in (0,1)");
}

double StepSchedule::alpha(Iteration t) const {
  return alpha0_ / std::pow(static_cast<double>(t), nu_);
}

double StepSchedule::beta(Iteration t) const {
  return beta0_ / std::pow(static_cast<double>(t), mu_);
}

Matrix stacked_gradient(std::span<const LocalObjective> locals, const Matrix& X) {
  Matrix G(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    G.row(i) = locals[static_cast<std::size_t>(i)].gradient(X.row(i).transpose()).transpose();
  }
  return G;
}

RunState step(const RunState& state, const MixingMatrix& W, const NoiseModel& noise,
              std::span<const LocalObjective> locals, const StepSchedule& sched,
              const NoiseStreams& streams, Matrix* realized_noise) {
  check_shapes(state, W, locals);
  const Eigen::Index n = state.X.rows();
  const double alpha = sched.alpha(state.t);
  const double beta = sched.beta(state.t);

  RunState next{state.t + 1, Matrix(n, state.X.cols())};
  if (realized_noise) realized_noise->resize(n, state.X.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    Rng rng = streams.for_agent(static_cast<std::size_t>(i), state.t);
    const RowVector w = W.W.row(i);
    const Vector x_hat = neighbor_estimate(noise, w, state.X, rng);
    const Vector x_i = state.X.row(i).transpose();
    const Vector g = locals[static_cast<std::size_t>(i)].gradient(x_i);
    next.X.row(i) = ((1.0 - beta) * x_i + beta * x_hat - alpha * beta * g).transpose();
    if (realized_noise) realized_noise->row(i) = x_hat.transpose() - w * state.X;
  }
  check_finite(next.X, next.t);
  return next;
}

RunState step_matrix(const RunState& state, const MixingMatrix& W, const Matrix& E,
                     std::span<const LocalObjective> locals, const StepSchedule& sched) {
  check_shapes(state, W, locals);
  if (E.rows() != state.X.rows() || E.cols() != state.X.cols()) {
    throw std::invalid_argument("step_matrix: noise matrix has the wrong shape");
  }
  const Eigen::Index n = state.X.rows();
  const double alpha = sched.alpha(state.t);
  const double beta = sched.beta(state.t);
  const Matrix A = (1.0 - beta) * Matrix::Identity(n, n) + beta * W.W;
  RunState next{state.t + 1, A * state.X + beta * E - alpha * beta * stacked_gradient(locals, state.X)};
  check_finite(next.X, next.t);
  return next;
}

TraceRecord measure(const DistributedProblem& problem, const Matrix& X, Iteration t) {
  TraceRecord rec;
  rec.t = t;
  const Vector& r = problem.r.values();
  const Vector x_bar = (r.transpose() * X).transpose();
  rec.loss_pooled = problem.pooled ? problem.pooled->pooled_loss(x_bar)
                                   : weighted_loss(problem.locals, problem.r,
                                                   x_bar.transpose().replicate(X.rows(), 1));
  rec.loss_weighted = weighted_loss(problem.locals, problem.r, X);
  rec.deviation_sq = deviation_sq(X, problem.r);
  rec.dist_opt_sq = dist_opt_sq(X, problem.r, problem.x_star);
  rec.avg_dist_sq = (x_bar - problem.x_star).squaredNorm();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Vector x_i = X.row(i).transpose();
    rec.grad_sq_max = std::max(rec.grad_sq_max,
                               problem.locals[static_cast<std::size_t>(i)].gradient(x_i).squaredNorm());
    rec.state_norm_max = std::max(rec.state_norm_max, x_i.norm());
  }
  return rec;
}

RunTrace run(const MixingSchedule& schedule, const NoiseModel& noise,
             const DistributedProblem& problem, const StepSchedule& sched, Iteration T,
             std::uint64_t seed, const RunOptions& options) {
  if (T < 1) throw std::invalid_argument("run: T must be >= 1");
  if (schedule.size() != problem.agents()) {
    throw std::invalid_argument("run: schedule and problem disagree on the agent count");
  }
  RunTrace trace;
  trace.seed = seed;
  trace.records.reserve(static_cast<std::size_t>(T));
  const NoiseStreams streams(seed);

  RunState state = RunState::initial(problem.agents(), problem.dim());
  if (options.initial_state) {
    if (options.initial_state->rows() != state.X.rows() ||
        options.initial_state->cols() != state.X.cols()) {
      throw std::invalid_argument("run: initial state has the wrong shape");
    }
    state.X = *options.initial_state;
  }
  auto keep = [&](const RunState& s) {
    trace.records.push_back(measure(problem, s.X, s.t));
    if (std::find(options.checkpoints.begin(), options.checkpoints.end(), s.t) !=
        options.checkpoints.end()) {
      trace.checkpoints.emplace_back(s.t, s.X);
    }
  };
  keep(state);
  try {
    while (state.t < T) {
      state = step(state, schedule.at(state.t), noise, problem.locals, sched, streams);
      keep(state);
    }
  } catch (const DivergenceError& e) {
    trace.aborted = true;
    trace.diagnostic = e.what();
  }
  return trace;
}

double gradient_bound_estimate(const RunTrace& trace) {
  if (trace.records.empty()) throw std::invalid_argument("gradient_bound_estimate: empty trace");
  double K = 0.0;
  for (const auto& rec : trace.records) K = std::max(K, rec.grad_sq_max);
  return K;
}

double state_norm_bound(const RunTrace& trace) {
  double D = 0.0;
  for (const auto& rec : trace.records) D = std::max(D, rec.state_norm_max);
  return D;
}

std::vector<AggregateRecord> aggregate_traces(std::span<const RunTrace> traces) {
  std::vector<const RunTrace*> done;
  for (const auto& tr : traces) {
    if (!tr.aborted) done.push_back(&tr);
  }
  if (done.empty()) return {};
  const std::size_t len = done.front()->records.size();
  const double m = static_cast<double>(done.size());

  constexpr double TraceRecord::*kFields[] = {
      &TraceRecord::loss_pooled, &TraceRecord::loss_weighted, &TraceRecord::deviation_sq,
      &TraceRecord::dist_opt_sq, &TraceRecord::avg_dist_sq,   &TraceRecord::grad_sq_max,
      &TraceRecord::state_norm_max};

  std::vector<AggregateRecord> out(len);
  for (std::size_t k = 0; k < len; ++k) {
    AggregateRecord& agg = out[k];
    agg.t = done.front()->records[k].t;
    agg.mean.t = agg.stderr_.t = agg.t;
    for (auto field : kFields) {
      double sum = 0.0;
      for (const RunTrace* tr : done) sum += tr->records[k].*field;
      const double mean = sum / m;
      double ss = 0.0;
      for (const RunTrace* tr : done) {
        const double dev = tr->records[k].*field - mean;
        ss += dev * dev;
      }
      agg.mean.*field = mean;
      agg.stderr_.*field = done.size() > 1 ? std::sqrt(ss / (m - 1.0)) / std::sqrt(m) : 0.0;
    }
  }
  return out;
}

MonteCarloResult monte_carlo(const MonteCarloSetup& setup, std::size_t num_runs,
                             std::uint64_t base_seed, unsigned jobs) {
  if (num_runs < 1) throw std::invalid_argument("monte_carlo: num_runs must be >= 1");
  MonteCarloResult result;
  result.traces.resize(num_runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < num_runs; k = next++) {
      result.traces[k] = run(*setup.schedule, setup.noise, *setup.problem, setup.sched, setup.T,
                             base_seed + k);
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(num_runs)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& tr : result.traces) {
    if (tr.aborted) {
      result.aborted_seeds.push_back(tr.seed);
    } else {
      ++result.completed;
    }
  }
  result.aggregate = aggregate_traces(result.traces);
  return result;
}

}  // namespace dimix
