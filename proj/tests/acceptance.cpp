// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dimix/algorithm.hpp"
#include "dimix/analysis.hpp"
#include "dimix/experiment.hpp"
#include "dimix/lemma_oracle.hpp"
#include "dimix/noise.hpp"
#include "dimix/rng.hpp"

using namespace dimix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ExperimentConfig default_config(TopologyKind topology) {
  ExperimentConfig cfg;  // defaults: n=20, d=25, quantizer s=4, 20 runs to T=5000
  cfg.topology = topology;
  return cfg;
}

// -- 1 ----------------------------------------------------------------------
Outcome stochasticity() {
  const ExperimentConfig cfg = default_config(TopologyKind::kFixedCycle);
  const WeightVector r = build_weights(cfg);
  const RowVector rt = r.values().transpose();
  double row = 0.0, stat = 0.0;
  for (const auto& s : {MixingSchedule::fixed_cycle(r), MixingSchedule::gossip(r)}) {
    for (Iteration t = 1; t <= 5000; ++t) {
      const Matrix& W = s.at(t).W;
      row = std::max(row, (W.rowwise().sum().array() - 1.0).abs().maxCoeff());
      stat = std::max(stat, (rt * W - rt).cwiseAbs().maxCoeff());
    }
  }
  return {row <= 1e-12 && stat <= 1e-12,
          "max row-sum dev " + num(row) + ", max |r^T W - r^T| " + num(stat)};
}

// -- 2 ----------------------------------------------------------------------
Outcome connectivity() {
  const WeightVector r = build_weights(default_config(TopologyKind::kGossip));
  const auto s = MixingSchedule::gossip(r);
  const auto full = validate_schedule(s, 200);
  const auto short_window = validate_schedule(s.with_window(19), 200);
  const bool pass = full.passed() && full.windows_failed == 0 && short_window.windows_failed > 0;
  return {pass, "B=20: " + std::to_string(full.windows_failed) + "/" +
                    std::to_string(full.windows_checked) + " windows fail; B=19: " +
                    std::to_string(short_window.windows_failed) + "/" +
                    std::to_string(short_window.windows_checked) +
                    " windows fail (19 consecutive pairs already span the ring)"};
}

// -- 3 ----------------------------------------------------------------------
Outcome quantizer_moments() {
  const int d = 25, s = 4, draws = 100000;
  Rng xr(make_stream(3, Stream::kOracle));
  bool pass = true;
  double worst_z = 0.0, worst_margin = -1e300;
  for (int k = 0; k < 10; ++k) {
    Vector x(d);
    const double scale = std::pow(10.0, xr.uniform(-2, 2));
    for (int j = 0; j < d; ++j) x[j] = scale * xr.normal();
    Rng rng(stream_key(3, Stream::kOracle, {std::uint64_t(k + 1)}));
    Vector sum = Vector::Zero(d), sum_sq = Vector::Zero(d);
    double m2 = 0.0, m2_sq = 0.0;
    for (int n = 0; n < draws; ++n) {
      const Vector e = stochastic_quantize(x, s, rng) - x;
      sum += e;
      sum_sq += e.cwiseProduct(e);
      const double q = e.squaredNorm();
      m2 += q;
      m2_sq += q * q;
    }
    for (int j = 0; j < d; ++j) {
      const double mean = sum[j] / draws;
      const double se = std::sqrt(std::max(sum_sq[j] / draws - mean * mean, 0.0) / draws);
      const double z = se > 0 ? std::abs(mean) / se : (mean == 0.0 ? 0.0 : 1e300);
      worst_z = std::max(worst_z, z);
      pass = pass && z <= 4.0;
    }
    const double mean2 = m2 / draws;
    const double se2 = std::sqrt(std::max(m2_sq / draws - mean2 * mean2, 0.0) / draws);
    const double bound = std::min(std::sqrt(double(d)) / s, double(d) / (s * s)) * x.squaredNorm();
    const double margin = (mean2 - bound) / se2;  // in standard errors
    worst_margin = std::max(worst_margin, margin);
    pass = pass && mean2 <= bound + 3.0 * se2;
  }
  return {pass, "worst |mean|/se " + num(worst_z) + ", worst (E||e||^2 - bound)/se " +
                    num(worst_margin)};
}

// -- 4 ----------------------------------------------------------------------
Outcome lemma_suite(unsigned jobs) {
  SuiteOptions opt;
  opt.jobs = jobs;
  const auto reports = run_lemma_suite(opt);
  bool pass = true;
  std::ostringstream os;
  for (const auto& r : reports) {
    const bool enough = r.kind == CheckKind::kIdentity || r.instances >= 1000;
    pass = pass && r.passed() && enough;
    os << r.lemma << " " << r.instances << (r.passed() ? "" : " VIOLATED") << (enough ? "" : " FEW")
       << "; ";
  }
  return {pass, os.str()};
}

// -- 5 ----------------------------------------------------------------------
Outcome gd_reduction() {
  // f(x) = (1/2m)||U x - v||^2 with H = U^T U / m = diag(1, 1.5)
  Matrix U = Matrix::Zero(2, 2);
  U(0, 0) = std::sqrt(2.0);
  U(1, 1) = std::sqrt(3.0);
  Vector v(2);
  v << 1.0, -2.0;
  const auto problem =
      make_distributed(WeightVector::uniform(1), {LocalObjective({0, 1}, U, v)});
  const auto schedule =
      MixingSchedule::from_list("single", problem.r, {MixingMatrix{Matrix::Identity(1, 1)}}, 1);
  const StepSchedule sched(1.6, 0.25, 1.0, 0.75);
  const Iteration T = 10000;
  RunOptions opt;
  for (Iteration t = 1; t <= T; ++t) opt.checkpoints.push_back(t);
  const auto tr = run(schedule, NoiseModel::noiseless(), problem, sched, T, 0, opt);

  const Matrix H = U.transpose() * U / 2.0;
  const Vector b = U.transpose() * v / 2.0;
  const Vector xs = H.ldlt().solve(b);
  Vector x = Vector::Zero(2);
  double worst = 0.0;
  for (Iteration t = 1; t <= T; ++t) {
    const Vector got = tr.checkpoints[static_cast<std::size_t>(t - 1)].second.row(0).transpose();
    worst = std::max(worst, (got - x).cwiseAbs().maxCoeff());
    const double step = 1.6 * std::pow(double(t), -0.25) * std::pow(double(t), -0.75);
    x = x - step * (H * x - b);
  }
  const Vector final_x = tr.checkpoints.back().second.row(0).transpose();
  const double ratio = (final_x - xs).norm() / xs.norm();
  return {!tr.aborted && worst <= 1e-12 && ratio <= 1e-6,
          "max entry gap " + num(worst) + ", ||x(T)-x*||/||x(1)-x*|| " + num(ratio)};
}

// -- 6, 7, 9 ----------------------------------------------------------------
struct DefaultRuns {
  std::vector<AggregateRecord> fixed, gossip;
  std::size_t fixed_done = 0, gossip_done = 0;
};

DefaultRuns default_runs(unsigned jobs) {
  DefaultRuns out;
  for (auto topo : {TopologyKind::kFixedCycle, TopologyKind::kGossip}) {
    const Experiment ex = build_experiment(default_config(topo));
    const MonteCarloSetup setup{&ex.schedule, ex.noise, &ex.problem, ex.sched, ex.config.T};
    auto mc = monte_carlo(setup, static_cast<std::size_t>(ex.config.num_runs), ex.config.seed, jobs);
    auto& dst = topo == TopologyKind::kFixedCycle ? out.fixed : out.gossip;
    dst = std::move(mc.aggregate);
    (topo == TopologyKind::kFixedCycle ? out.fixed_done : out.gossip_done) = mc.completed;
  }
  return out;
}

std::vector<double> column(const std::vector<AggregateRecord>& agg, double TraceRecord::*field) {
  std::vector<double> v;
  v.reserve(agg.size());
  for (const auto& a : agg) v.push_back(a.mean.*field);
  return v;
}

Outcome rate_check(const DefaultRuns& runs) {
  const std::vector<double> grid{500, 1000, 2000, 4000, 5000};
  bool pass = runs.fixed_done == 20 && runs.gossip_done == 20;
  std::string detail;
  for (const auto* agg : {&runs.fixed, &runs.gossip}) {
    std::vector<double> y;
    for (double T : grid) y.push_back((*agg)[static_cast<std::size_t>(T) - 1].mean.dist_opt_sq);
    const RateFit f = fit_loglog(grid, y);
    pass = pass && f.slope >= -0.85 && f.slope <= -0.35;
    detail += std::string(agg == &runs.fixed ? "fixed" : "gossip") + " slope " + num(f.slope) +
              " +- " + num(f.slope_stderr) + "; ";
  }
  return {pass, detail + "target [-0.85, -0.35]"};
}

Outcome consensus_decay(const DefaultRuns& runs) {
  bool pass = true;
  std::string detail;
  for (const auto* agg : {&runs.fixed, &runs.gossip}) {
    const auto dev = column(*agg, &TraceRecord::deviation_sq);
    const RateFit f = fit_rate(dev, 500, 5000);
    pass = pass && f.slope <= -0.35;
    detail += std::string(agg == &runs.fixed ? "fixed" : "gossip") + " slope " + num(f.slope) + "; ";
  }
  return {pass, detail + "target <= -0.35"};
}

Outcome figure_parity(const DefaultRuns& runs) {
  const auto fixed = column(runs.fixed, &TraceRecord::loss_pooled);
  const auto gossip = column(runs.gossip, &TraceRecord::loss_pooled);
  const double f_end = fixed.back(), g_end = gossip.back();
  const RateFit ff = fit_rate(fixed, 100, 5000), gf = fit_rate(gossip, 100, 5000);
  const bool down = ff.slope < 0 && gf.slope < 0 && fixed.back() < fixed[99] && gossip.back() < gossip[99];
  return {f_end <= g_end && down, "loss at T=5000: fixed " + num(f_end) + ", gossip " + num(g_end) +
                                      "; log-log slopes after t=100: " + num(ff.slope) + ", " +
                                      num(gf.slope)};
}

// -- 8 ----------------------------------------------------------------------
Outcome bound_dominance() {
  ExperimentConfig cfg;
  cfg.n = 4;
  cfg.d = 5;
  cfg.N = 40;
  cfg.topology = TopologyKind::kGossip;
  cfg.weights = WeightsKind::kUniform;
  cfg.noise = NoiseKind::kQuantizer;
  cfg.levels = 4;
  // mu + nu < 1 with mu > nu: both exponents negative and T0 near 1.5e4
  cfg.alpha0 = 1.0;
  cfg.beta0 = 1.0;
  cfg.mu = 0.3;
  cfg.nu = 0.1;
  cfg.seed = 8;
  const Experiment ex = build_experiment(cfg);
  const Contraction k = contraction_factor(ex.schedule, ex.sched);
  const double mu_f = ex.problem.constants.mu_f, L_f = ex.problem.constants.L_f;
  const Thresholds th = thresholds(ex.sched, k.lambda, mu_f, L_f);
  const double T0 = th.all();
  const std::vector<double> points{T0, std::floor(1.5 * T0), 2 * T0};
  const auto horizon = static_cast<Iteration>(points.back());

  // One run at a time keeps memory flat.
  const int runs = 50;
  std::vector<double> sum_dist(points.size(), 0.0);
  double sum_q0 = 0.0, K = 0.0, D = 0.0;
  int done = 0;
  for (int s = 0; s < runs; ++s) {
    const RunTrace tr = run(ex.schedule, ex.noise, ex.problem, ex.sched, horizon, cfg.seed + s);
    if (tr.aborted) continue;
    ++done;
    for (std::size_t p = 0; p < points.size(); ++p) {
      sum_dist[p] += tr.at(static_cast<Iteration>(points[p])).dist_opt_sq;
    }
    sum_q0 += tr.at(static_cast<Iteration>(T0)).avg_dist_sq;
    K = std::max(K, gradient_bound_estimate(tr));
    D = std::max(D, state_norm_bound(tr));
  }
  if (done == 0) return {false, "every run diverged"};
  TheoryInputs in;
  in.lambda = k.lambda;
  in.kappa = k.kappa;
  in.mu_f = mu_f;
  in.L_f = L_f;
  in.K = K;
  in.gamma = noise_variance_bound(ex.noise, cfg.d, D);
  in.Q_T0 = sum_q0 / done;
  const TheoryParams params = xi_constants(in, ex.sched);
  bool pass = done == runs;
  std::string detail = "T0 " + num(T0) + ", runs " + std::to_string(done) + "; ";
  for (std::size_t p = 0; p < points.size(); ++p) {
    const double empirical = sum_dist[p] / done;
    const double bound = theorem_bound(points[p], params, ex.sched);
    pass = pass && bound >= empirical;
    detail += "T=" + num(points[p]) + " bound " + num(bound) + " emp " + num(empirical) +
              " (x" + num(bound / empirical) + "); ";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  unsigned jobs = 1;
  app.add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  bool all = true;
  auto report = [&](int id, const char* name, auto&& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << name << "  ["
              << num(secs) << " s]  " << o.detail << std::endl;
  };

  report(1, "stochasticity", stochasticity);
  report(2, "connectivity", connectivity);
  report(3, "quantizer moments", quantizer_moments);
  report(4, "lemma suite", [&] { return lemma_suite(jobs); });
  report(5, "GD reduction", gd_reduction);
  DefaultRuns runs;
  const auto start = std::chrono::steady_clock::now();
  std::string run_error;
  try {
    runs = default_runs(jobs);
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  std::cout << "default configuration runs: "
            << num(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count())
            << " s" << std::endl;
  auto guarded = [&](auto fn) {
    return [&, fn] {
      if (!run_error.empty()) return Outcome{false, "runs failed: " + run_error};
      return fn(runs);
    };
  };
  report(6, "rate check", guarded(rate_check));
  report(7, "consensus decay", guarded(consensus_decay));
  report(8, "theorem-bound dominance", bound_dominance);
  report(9, "figure parity", guarded(figure_parity));
  std::cout << (all ? "all criteria passed" : "some criteria failed") << std::endl;
  return all ? 0 : 1;
}
