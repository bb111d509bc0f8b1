#include "dimix/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dimix/lemma_oracle.hpp"

namespace dimix {
namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  return os;
}

std::string short_num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (auto s : seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
  return out.empty() ? "none" : out;
}

void apply_overrides(ExperimentConfig& cfg, const CliOptions& opt) {
  if (opt.seed) cfg.seed = *opt.seed;
}

}  // namespace

WeightVector build_weights(const ExperimentConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.n);
  switch (cfg.weights) {
    case WeightsKind::kUniform: return WeightVector::uniform(n);
    case WeightsKind::kList: return WeightVector::from_positive(cfg.weight_values);
    case WeightsKind::kRandom: break;
  }
  return WeightVector::random(n, cfg.seed);
}

MixingSchedule build_schedule(const ExperimentConfig& cfg, const WeightVector& r) {
  auto finish = [&](MixingSchedule s) { return cfg.window > 0 ? s.with_window(cfg.window) : s; };
  switch (cfg.topology) {
    case TopologyKind::kFixedCycle: return finish(MixingSchedule::fixed_cycle(r));
    case TopologyKind::kGossip: return finish(MixingSchedule::gossip(r));
    case TopologyKind::kMatrixFile: break;
  }
  std::ifstream in(cfg.matrix_file);
  if (!in) throw std::runtime_error("cannot open matrix file '" + cfg.matrix_file + "'");
  return MixingSchedule::from_list(cfg.matrix_file, r, read_matrix_blocks(in), cfg.window);
}

NoiseModel build_noise(const ExperimentConfig& cfg) {
  switch (cfg.noise) {
    case NoiseKind::kGaussian: return NoiseModel::gaussian(cfg.sigma);
    case NoiseKind::kQuantizer: return NoiseModel::quantizer(cfg.levels);
    case NoiseKind::kNone: break;
  }
  return NoiseModel::noiseless();
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  if (auto problems = config_problems(cfg); !problems.empty()) throw ConfigError(problems);
  WeightVector r = build_weights(cfg);
  MixingSchedule schedule = build_schedule(cfg, r);

  RegressionProblem data;
  if (cfg.problem_file.empty()) {
    data = synthesize(cfg.N, cfg.d, cfg.seed, cfg.noise_width);
  } else {
    std::ifstream in(cfg.problem_file);
    if (!in) throw std::runtime_error("cannot open problem file '" + cfg.problem_file + "'");
    data = read_problem(in);
    if (data.samples() != cfg.N || data.dim() != cfg.d) {
      throw std::runtime_error("problem file dimensions disagree with N and d");
    }
  }
  PartitionResult parts = partition(data, r, cfg.seed);
  DistributedProblem problem = make_distributed(r, std::move(parts.locals), std::move(data));
  return Experiment{cfg,
                    std::move(problem),
                    std::move(schedule),
                    build_noise(cfg),
                    StepSchedule(cfg.alpha0, cfg.nu, cfg.beta0, cfg.mu),
                    std::move(parts.borrowed)};
}

DerivedConstants derive_constants(const Experiment& ex, std::span<const RunTrace> traces) {
  DerivedConstants c;
  c.eta = ex.schedule.eta();
  c.B = ex.schedule.window();
  c.mu_f = ex.problem.constants.mu_f;
  c.L_f = ex.problem.constants.L_f;
  for (const auto& tr : traces) {
    if (tr.records.empty()) continue;
    c.D = std::max(c.D, state_norm_bound(tr));
    c.K = std::max(c.K, gradient_bound_estimate(tr));
  }
  c.gamma = noise_variance_bound(ex.noise, static_cast<int>(ex.problem.dim()), c.D);
  try {
    const Contraction k = contraction_factor(ex.schedule, ex.sched);
    c.lambda = k.lambda;
    c.kappa = k.kappa;
    c.T = thresholds(ex.sched, c.lambda, c.mu_f, c.L_f);
  } catch (const std::domain_error& e) {
    c.note = e.what();
  }
  return c;
}

Manifest make_manifest(const Experiment& ex, const DerivedConstants& c,
                       const MonteCarloResult& mc) {
  Manifest m;
  m.set("version", std::string(DIMIX_VERSION));
  std::ostringstream cfg_text;
  write_config(cfg_text, ex.config);
  std::istringstream lines(cfg_text.str());
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    m.set("config." + line.substr(0, eq), line.substr(eq + 3));
  }
  m.set("derived.eta", c.eta);
  m.set("derived.B", static_cast<double>(c.B));
  m.set("derived.lambda", c.lambda);
  m.set("derived.kappa", c.kappa);
  m.set("derived.mu_f", c.mu_f);
  m.set("derived.L_f", c.L_f);
  m.set("derived.D", c.D);
  m.set("derived.gamma", c.gamma);
  m.set("derived.K", c.K);
  if (c.T) {
    m.set("derived.T1", c.T->T1);
    m.set("derived.T2", c.T->T2);
    m.set("derived.T3", c.T->T3);
    m.set("derived.T4", c.T->T4 ? format_double(*c.T->T4) : std::string("none"));
  } else {
    m.set("derived.thresholds", "unavailable: " + c.note);
  }
  if (!ex.borrowed.empty()) {
    std::vector<std::uint64_t> b(ex.borrowed.begin(), ex.borrowed.end());
    m.set("problem.borrowed_shards", join_seeds(b));
  }
  std::vector<std::uint64_t> seeds;
  for (const auto& tr : mc.traces) seeds.push_back(tr.seed);
  m.set("runs.seeds", join_seeds(seeds));
  m.set("runs.completed", std::to_string(mc.completed));
  m.set("runs.aborted", join_seeds(mc.aborted_seeds));
  for (const auto& tr : mc.traces) {
    if (tr.aborted) m.set("runs.aborted." + std::to_string(tr.seed), tr.diagnostic);
  }
  return m;
}

std::string resolve_output_dir(const ExperimentConfig& cfg,
                               const std::optional<std::string>& explicit_dir) {
  if (explicit_dir && !explicit_dir->empty()) return *explicit_dir;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("DIMIX_OUT"); env && *env) return env;
  return "dimix_out";
}

// ---------------------------------------------------------------------------

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo >= 1.0) || hi < lo || points < 1) throw std::invalid_argument("log_grid: bad range");
  std::vector<double> out;
  lo = std::ceil(lo);
  hi = std::floor(hi);
  if (hi < lo) hi = lo;
  for (int k = 0; k < points; ++k) {
    const double f = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
    double v = std::round(std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))));
    v = std::clamp(v, lo, hi);
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

TheoryReport theory_report(const TheoryInputs& in, const StepSchedule& sched,
                           std::span<const double> mean_dist, std::span<const double> T_points) {
  TheoryReport rep;
  rep.params = xi_constants(in, sched);
  for (double T : T_points) {
    TheoryRow row;
    row.T = T;
    row.bound = theorem_bound(T, rep.params, sched);
    if (T >= 1.0 && T <= static_cast<double>(mean_dist.size())) {
      row.empirical = mean_dist[static_cast<std::size_t>(T) - 1];
      if (*row.empirical > 0.0) {
        const double ratio = row.bound / *row.empirical;
        rep.min_ratio = rep.min_ratio ? std::min(*rep.min_ratio, ratio) : ratio;
      }
      if (!(row.bound >= *row.empirical)) rep.dominated = false;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

SweepReport sweep_experiment(const Experiment& ex, std::span<const Iteration> grid, unsigned jobs) {
  if (grid.size() < 2) throw std::invalid_argument("sweep: T_grid needs at least two points");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (grid[k] <= grid[k - 1]) throw std::invalid_argument("sweep: T_grid must be increasing");
  }
  const MonteCarloSetup setup{&ex.schedule, ex.noise, &ex.problem, ex.sched, grid.back()};
  const MonteCarloResult mc =
      monte_carlo(setup, static_cast<std::size_t>(ex.config.num_runs), ex.config.seed, jobs);
  if (mc.aggregate.empty()) throw std::runtime_error("sweep: every run diverged");
  SweepReport rep;
  rep.completed = mc.completed;
  std::vector<double> ts;
  for (Iteration T : grid) {
    const AggregateRecord& a = mc.aggregate.at(static_cast<std::size_t>(T - 1));
    rep.T.push_back(T);
    rep.mean.push_back(a.mean.dist_opt_sq);
    rep.stderr_.push_back(a.stderr_.dist_opt_sq);
    ts.push_back(static_cast<double>(T));
  }
  rep.fit = fit_loglog(ts, rep.mean);
  return rep;
}

// ---------------------------------------------------------------------------

int cmd_run(ExperimentConfig cfg, const CliOptions& opt, std::ostream& out) {
  apply_overrides(cfg, opt);
  const fs::path dir = resolve_output_dir(cfg, opt.out);
  const Experiment ex = build_experiment(cfg);

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("output_dir: cannot create '" + dir.string() + "'");
  }

  const MonteCarloSetup setup{&ex.schedule, ex.noise, &ex.problem, ex.sched, cfg.T};
  const MonteCarloResult mc =
      monte_carlo(setup, static_cast<std::size_t>(cfg.num_runs), cfg.seed, opt.jobs);
  const DerivedConstants c = derive_constants(ex, mc.traces);

  for (std::size_t k = 0; k < mc.traces.size(); ++k) {
    auto os = open_out(dir / ("run_" + std::to_string(k) + ".csv"));
    write_run_csv(os, mc.traces[k]);
  }
  {
    auto os = open_out(dir / "mean.csv");
    write_mean_csv(os, mc.aggregate);
  }
  {
    auto os = open_out(dir / "manifest");
    write_manifest(os, make_manifest(ex, c, mc));
  }
  if (opt.plots && !mc.aggregate.empty()) {
    PlotSeries pooled{"pooled loss", {}, {}}, weighted{"weighted loss", {}, {}};
    PlotSeries dev{"deviation_sq", {}, {}}, dist{"dist_opt_sq", {}, {}};
    for (const auto& a : mc.aggregate) {
      const double t = static_cast<double>(a.t);
      for (PlotSeries* s : {&pooled, &weighted, &dev, &dist}) s->x.push_back(t);
      pooled.y.push_back(a.mean.loss_pooled);
      weighted.y.push_back(a.mean.loss_weighted);
      dev.y.push_back(a.mean.deviation_sq);
      dist.y.push_back(a.mean.dist_opt_sq);
    }
    const std::vector<PlotSeries> loss{pooled, weighted}, spread{dev, dist};
    auto os1 = open_out(dir / "loss.svg");
    write_loglog_svg(os1, "Training loss (" + ex.schedule.name() + ")", "loss", loss);
    auto os2 = open_out(dir / "deviation.svg");
    write_loglog_svg(os2, "Consensus deviation (" + ex.schedule.name() + ")", "squared r-norm",
                     spread);
  }

  out << "runs: " << mc.completed << " completed, " << mc.aborted_seeds.size() << " aborted\n";
  for (const auto& tr : mc.traces) {
    if (tr.aborted) out << "  seed " << tr.seed << ": " << tr.diagnostic << '\n';
  }
  if (!mc.aggregate.empty()) {
    const auto& last = mc.aggregate.back();
    out << "final t = " << last.t << ": loss_pooled " << short_num(last.mean.loss_pooled)
        << ", deviation_sq " << short_num(last.mean.deviation_sq) << ", dist_opt_sq "
        << short_num(last.mean.dist_opt_sq) << '\n';
  }
  out << "wrote " << dir.string() << '\n';
  return mc.completed > 0 ? 0 : 1;
}

int cmd_validate(ExperimentConfig cfg, const CliOptions& opt, std::ostream& out) {
  apply_overrides(cfg, opt);
  const WeightVector r = build_weights(cfg);
  const MixingSchedule schedule = build_schedule(cfg, r);
  const ValidationReport v = validate_schedule(schedule, cfg.validate_horizon);
  auto verdict = [](bool ok) { return ok ? "PASS" : "FAIL"; };

  out << "schedule " << schedule.name() << ": n = " << schedule.size() << ", B = "
      << schedule.window() << ", eta = " << short_num(schedule.eta()) << ", horizon = "
      << cfg.validate_horizon << '\n';
  out << "stochastic   " << verdict(v.stochastic_ok)
      << "  max |row sum - 1| = " << short_num(v.max_row_sum_deviation)
      << ", max |r^T W - r^T| = " << short_num(v.max_stationarity_deviation)
      << (v.negative_entry ? ", negative entry present" : "") << '\n';
  if (v.max_row_sum_deviation > kStochasticTol) {
    const double sum = schedule.at(v.worst_row_sum_t).W.row(v.worst_row_sum_row).sum();
    out << "             worst row " << v.worst_row_sum_row << " of W(" << v.worst_row_sum_t
        << ") sums to " << std::setprecision(17) << sum << std::setprecision(6) << '\n';
  }
  out << "entries      " << verdict(v.eta_ok)
      << "  min positive entry = " << short_num(v.min_positive_entry) << '\n';
  out << "connectivity " << verdict(v.connectivity_ok) << "  " << v.windows_failed << " of "
      << v.windows_checked << " windows not strongly connected";
  if (v.windows_failed > 0) out << " (first: (" << v.first_failed_window << ", "
                                << v.first_failed_window + schedule.window() << "])";
  out << '\n' << "overall      " << verdict(v.passed()) << '\n';
  return v.passed() ? 0 : 1;
}

int cmd_theory(ExperimentConfig cfg, const CliOptions& opt, std::ostream& out) {
  apply_overrides(cfg, opt);
  const Experiment ex = build_experiment(cfg);
  regime_of(ex.sched);  // rejects mu + nu > 1

  const fs::path dir = resolve_output_dir(cfg, opt.out);
  std::ifstream man_in(dir / "manifest"), mean_in(dir / "mean.csv");
  const bool have_traces = man_in && mean_in;
  if (!have_traces && !opt.assume_q0) {
    throw std::runtime_error("theory: no traces in '" + dir.string() +
                             "' (run `dimix run` first or pass --assume-q0)");
  }

  TheoryInputs in;
  std::vector<double> mean_dist, mean_avg;
  if (have_traces) {
    const Manifest m = read_manifest(man_in);
    const CsvTable mean = read_csv(mean_in);
    in.gamma = m.number("derived.gamma");
    in.K = m.number("derived.K");
    mean_dist = mean.values("dist_opt_sq_mean");
    mean_avg = mean.values("avg_dist_sq_mean");
    out << "traces: " << dir.string() << " (" << mean_dist.size() << " iterations)\n";
  } else {
    // No traces: K and gamma from one run of the configured length.
    const RunTrace tr = run(ex.schedule, ex.noise, ex.problem, ex.sched, cfg.T, cfg.seed);
    const DerivedConstants c = derive_constants(ex, std::span<const RunTrace>(&tr, 1));
    in.gamma = c.gamma;
    in.K = c.K;
    out << "traces: none; K and gamma from one run of " << cfg.T << " iterations\n";
  }
  const Contraction k = contraction_factor(ex.schedule, ex.sched);
  in.lambda = k.lambda;
  in.kappa = k.kappa;
  in.mu_f = ex.problem.constants.mu_f;
  in.L_f = ex.problem.constants.L_f;

  const Thresholds th = thresholds(ex.sched, in.lambda, in.mu_f, in.L_f);
  const double T0 = th.T0();
  bool q_known = true;
  if (opt.assume_q0) {
    in.Q_T0 = *opt.assume_q0;
  } else if (T0 <= static_cast<double>(mean_avg.size())) {
    in.Q_T0 = mean_avg[static_cast<std::size_t>(T0) - 1];
  } else {
    q_known = false;
  }

  const TheoryParams p = xi_constants(in, ex.sched);
  // Without Q(T0) the constants still print; the bound itself needs it.
  if (!q_known && p.regime_condition_ok) {
    throw std::runtime_error("theory: traces end at t = " + std::to_string(mean_avg.size()) +
                             " before T0 = " + short_num(T0) + "; pass --assume-q0");
  }

  out << "lambda " << short_num(in.lambda) << "  kappa " << short_num(in.kappa) << "  mu_f "
      << short_num(in.mu_f) << "  L_f " << short_num(in.L_f) << "  gamma " << short_num(in.gamma)
      << "  K " << short_num(in.K) << "  Q(T0) "
      << (q_known ? short_num(in.Q_T0) : std::string("n/a")) << '\n';
  out << "T1 " << short_num(th.T1) << "  T2 " << short_num(th.T2) << "  T3 " << short_num(th.T3)
      << "  T4 " << (th.T4 ? short_num(*th.T4) : std::string("n/a")) << '\n';
  out << "regime: mu + nu " << (p.regime == Regime::kMuPlusNuEqualsOne ? "= 1" : "< 1") << '\n';
  out << "eps1..5 " << short_num(p.eps1) << ' ' << short_num(p.eps2) << ' ' << short_num(p.eps3)
      << ' ' << short_num(p.eps4) << ' ' << short_num(p.eps5) << '\n';
  out << "xi1..5  " << short_num(p.xi1) << ' '
      << (p.regime == Regime::kMuPlusNuEqualsOne ? std::string("n/a")
                                                 : "2Q(T0)*exp(" + short_num(p.xi2_log_factor) + ")")
      << ' ' << short_num(p.xi3) << ' ' << short_num(p.xi4) << ' ' << short_num(p.xi5) << '\n';
  out << "exponents: consensus -" << short_num(std::min(cfg.mu, 2 * cfg.nu)) << ", tail -"
      << short_num(std::min(cfg.mu - cfg.nu, 2 * cfg.nu)) << '\n';
  if (!p.regime_condition_ok) {
    const double need = (in.mu_f + in.L_f) / (in.mu_f * in.L_f) *
                        std::min(2 * cfg.mu - 1, 2 * cfg.nu);
    out << "bound not available: mu + nu = 1 needs alpha0 beta0 >= " << short_num(need)
        << ", config has " << short_num(cfg.alpha0 * cfg.beta0) << '\n';
    return 0;
  }
  const double start = th.all();
  const double end = std::max(100.0 * start, static_cast<double>(mean_dist.size()));
  const TheoryReport rep = theory_report(in, ex.sched, mean_dist, log_grid(start, end, 13));
  out << std::setw(14) << "T" << std::setw(16) << "bound" << std::setw(16) << "empirical" << '\n';
  for (const auto& row : rep.rows) {
    out << std::setw(14) << short_num(row.T) << std::setw(16) << short_num(row.bound)
        << std::setw(16) << (row.empirical ? short_num(*row.empirical) : std::string("-")) << '\n';
  }
  if (rep.min_ratio) {
    out << "bound / empirical >= " << short_num(*rep.min_ratio)
        << (rep.dominated ? "" : "  (bound violated)") << '\n';
  } else {
    out << "no reported T falls inside the traces\n";
  }
  return 0;
}

int cmd_lemmas(const CliOptions& opt, std::ostream& out) {
  SuiteOptions so;
  so.jobs = opt.jobs;
  if (opt.seed) so.seed = *opt.seed;
  const std::vector<CheckReport> reports = run_lemma_suite(so);
  bool ok = true;
  out << std::left << std::setw(20) << "check" << std::setw(12) << "kind" << std::right
      << std::setw(10) << "instances" << std::setw(9) << "skipped" << std::setw(14)
      << "worst slack" << std::setw(12) << "tolerance" << std::setw(22) << "worst seed"
      << "  result\n";
  for (const auto& r : reports) {
    ok = ok && r.passed();
    out << std::left << std::setw(20) << r.lemma << std::setw(12)
        << (r.kind == CheckKind::kIdentity ? "identity" : "inequality") << std::right
        << std::setw(10) << r.instances << std::setw(9) << r.skipped << std::setw(14)
        << short_num(r.worst_slack) << std::setw(12) << short_num(r.worst_tolerance)
        << std::setw(22) << r.worst_seed << "  " << (r.passed() ? "PASS" : "FAIL") << '\n';
    if (!r.passed()) out << "    worst instance: " << r.worst_instance << '\n';
  }
  out << (ok ? "all lemma checks passed\n" : "lemma violations found\n");
  return ok ? 0 : 1;
}

int cmd_sweep(ExperimentConfig cfg, const CliOptions& opt, std::ostream& out) {
  apply_overrides(cfg, opt);
  const Experiment ex = build_experiment(cfg);
  const SweepReport rep = sweep_experiment(ex, cfg.T_grid, opt.jobs);
  out << "runs completed: " << rep.completed << " of " << cfg.num_runs << '\n';
  out << std::setw(10) << "T" << std::setw(16) << "dist_opt_sq" << std::setw(14) << "stderr"
      << '\n';
  for (std::size_t k = 0; k < rep.T.size(); ++k) {
    out << std::setw(10) << rep.T[k] << std::setw(16) << short_num(rep.mean[k]) << std::setw(14)
        << short_num(rep.stderr_[k]) << '\n';
  }
  out << "slope " << short_num(rep.fit.slope) << " +- " << short_num(rep.fit.slope_stderr) << '\n';
  return 0;
}

}  // namespace dimix
