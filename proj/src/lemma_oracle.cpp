#include "dimix/lemma_oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dimix/analysis.hpp"
#include "dimix/rng.hpp"

namespace dimix {
namespace {

// Lemma ids used as stream ids for the suites.
enum : std::uint64_t {
  kIdContraction = 1,
  kIdSubmult = 2,
  kIdYoungVec = 3,
  kIdYoungMat = 4,
  kIdTelescope = 5,
  kIdConvexity = 7,
};

std::uint64_t instance_seed(std::uint64_t base, std::uint64_t lemma, std::size_t k) {
  return stream_key(base, Stream::kOracle, {lemma, static_cast<std::uint64_t>(k)});
}

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = rng.normal();
  }
  return M;
}

Vector gaussian_vector(Rng& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

WeightVector random_weights(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  for (auto& x : p) x = rng.uniform(0.01, 0.09);
  return WeightVector::from_positive(p);
}

int rand_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

std::string fmt(const char* label, std::initializer_list<double> values) {
  std::ostringstream os;
  os.precision(6);
  os << label;
  for (double v : values) os << ' ' << v;
  return os.str();
}

CheckReport make_report(std::string lemma, CheckKind kind = CheckKind::kInequality) {
  CheckReport r;
  r.lemma = std::move(lemma);
  r.kind = kind;
  return r;
}

double young_slack(double lhs, double a2, double b2, double theta) {
  return (1.0 + theta) * a2 + (1.0 + 1.0 / theta) * b2 - lhs;
}

void require_theta(double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("check_young: theta must be positive");
}

// Runs body(k) for k < count on up to `jobs` threads, each into its own report,
// then merges in index order so the result does not depend on scheduling.
template <class Body>
CheckReport fan_out(const std::string& lemma, CheckKind kind, std::size_t count, unsigned jobs,
                    Body body) {
  std::vector<CheckReport> parts(count, make_report(lemma, kind));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) parts[k] = body(k);
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  CheckReport out = make_report(lemma, kind);
  for (const auto& p : parts) out.merge(p);
  return out;
}

}  // namespace

void CheckReport::record(double slack, double tolerance, std::uint64_t seed,
                         std::string description) {
  ++instances;
  const bool violated = !(slack >= -tolerance);
  if (violated) ++violations;
  // Rank instances by slack relative to their tolerance.
  const double score = tolerance > 0.0 ? slack / tolerance : slack;
  const double best = worst_tolerance > 0.0 ? worst_slack / worst_tolerance : worst_slack;
  if (instances == 1 || std::isnan(slack) || score < best) {
    worst_slack = slack;
    worst_tolerance = tolerance;
    worst_seed = seed;
    worst_instance = std::move(description);
  }
}

void CheckReport::merge(const CheckReport& other) {
  if (other.instances > 0) {
    const double score = other.worst_tolerance > 0.0 ? other.worst_slack / other.worst_tolerance
                                                     : other.worst_slack;
    const double best = worst_tolerance > 0.0 ? worst_slack / worst_tolerance : worst_slack;
    if (instances == 0 || std::isnan(other.worst_slack) || score < best) {
      worst_slack = other.worst_slack;
      worst_tolerance = other.worst_tolerance;
      worst_seed = other.worst_seed;
      worst_instance = other.worst_instance;
    }
  }
  instances += other.instances;
  skipped += other.skipped;
  violations += other.violations;
}

// ---------------------------------------------------------------------------

CheckReport check_contraction(const MixingSchedule& schedule,
                              const std::function<double(Iteration)>& beta, double beta0,
                              const Matrix& U, Iteration s, Iteration t) {
  CheckReport rep = make_report("contraction");
  const auto n = static_cast<Eigen::Index>(schedule.size());
  if (U.rows() != n) throw std::invalid_argument("check_contraction: U has the wrong row count");
  if (s < 1 || t <= s) throw std::invalid_argument("check_contraction: need 1 <= s < t");
  const double B = schedule.window();
  const double lambda =
      schedule.eta() * schedule.weights().min() / (2.0 * B * static_cast<double>(n * n));
  if (B * lambda * beta0 >= 1.0) {
    rep.skip();
    return rep;
  }
  const double kappa = 1.0 / (1.0 - B * lambda * beta0);

  Matrix Phi = Matrix::Identity(n, n);
  double prod = 1.0;
  for (Iteration k = s + 1; k <= t - 1; ++k) {
    const double b = beta(k);
    Phi = ((1.0 - b) * Matrix::Identity(n, n) + b * schedule.at(k).W) * Phi;
    prod *= 1.0 - lambda * b;
  }
  const Vector& r = schedule.weights().values();
  const Matrix P = Phi - Vector::Ones(n) * r.transpose();
  const double lhs = r_norm_sq(P * U, schedule.weights());
  const double rhs = kappa * prod * r_norm_sq(U, schedule.weights());
  rep.record(rhs - lhs, 1e-10, 0, fmt("s t", {double(s), double(t)}));
  return rep;
}

CheckReport check_contraction(const MixingSchedule& schedule, const StepSchedule& sched,
                              const Matrix& U, Iteration s, Iteration t) {
  return check_contraction(
      schedule, [&sched](Iteration k) { return sched.beta(k); }, sched.beta0(), U, s, t);
}

CheckReport check_submultiplicative(const Matrix& A, const Matrix& B, const WeightVector& r) {
  if (A.cols() != B.rows() || static_cast<std::size_t>(A.rows()) != r.size()) {
    throw std::invalid_argument("check_submultiplicative: dimension mismatch");
  }
  CheckReport rep = make_report("submultiplicative");
  const double lhs = r_norm(A * B, r);
  const double rhs = r_norm(A, r) * B.norm();
  rep.record(rhs - lhs, 1e-12, 0, "");
  return rep;
}

CheckReport check_young(const Vector& u, const Vector& v, double theta) {
  require_theta(theta);
  if (u.size() != v.size()) throw std::invalid_argument("check_young: size mismatch");
  CheckReport rep = make_report("young-vector");
  rep.record(young_slack((u + v).squaredNorm(), u.squaredNorm(), v.squaredNorm(), theta), 1e-12,
             0, fmt("theta", {theta}));
  return rep;
}

CheckReport check_young(const Matrix& U, const Matrix& V, const WeightVector& r, double theta) {
  require_theta(theta);
  if (U.rows() != V.rows() || U.cols() != V.cols()) {
    throw std::invalid_argument("check_young: shape mismatch");
  }
  CheckReport rep = make_report("young-matrix");
  rep.record(young_slack(r_norm_sq(U + V, r), r_norm_sq(U, r), r_norm_sq(V, r), theta), 1e-12, 0,
             fmt("theta", {theta}));
  return rep;
}

CheckReport check_product_bound(double a, double delta, Iteration s, Iteration t) {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("check_product_bound: delta must lie in [0,1]");
  }
  if (delta < 1.0 ? !(a > 0.0 && a < 1.0) : !(a >= 0.0 && a < 1.0)) {
    throw std::invalid_argument("check_product_bound: a out of range");
  }
  if (s < 1 || t < s) throw std::invalid_argument("check_product_bound: need 1 <= s <= t");
  CheckReport rep = make_report("product-bound");
  if (a / std::pow(static_cast<double>(s), delta) >= 1.0) {
    rep.skip();
    return rep;
  }
  double lhs = 1.0;
  for (Iteration k = s; k < t; ++k) lhs *= 1.0 - a / std::pow(static_cast<double>(k), delta);
  const double ts = static_cast<double>(t), ss = static_cast<double>(s);
  const double rhs = delta < 1.0 ? std::exp(-a / (1.0 - delta) *
                                            (std::pow(ts, 1.0 - delta) - std::pow(ss, 1.0 - delta)))
                                 : std::pow(ts / ss, -a);
  rep.record(rhs - lhs, 1e-12, 0, fmt("a delta s t", {a, delta, ss, ts}));
  return rep;
}

CheckReport check_telescope(const std::vector<double>& beta_seq, double lambda, Iteration t) {
  if (lambda == 0.0) throw std::invalid_argument("check_telescope: lambda must be nonzero");
  if (t < 1 || static_cast<std::size_t>(t - 1) > beta_seq.size()) {
    throw std::invalid_argument("check_telescope: need 1 <= t <= beta_seq.size() + 1");
  }
  CheckReport rep = make_report("telescope", CheckKind::kIdentity);
  auto beta = [&](Iteration k) { return beta_seq[static_cast<std::size_t>(k - 1)]; };
  double lhs = 0.0;
  double scale = std::max(1.0, std::abs(1.0 / lambda));
  for (Iteration s = 1; s <= t - 1; ++s) {
    double term = beta(s);
    for (Iteration k = s + 1; k <= t - 1; ++k) term *= 1.0 - lambda * beta(k);
    lhs += term;
    scale = std::max(scale, std::abs(term));
  }
  double full = 1.0;
  for (Iteration k = 1; k <= t - 1; ++k) full *= 1.0 - lambda * beta(k);
  const double rhs = 1.0 / lambda - full / lambda;
  scale = std::max(scale, std::abs(full / lambda));
  rep.record(-std::abs(lhs - rhs), 1e-10 * scale, 0, fmt("lambda t", {lambda, double(t)}));
  return rep;
}

double sum_bound_tau(double a, double sigma, double delta) {
  if (delta >= 1.0) return 1.0;
  return std::pow(2.0 * (sigma - delta) / a, 1.0 / (1.0 - delta));
}

double weighted_sum(double a, double sigma, double delta, Iteration t) {
  double S = 0.0;  // S(1): empty sum
  for (Iteration k = 1; k < t; ++k) {
    const double kd = static_cast<double>(k);
    S = S * (1.0 - a / std::pow(kd, delta)) + std::pow(kd, -sigma);
  }
  return S;
}

CheckReport check_sum_bound(double a, double sigma, double delta, Iteration t) {
  CheckReport rep = make_report("sum-bound");
  const double A = A_constant(a, sigma, delta);  // validates the parameter ranges
  if (static_cast<double>(t) <= sum_bound_tau(a, sigma, delta)) {
    rep.skip();
    return rep;
  }
  const double ts = static_cast<double>(t);
  const double expo = delta < 1.0 ? -(sigma - delta) : -std::min(sigma - 1.0, a);
  const double rhs = A * std::pow(ts, expo);
  const double lhs = weighted_sum(a, sigma, delta, t);
  rep.record(rhs - lhs, 1e-10, 0, fmt("a sigma delta t", {a, sigma, delta, ts}));
  return rep;
}

CheckReport check_strong_convexity_bound(const DistributedProblem& problem, const Vector& x) {
  CheckReport rep = make_report("strong-convexity");
  const auto& c = problem.constants;
  if (!c.strongly_convex()) {
    rep.skip();
    return rep;
  }
  const Vector g = weighted_gradient(problem.locals, problem.r, x);
  const Vector dx = x - problem.x_star;
  const double lhs = dx.dot(g);
  const double rhs = c.c1() * g.squaredNorm() + c.c2() * dx.squaredNorm();
  rep.record(lhs - rhs, 1e-9 * (1.0 + x.squaredNorm()), 0, fmt("|x|", {x.norm()}));
  return rep;
}

// ---------------------------------------------------------------------------

ContractionInstance make_contraction_instance(std::uint64_t seed) {
  Rng rng(seed);
  const int n = rand_int(rng, 3, 8);
  const int family = rand_int(rng, 0, 2);
  const WeightVector r =
      rng.uniform() < 0.3 ? WeightVector::uniform(static_cast<std::size_t>(n)) : random_weights(rng, n);
  const double mu = rng.uniform(0.05, 0.95);
  const double beta0 = rng.uniform(0.05, 1.0);
  const int d = rand_int(rng, 1, 4);
  Matrix U = gaussian_matrix(rng, n, d);
  const Iteration s = rand_int(rng, 1, 30);
  const Iteration t = s + rand_int(rng, 1, 200);

  auto schedule = [&]() -> MixingSchedule {
    switch (family) {
      case 0: return MixingSchedule::fixed_cycle(r);
      case 1: return MixingSchedule::gossip(r);
      default: {
        MixingMatrix M{Vector::Ones(n) * r.values().transpose()};
        return MixingSchedule::from_list("consensus", r, {M}, 1);
      }
    }
  }();
  return ContractionInstance{std::move(schedule), StepSchedule(1.0, 0.5, beta0, mu), std::move(U),
                             s, t};
}

CheckReport suite_contraction(const SuiteOptions& opt) {
  return fan_out("contraction", CheckKind::kInequality, opt.random_instances, opt.jobs,
                 [&](std::size_t k) {
                   const std::uint64_t seed = instance_seed(opt.seed, kIdContraction, k);
                   const ContractionInstance in = make_contraction_instance(seed);
                   CheckReport rep = check_contraction(in.schedule, in.sched, in.U, in.s, in.t);
                   rep.worst_seed = seed;
                   rep.worst_instance = in.schedule.name() + " n=" +
                                        std::to_string(in.schedule.size()) + " " +
                                        rep.worst_instance;
                   return rep;
                 });
}

CheckReport suite_submultiplicative(const SuiteOptions& opt) {
  CheckReport out = make_report("submultiplicative");
  for (std::size_t k = 0; k < opt.random_instances; ++k) {
    const std::uint64_t seed = instance_seed(opt.seed, kIdSubmult, k);
    Rng rng(seed);
    const int n = rand_int(rng, 1, 8), m = rand_int(rng, 1, 8), q = rand_int(rng, 1, 8);
    const WeightVector r = random_weights(rng, n);
    const Matrix A = gaussian_matrix(rng, n, m);
    const Matrix B = gaussian_matrix(rng, m, q);
    CheckReport rep = check_submultiplicative(A, B, r);
    rep.worst_seed = seed;
    rep.worst_instance = fmt("n m q", {double(n), double(m), double(q)});
    out.merge(rep);
  }
  return out;
}

CheckReport suite_young_vector(const SuiteOptions& opt) {
  constexpr double kThetas[] = {0.01, 1.0, 100.0};
  CheckReport out = make_report("young-vector");
  for (std::size_t k = 0; k < opt.random_instances; ++k) {
    const std::uint64_t seed = instance_seed(opt.seed, kIdYoungVec, k);
    Rng rng(seed);
    const int d = rand_int(rng, 1, 10);
    const Vector u = gaussian_vector(rng, d);
    const Vector v = gaussian_vector(rng, d) * std::pow(10.0, rng.uniform(-2.0, 2.0));
    CheckReport rep = check_young(u, v, kThetas[k % 3]);
    rep.worst_seed = seed;
    out.merge(rep);
  }
  return out;
}

CheckReport suite_young_matrix(const SuiteOptions& opt) {
  constexpr double kThetas[] = {0.01, 1.0, 100.0};
  CheckReport out = make_report("young-matrix");
  for (std::size_t k = 0; k < opt.random_instances; ++k) {
    const std::uint64_t seed = instance_seed(opt.seed, kIdYoungMat, k);
    Rng rng(seed);
    const int n = rand_int(rng, 1, 8), d = rand_int(rng, 1, 6);
    const WeightVector r = random_weights(rng, n);
    const Matrix U = gaussian_matrix(rng, n, d);
    const Matrix V = gaussian_matrix(rng, n, d) * std::pow(10.0, rng.uniform(-2.0, 2.0));
    CheckReport rep = check_young(U, V, r, kThetas[k % 3]);
    rep.worst_seed = seed;
    out.merge(rep);
  }
  return out;
}

CheckReport suite_product_bound(const SuiteOptions& opt) {
  // Sweeps t upward from each s with a running product; compared in log space
  // because the products underflow long before t_max.
  constexpr Iteration kStarts[] = {1, 2, 5, 10, 50, 100};
  constexpr double kDeltas[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  CheckReport out = make_report("product-bound");
  for (int ai = 1; ai <= 9; ++ai) {
    const double a = 0.1 * ai;
    for (double delta : kDeltas) {
      for (Iteration s : kStarts) {
        const double ss = static_cast<double>(s);
        if (a / std::pow(ss, delta) >= 1.0) {
          out.skip();
          continue;
        }
        double log_lhs = 0.0;
        for (Iteration t = s + 1; t <= opt.product_t_max; ++t) {
          log_lhs += std::log1p(-a / std::pow(static_cast<double>(t - 1), delta));
          const double ts = static_cast<double>(t);
          const double log_rhs =
              delta < 1.0
                  ? -a / (1.0 - delta) * (std::pow(ts, 1.0 - delta) - std::pow(ss, 1.0 - delta))
                  : -a * std::log(ts / ss);
          // Log-space slack; 1e-12 relative on the original scale.
          out.record(log_rhs - log_lhs, 1e-12, 0, fmt("a delta s t", {a, delta, ss, ts}));
        }
      }
    }
  }
  return out;
}

CheckReport suite_telescope(const SuiteOptions& opt) {
  constexpr double kLambdas[] = {-3.0, 0.1, 7.0};
  CheckReport out = make_report("telescope", CheckKind::kIdentity);
  for (std::size_t k = 0; k < opt.random_instances; ++k) {
    const std::uint64_t seed = instance_seed(opt.seed, kIdTelescope, k);
    Rng rng(seed);
    const Iteration t = rand_int(rng, 1, 50);
    std::vector<double> beta(static_cast<std::size_t>(t - 1));
    for (auto& b : beta) b = rng.uniform(-2.0, 2.0);
    CheckReport rep = check_telescope(beta, kLambdas[k % 3], t);
    rep.worst_seed = seed;
    out.merge(rep);
  }
  return out;
}

std::vector<SumBoundCase> sum_bound_grid() {
  std::vector<SumBoundCase> grid;
  constexpr double kA[] = {0.05, 0.1, 0.3, 0.5, 0.9, 1.0};
  constexpr double kSigma[] = {0.3, 0.5, 0.8, 0.99, 1.0, 1.01, 1.5, 2.0, 3.0};
  constexpr double kDelta[] = {0.0, 0.25, 0.5, 0.75};
  for (double a : kA) {
    for (double sigma : kSigma) {
      for (double delta : kDelta) {
        if (delta < sigma) grid.push_back({a, sigma, delta});
      }
    }
  }
  constexpr double kA1[] = {0.1, 0.3, 0.5, 0.9, 1.0, 2.0};
  constexpr double kSigma1[] = {0.5, 0.99, 1.01, 1.5, 2.0, 3.0};
  for (double a : kA1) {
    for (double sigma : kSigma1) grid.push_back({a, sigma, 1.0});
  }
  return grid;
}

CheckReport suite_sum_bound(const SuiteOptions& opt) {
  CheckReport out = make_report("sum-bound");
  for (const SumBoundCase& c : sum_bound_grid()) {
    if (c.delta == 1.0 && std::abs(c.a - c.sigma + 1.0) < 1e-12) {
      out.skip();  // A is undefined on a - sigma + 1 = 0
      continue;
    }
    const double A = A_constant(c.a, c.sigma, c.delta);
    const double tau = sum_bound_tau(c.a, c.sigma, c.delta);
    const double expo = c.delta < 1.0 ? -(c.sigma - c.delta) : -std::min(c.sigma - 1.0, c.a);
    double S = 0.0;
    for (Iteration t = 1; t <= opt.sum_t_max; ++t) {
      const double ts = static_cast<double>(t);
      if (t > 1) {
        const double km = ts - 1.0;
        S = S * (1.0 - c.a / std::pow(km, c.delta)) + std::pow(km, -c.sigma);
      }
      if (ts <= tau) {
        out.skip();
        continue;
      }
      out.record(A * std::pow(ts, expo) - S, 1e-10, 0,
                 fmt("a sigma delta t", {c.a, c.sigma, c.delta, ts}));
    }
  }
  return out;
}

DistributedProblem make_convexity_instance(std::uint64_t seed) {
  Rng rng(seed);
  const int n = rand_int(rng, 1, 4), d = rand_int(rng, 1, 6);
  const WeightVector r = random_weights(rng, n);
  std::vector<LocalObjective> locals;
  Eigen::Index next = 0;
  for (int i = 0; i < n; ++i) {
    const int m = rand_int(rng, d, d + 10);
    std::vector<Eigen::Index> shard(static_cast<std::size_t>(m));
    for (auto& idx : shard) idx = next++;
    Matrix U = gaussian_matrix(rng, m, d);
    // Uneven column scales give anisotropic Hessians.
    for (int j = 0; j < d; ++j) U.col(j) *= std::pow(10.0, rng.uniform(-1.0, 1.0));
    locals.emplace_back(std::move(shard), std::move(U), gaussian_vector(rng, m));
  }
  return make_distributed(r, std::move(locals));
}

CheckReport suite_strong_convexity(const SuiteOptions& opt) {
  return fan_out("strong-convexity", CheckKind::kInequality, opt.random_instances, opt.jobs,
                 [&](std::size_t k) {
                   const std::uint64_t seed = instance_seed(opt.seed, kIdConvexity, k);
                   const DistributedProblem p = make_convexity_instance(seed);
                   Rng rng(stream_key(seed, Stream::kOracle, {1}));
                   const Vector x =
                       p.x_star + gaussian_vector(rng, p.dim()) * std::pow(10.0, rng.uniform(-3.0, 3.0));
                   CheckReport rep = check_strong_convexity_bound(p, x);
                   rep.worst_seed = seed;
                   return rep;
                 });
}

std::vector<CheckReport> run_lemma_suite(const SuiteOptions& opt) {
  using Suite = CheckReport (*)(const SuiteOptions&);
  constexpr Suite kSuites[] = {suite_contraction,  suite_submultiplicative, suite_young_vector,
                               suite_young_matrix, suite_product_bound,     suite_telescope,
                               suite_sum_bound,    suite_strong_convexity};
  std::vector<CheckReport> out;
  for (Suite s : kSuites) out.push_back(s(opt));
  return out;
}

}  // namespace dimix
