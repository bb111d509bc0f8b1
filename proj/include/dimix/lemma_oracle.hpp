#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dimix/algorithm.hpp"
#include "dimix/objective.hpp"
#include "dimix/topology.hpp"
#include "dimix/types.hpp"

namespace dimix {

enum class CheckKind { kInequality, kIdentity };

/// Outcome of one lemma check over one or more instances. Slack is
/// RHS - LHS for inequalities and -|LHS - RHS| for identities; negative
/// slack beyond the tolerance is a violation.
struct CheckReport {
  std::string lemma;
  CheckKind kind = CheckKind::kInequality;
  std::size_t instances = 0;
  std::size_t skipped = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  /// Tolerance that applied to the worst instance.
  double worst_tolerance = 0.0;
  std::uint64_t worst_seed = 0;
  std::string worst_instance;
  std::size_t violations = 0;

  bool passed() const { return violations == 0; }

  /// Records one instance. A violation is slack < -tolerance.
  void record(double slack, double tolerance, std::uint64_t seed, std::string description);
  void skip() { ++skipped; }
  /// Folds another report on the same lemma into this one.
  void merge(const CheckReport& other);
};

// -- single-instance checks -------------------------------------------------

/// ||(A(t-1)...A(s+1) - 1 r^T) U||_r^2 <= kappa prod_{k=s+1}^{t-1}(1 - lambda beta(k)) ||U||_r^2
/// with A(k) = (1 - beta(k)) I + beta(k) W(k). Skipped when B lambda beta0 >= 1.
CheckReport check_contraction(const MixingSchedule& schedule,
                              const std::function<double(Iteration)>& beta, double beta0,
                              const Matrix& U, Iteration s, Iteration t);
CheckReport check_contraction(const MixingSchedule& schedule, const StepSchedule& sched,
                              const Matrix& U, Iteration s, Iteration t);

/// ||A B||_r <= ||A||_r ||B||_F.
CheckReport check_submultiplicative(const Matrix& A, const Matrix& B, const WeightVector& r);

/// ||u + v||^2 <= (1 + theta) ||u||^2 + (1 + 1/theta) ||v||^2. Throws on theta <= 0.
CheckReport check_young(const Vector& u, const Vector& v, double theta);
/// The r-norm form ||U + V||_r^2 <= (1 + theta)||U||_r^2 + (1 + 1/theta)||V||_r^2.
CheckReport check_young(const Matrix& U, const Matrix& V, const WeightVector& r, double theta);

/// prod_{k=s}^{t-1} (1 - a / k^delta) against exp(-a/(1-delta) (t^(1-delta) - s^(1-delta)))
/// for delta < 1, or (t/s)^(-a) for delta = 1. Skipped when a / s^delta >= 1.
CheckReport check_product_bound(double a, double delta, Iteration s, Iteration t);

/// sum_{s=1}^{t-1} beta(s) prod_{k=s+1}^{t-1}(1 - lambda beta(k))
///   = 1/lambda - (1/lambda) prod_{k=1}^{t-1}(1 - lambda beta(k)).
/// beta_seq[k - 1] is beta(k). Tolerance 1e-10 relative to the magnitude
/// of the terms (at least max(1, 1/|lambda|)).
CheckReport check_telescope(const std::vector<double>& beta_seq, double lambda, Iteration t);

/// sum_{s=1}^{t-1} s^(-sigma) prod_{k=s+1}^{t-1}(1 - a/k^delta) <= A(a,sigma,delta) t^(-(sigma-delta)),
/// or with exponent -min(sigma - 1, a) when delta = 1. Skipped when t <= tau.
CheckReport check_sum_bound(double a, double sigma, double delta, Iteration t);

/// <x - x*, grad f(x)> >= c1 ||grad f(x)||^2 + c2 ||x - x*||^2 for f = sum_i r_i f_i.
/// Skipped when mu_f = 0.
CheckReport check_strong_convexity_bound(const DistributedProblem& problem, const Vector& x);

/// Weighted sum of the lemma, left side, by the O(t) recursion
/// S(t+1) = S(t) (1 - a/t^delta) + t^(-sigma).
double weighted_sum(double a, double sigma, double delta, Iteration t);

/// Threshold tau = (2 (sigma - delta) / a)^(1 / (1 - delta)); 1 for delta = 1.
double sum_bound_tau(double a, double sigma, double delta);

// -- default-grid suites ----------------------------------------------------

/// Instance generators, exposed so any report's worst seed can be replayed.
struct ContractionInstance {
  MixingSchedule schedule;
  StepSchedule sched;
  Matrix U;
  Iteration s;
  Iteration t;
};
ContractionInstance make_contraction_instance(std::uint64_t seed);

/// Random strongly convex least-squares instance (1-4 agents, d <= 6).
DistributedProblem make_convexity_instance(std::uint64_t seed);

struct SumBoundCase {
  double a;
  double sigma;
  double delta;
};

/// Parameter grid of the sum-bound suite: every sigma branch, including
/// sigma = 1 +- 0.01, and the delta = 1 branch.
std::vector<SumBoundCase> sum_bound_grid();

struct SuiteOptions {
  std::uint64_t seed = 20240601;
  std::size_t random_instances = 1000;  // per randomized check
  Iteration product_t_max = 10000;
  Iteration sum_t_max = 2000;
  unsigned jobs = 1;
};

CheckReport suite_contraction(const SuiteOptions& opt);
CheckReport suite_submultiplicative(const SuiteOptions& opt);
CheckReport suite_young_vector(const SuiteOptions& opt);
CheckReport suite_young_matrix(const SuiteOptions& opt);
CheckReport suite_product_bound(const SuiteOptions& opt);
CheckReport suite_telescope(const SuiteOptions& opt);
CheckReport suite_sum_bound(const SuiteOptions& opt);
CheckReport suite_strong_convexity(const SuiteOptions& opt);

/// All lemma checks over their default grids, possibly on several threads.
std::vector<CheckReport> run_lemma_suite(const SuiteOptions& opt = {});

}  // namespace dimix
