#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dimix/algorithm.hpp"
#include "dimix/topology.hpp"
#include "dimix/types.hpp"

namespace dimix {

// ---------------------------------------------------------------------------
// r-norm calculus
// ---------------------------------------------------------------------------

/// ||A||_r^2 = sum_i r_i ||A_i||^2.
double r_norm_sq(const Matrix& A, const WeightVector& r);
double r_norm(const Matrix& A, const WeightVector& r);

/// x_bar = r^T X.
Vector weighted_average(const Matrix& X, const WeightVector& r);

/// ||X - 1 x_bar||_r^2 with x_bar = r^T X.
double deviation_sq(const Matrix& X, const WeightVector& r);

/// ||X - 1 x*||_r^2.
double dist_opt_sq(const Matrix& X, const WeightVector& r, const Vector& x_star);

// ---------------------------------------------------------------------------
// Theory constants
// ---------------------------------------------------------------------------

struct Contraction {
  double lambda = 0.0;
  double kappa = 1.0;
};

/// lambda = eta r_min / (2 B n^2), kappa = 1 / (1 - B lambda beta0).
/// Throws std::domain_error when B lambda beta0 >= 1.
Contraction contraction_factor(double eta, double r_min, int B, std::size_t n, double beta0);
Contraction contraction_factor(const MixingSchedule& schedule, const StepSchedule& sched);

/// pi(t:s) = beta(s) kappa^(1/2) prod_{k=s+1}^{t-1} (1 - lambda beta(k))^(1/2).
/// Products longer than 10^4 factors are accumulated in log space.
double pi_factor(Iteration t, Iteration s, const StepSchedule& sched, double lambda, double kappa);
double pi_factor(Iteration t, Iteration s, const std::function<double(Iteration)>& beta,
                 double lambda, double kappa);

/// Iteration thresholds. Values can exceed 2^63, so they are kept as doubles
/// holding integers.
struct Thresholds {
  double T1 = 1.0;
  double T2 = 1.0;
  double T3 = 1.0;
  std::optional<double> T4;  // only when mu + nu < 1

  double T0() const { return std::max({T1, T2, T3}); }
  double all() const { return T4 ? std::max(T0(), *T4) : T0(); }
};

/// T1 = ceil((2 mu / (lambda beta0))^(1/(1-mu))),
/// T2 = ceil((8 nu / (lambda beta0))^(1/(1-mu))),
/// T3 = ceil((alpha0 beta0 (mu_f + L_f) / 2)^(1/(mu+nu))),
/// T4 = ceil((2 min(mu-nu, 2nu) / (c2 alpha0 beta0))^(1/(1-mu-nu))) when mu+nu < 1.
/// Throws std::domain_error when mu + nu > 1.
Thresholds thresholds(const StepSchedule& sched, double lambda, double mu_f, double L_f);

/// The piecewise constant A(a, sigma, delta) of the weighted sum bound.
/// delta = 1 uses 2^sigma (1 + 1/|a - sigma + 1|). Throws std::domain_error
/// outside every branch.
double A_constant(double a, double sigma, double delta);

enum class Regime { kMuPlusNuBelowOne, kMuPlusNuEqualsOne };

/// Tolerance for treating mu + nu as exactly 1.
inline constexpr double kRegimeTol = 1e-12;

Regime regime_of(const StepSchedule& sched);

/// Inputs of the convergence theorem beyond the step schedule.
struct TheoryInputs {
  double lambda = 0.0;
  double kappa = 1.0;
  double mu_f = 0.0;
  double L_f = 0.0;
  double gamma = 0.0;  // noise second-moment bound
  double K = 0.0;      // gradient bound along the trajectory
  double Q_T0 = 0.0;   // E||x_bar(T0) - x*||^2
};

struct TheoryParams {
  TheoryInputs in;
  double c1 = 0.0;
  double c2 = 0.0;
  Thresholds T;
  Regime regime = Regime::kMuPlusNuBelowOne;
  double eps1 = 0.0, eps2 = 0.0, eps3 = 0.0, eps4 = 0.0, eps5 = 0.0;
  double xi1 = 0.0, xi2 = 0.0, xi3 = 0.0, xi4 = 0.0, xi5 = 0.0;
  /// ln(xi2 / (2 Q_T0)) = xi3 T0^(1-mu-nu); kept separately because xi2
  /// itself overflows for realistic T0.
  double xi2_log_factor = 0.0;
  /// mu + nu = 1 additionally needs alpha0 beta0 >= (mu_f+L_f)/(mu_f L_f) min(2mu-1, 2nu).
  bool regime_condition_ok = true;
};

/// Evaluates c1, c2, thresholds, eps1..eps5 and xi1..xi5. Pure: equal inputs
/// give bit-identical outputs.
TheoryParams xi_constants(const TheoryInputs& in, const StepSchedule& sched);

/// Right-hand side of the convergence bound at iteration T. Throws
/// std::domain_error naming the threshold when T is below it, or when the
/// mu + nu = 1 step-size condition fails.
double theorem_bound(double T, const TheoryParams& theory, const StepSchedule& sched);

// ---------------------------------------------------------------------------
// Empirical rates
// ---------------------------------------------------------------------------

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t points = 0;
};

/// Least-squares line through (ln t, ln value).
RateFit fit_loglog(std::span<const double> t, std::span<const double> values);

/// fit_loglog over the curve's points with t in [t_min, t_max]; `curve[k]`
/// is the value at t = k + 1. Throws std::invalid_argument on non-positive values.
RateFit fit_rate(std::span<const double> curve, Iteration t_min, Iteration t_max);

}  // namespace dimix
