#include "dimix/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dimix {
namespace {

void require_rows(const Matrix& A, const WeightVector& r, const char* what) {
  if (static_cast<std::size_t>(A.rows()) != r.size()) {
    throw std::invalid_argument(std::string(what) + ": matrix has " + std::to_string(A.rows()) +
                                " rows but r has " + std::to_string(r.size()) + " entries");
  }
}

double ceil_pow(double base, double exponent) {
  return std::max(1.0, std::ceil(std::pow(base, exponent)));
}

}  // namespace

double r_norm_sq(const Matrix& A, const WeightVector& r) {
  require_rows(A, r, "r_norm");
  return r.values().dot(A.rowwise().squaredNorm());
}

double r_norm(const Matrix& A, const WeightVector& r) { return std::sqrt(r_norm_sq(A, r)); }

Vector weighted_average(const Matrix& X, const WeightVector& r) {
  require_rows(X, r, "weighted_average");
  return (r.values().transpose() * X).transpose();
}

double deviation_sq(const Matrix& X, const WeightVector& r) {
  const RowVector x_bar = weighted_average(X, r).transpose();
  return r_norm_sq(X.rowwise() - x_bar, r);
}

double dist_opt_sq(const Matrix& X, const WeightVector& r, const Vector& x_star) {
  if (x_star.size() != X.cols()) throw std::invalid_argument("dist_opt_sq: dimension mismatch");
  return r_norm_sq(X.rowwise() - x_star.transpose(), r);
}

Contraction contraction_factor(double eta, double r_min, int B, std::size_t n, double beta0) {
  const double nn = static_cast<double>(n);
  Contraction c;
  c.lambda = eta * r_min / (2.0 * B * nn * nn);
  const double product = B * c.lambda * beta0;
  if (product >= 1.0) {
    throw std::domain_error("contraction_factor: B lambda beta0 = " + std::to_string(product) +
                            " >= 1, kappa undefined");
  }
  c.kappa = 1.0 / (1.0 - product);
  return c;
}

Contraction contraction_factor(const MixingSchedule& schedule, const StepSchedule& sched) {
  return contraction_factor(schedule.eta(), schedule.weights().min(), schedule.window(),
                            schedule.size(), sched.beta0());
}

double pi_factor(Iteration t, Iteration s, const StepSchedule& sched, double lambda,
                 double kappa) {
  return pi_factor(t, s, [&](Iteration k) { return sched.beta(k); }, lambda, kappa);
}

double pi_factor(Iteration t, Iteration s, const std::function<double(Iteration)>& beta,
                 double lambda, double kappa) {
  if (!(s >= 1 && s < t)) throw std::invalid_argument("pi_factor: need 1 <= s < t");
  const Iteration count = t - 1 - s;
  double product = 1.0;
  if (count > 10000) {
    double log_sum = 0.0;
    for (Iteration k = s + 1; k <= t - 1; ++k) {
      const double x = lambda * beta(k);
      if (x >= 1.0) throw std::domain_error("pi_factor: lambda beta(k) >= 1");
      log_sum += std::log1p(-x);
    }
    product = std::exp(0.5 * log_sum);
  } else {
    for (Iteration k = s + 1; k <= t - 1; ++k) {
      const double x = lambda * beta(k);
      if (x >= 1.0) throw std::domain_error("pi_factor: lambda beta(k) >= 1");
      product *= std::sqrt(1.0 - x);
    }
  }
  return beta(s) * std::sqrt(kappa) * product;
}

Regime regime_of(const StepSchedule& sched) {
  const double sum = sched.mu() + sched.nu();
  if (sum > 1.0 + kRegimeTol) {
    throw std::domain_error("mu + nu = " + std::to_string(sum) + " > 1 is outside the theorem");
  }
  return std::abs(sum - 1.0) <= kRegimeTol ? Regime::kMuPlusNuEqualsOne
                                           : Regime::kMuPlusNuBelowOne;
}

Thresholds thresholds(const StepSchedule& sched, double lambda, double mu_f, double L_f) {
  const Regime regime = regime_of(sched);
  const double mu = sched.mu(), nu = sched.nu();
  const double ab = sched.alpha0() * sched.beta0();
  const double lb = lambda * sched.beta0();
  Thresholds T;
  T.T1 = ceil_pow(2.0 * mu / lb, 1.0 / (1.0 - mu));
  T.T2 = ceil_pow(8.0 * nu / lb, 1.0 / (1.0 - mu));
  T.T3 = ceil_pow(ab * (mu_f + L_f) / 2.0, 1.0 / (mu + nu));
  if (regime == Regime::kMuPlusNuBelowOne) {
    const double c2 = mu_f * L_f / (mu_f + L_f);
    T.T4 = ceil_pow(2.0 * std::min(mu - nu, 2.0 * nu) / (c2 * ab), 1.0 / (1.0 - mu - nu));
  }
  return T;
}

double A_constant(double a, double sigma, double delta) {
  if (!(sigma > 0.0)) throw std::domain_error("A_constant: sigma must be positive");
  if (delta == 1.0) {
    if (!(a > 0.0)) throw std::domain_error("A_constant: a must be positive");
    const double gap = std::abs(a - sigma + 1.0);
    if (gap == 0.0) throw std::domain_error("A_constant: excluded case a - sigma + 1 = 0");
    return std::pow(2.0, sigma) * (1.0 + 1.0 / gap);
  }
  if (!(a > 0.0 && a <= 1.0)) throw std::domain_error("A_constant: a must lie in (0, 1]");
  if (!(delta >= 0.0 && delta < std::min(1.0, sigma))) {
    throw std::domain_error("A_constant: need 0 <= delta < min(1, sigma)");
  }
  const double lead = std::pow(2.0, sigma);
  const double base = 1.0 + 2.0 / a;
  if (sigma > 1.0) {
    const double tail = 1.0 + (1.0 / (sigma - 1.0)) *
                                  std::pow(2.0 * (sigma - delta) / a,
                                           (sigma - delta) / (1.0 - delta));
    return lead * std::max(base, tail);
  }
  if (sigma == 1.0) {
    const double tail = 1.0 + (2.0 / a) * std::log(2.0 * (1.0 - delta) / a);
    return lead * std::max(base, tail);
  }
  const double tail = 1.0 + 2.0 * (sigma - delta) / (a * (1.0 - sigma));
  return lead * std::max(base, tail);
}

TheoryParams xi_constants(const TheoryInputs& in, const StepSchedule& sched) {
  if (!(in.mu_f > 0.0)) {
    throw std::domain_error("xi_constants: mu_f = 0, the objective is not strongly convex");
  }
  TheoryParams p;
  p.in = in;
  p.regime = regime_of(sched);
  p.c1 = 1.0 / (in.mu_f + in.L_f);
  p.c2 = in.mu_f * in.L_f / (in.mu_f + in.L_f);
  p.T = thresholds(sched, in.lambda, in.mu_f, in.L_f);

  const double mu = sched.mu(), nu = sched.nu();
  const double a0 = sched.alpha0(), b0 = sched.beta0();
  const double ab = a0 * b0;
  const double lam = in.lambda, kap = in.kappa;
  const double gamma = in.gamma, K = in.K, L = in.L_f, m = in.mu_f;
  const double sigma_q = std::min(2.0 * mu, 3.0 * nu + mu);
  const double delta_q = p.regime == Regime::kMuPlusNuEqualsOne ? 1.0 : mu + nu;

  const double A_noise = A_constant(lam * b0, 2.0 * mu, mu);
  const double A_grad = A_constant(lam * b0 / 2.0, 2.0 * nu + mu, mu);
  const double A_avg = A_constant(p.c2 * ab, sigma_q, delta_q);

  p.eps1 = gamma * kap * b0 * b0 * A_noise;
  p.eps2 = K * a0 * a0 * b0 * std::sqrt(kap) * A_grad;
  p.eps3 = 2.0 * p.eps1 + 4.0 * std::sqrt(kap) * p.eps2 / lam;
  p.eps4 = ab * (1.0 + 1.0 / p.c2) * L * p.eps3 + gamma * b0 * b0;
  p.eps5 = A_avg;

  p.xi1 = 4.0 * gamma * kap * b0 * b0 * A_noise + 8.0 * K * kap * a0 * a0 * b0 / lam * A_grad;
  p.xi4 = (ab * (m * L + m + L) * p.xi1 / m + 2.0 * gamma * b0 * b0) * A_avg;

  const double T0 = p.T.T0();
  if (p.regime == Regime::kMuPlusNuBelowOne) {
    p.xi3 = ab * m * L / ((1.0 - mu - nu) * (m + L));
    p.xi2_log_factor = p.xi3 * std::pow(T0, 1.0 - mu - nu);
    p.xi2 = 2.0 * std::exp(p.xi2_log_factor) * in.Q_T0;
  } else {
    p.xi5 = 2.0 * std::pow(T0, ab * m * L / (m + L)) * in.Q_T0 + p.xi4;
    p.regime_condition_ok = ab >= (m + L) / (m * L) * std::min(2.0 * mu - 1.0, 2.0 * nu);
  }
  return p;
}

double theorem_bound(double T, const TheoryParams& theory, const StepSchedule& sched) {
  const double mu = sched.mu(), nu = sched.nu();
  auto require = [&](double threshold, const char* name) {
    if (T < threshold) {
      throw std::domain_error("theorem_bound: T = " + std::to_string(T) + " is below " + name +
                              " = " + std::to_string(threshold));
    }
  };
  require(theory.T.T1, "T1");
  require(theory.T.T2, "T2");
  require(theory.T.T3, "T3");
  const double consensus_term = theory.xi1 * std::pow(T, -std::min(mu, 2.0 * nu));
  const double tail_exponent = -std::min(mu - nu, 2.0 * nu);

  if (theory.regime == Regime::kMuPlusNuEqualsOne) {
    if (!theory.regime_condition_ok) {
      throw std::domain_error("theorem_bound: alpha0 beta0 violates the mu + nu = 1 condition");
    }
    return consensus_term + theory.xi5 * std::pow(T, tail_exponent);
  }
  require(*theory.T.T4, "T4");
  const double p = 1.0 - mu - nu;
  // xi2 exp(-xi3 T^p) = 2 Q(T0) exp(xi3 (T0^p - T^p)); the product form never overflows.
  const double transient =
      theory.in.Q_T0 == 0.0
          ? 0.0
          : 2.0 * theory.in.Q_T0 *
                std::exp(theory.xi3 * (std::pow(theory.T.T0(), p) - std::pow(T, p)));
  return consensus_term + transient + theory.xi4 * std::pow(T, tail_exponent);
}

RateFit fit_loglog(std::span<const double> t, std::span<const double> values) {
  if (t.size() != values.size()) throw std::invalid_argument("fit_loglog: size mismatch");
  if (t.size() < 2) throw std::invalid_argument("fit_loglog: need at least two points");
  const std::size_t m = t.size();
  std::vector<double> x(m), y(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (!(values[k] > 0.0) || !(t[k] > 0.0)) {
      throw std::invalid_argument("fit_loglog: values must be positive");
    }
    x[k] = std::log(t[k]);
    y[k] = std::log(values[k]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  RateFit fit;
  fit.points = m;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (m > 2) {
    double sse = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double e = y[k] - fit.intercept - fit.slope * x[k];
      sse += e * e;
    }
    fit.slope_stderr = std::sqrt(sse / static_cast<double>(m - 2) / sxx);
  }
  return fit;
}

RateFit fit_rate(std::span<const double> curve, Iteration t_min, Iteration t_max) {
  if (!(t_min >= 1 && t_min < t_max && t_max <= static_cast<Iteration>(curve.size()))) {
    throw std::invalid_argument("fit_rate: bad t range");
  }
  std::vector<double> t, v;
  for (Iteration k = t_min; k <= t_max; ++k) {
    t.push_back(static_cast<double>(k));
    v.push_back(curve[static_cast<std::size_t>(k - 1)]);
  }
  return fit_loglog(t, v);
}

}  // namespace dimix
