#include "dimix/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dimix/topology.hpp"

namespace dimix {

NoiseModel::NoiseModel(Kind kind) : kind_(kind) {
  if (const auto* g = std::get_if<GaussianChannel>(&kind_)) {
    if (!(g->sigma >= 0.0) || !std::isfinite(g->sigma)) {
      throw std::invalid_argument("gaussian channel: sigma must be finite and >= 0");
    }
  }
  if (const auto* q = std::get_if<StochasticQuantizer>(&kind_)) {
    if (q->levels < 1) throw std::invalid_argument("quantizer: s must be >= 1");
  }
}

std::string NoiseModel::describe() const {
  struct Visitor {
    std::string operator()(const Noiseless&) const { return "none"; }
    std::string operator()(const GaussianChannel& g) const {
      return "gaussian(" + std::to_string(g.sigma) + ")";
    }
    std::string operator()(const StochasticQuantizer& q) const {
      return "quantizer(" + std::to_string(q.levels) + ")";
    }
  };
  return std::visit(Visitor{}, kind_);
}

int zeta(double t, int s, double u) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("zeta: t must lie in [0, 1]");
  const double st = static_cast<double>(s) * t;
  const double lower = std::floor(st);
  const int k = static_cast<int>(lower) + (u < st - lower ? 1 : 0);
  return std::min(k, s);
}

Vector stochastic_quantize(std::span<const double> x, int s, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(x.size());
  Vector out = Vector::Zero(d);
  double sq = 0.0;
  for (double v : x) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm == 0.0) return out;
  const double scale = norm / static_cast<double>(s);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double xj = x[static_cast<std::size_t>(j)];
    // Rounding can push |x_j| / ||x|| a hair above 1.
    const double ratio = std::min(std::abs(xj) / norm, 1.0);
    const int level = zeta(ratio, s, rng.uniform());
    const double sign = xj > 0.0 ? 1.0 : (xj < 0.0 ? -1.0 : 0.0);
    out[j] = scale * sign * static_cast<double>(level);
  }
  return out;
}

Vector stochastic_quantize(const Vector& x, int s, Rng& rng) {
  return stochastic_quantize(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                             s, rng);
}

Vector neighbor_estimate(const NoiseModel& model, const RowVector& w_row, const Matrix& X,
                         Rng& rng) {
  if (w_row.size() != X.rows()) {
    throw std::invalid_argument("neighbor_estimate: row length does not match agent count");
  }
  if ((w_row.array() < 0.0).any() || std::abs(w_row.sum() - 1.0) > kStochasticTol) {
    throw std::invalid_argument("neighbor_estimate: weight row is not stochastic");
  }
  const Eigen::Index d = X.cols();
  Vector estimate = Vector::Zero(d);

  struct Visitor {
    const RowVector& w;
    const Matrix& X;
    Rng& rng;
    Vector& acc;

    void operator()(const Noiseless&) const {
      for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (w[j] > 0.0) acc += w[j] * X.row(j).transpose();
      }
    }
    void operator()(const GaussianChannel& g) const {
      const double sd = g.sigma / std::sqrt(static_cast<double>(X.cols()));
      for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (!(w[j] > 0.0)) continue;
        for (Eigen::Index k = 0; k < X.cols(); ++k) {
          acc[k] += w[j] * (X(j, k) + sd * rng.normal());
        }
      }
    }
    void operator()(const StochasticQuantizer& q) const {
      for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (!(w[j] > 0.0)) continue;
        const std::span<const double> xj(&X(j, 0), static_cast<std::size_t>(X.cols()));
        acc += w[j] * stochastic_quantize(xj, q.levels, rng);
      }
    }
  };
  std::visit(Visitor{w_row, X, rng, estimate}, model.kind());
  return estimate;
}

double noise_variance_bound(const NoiseModel& model, int d, double state_norm_bound) {
  struct Visitor {
    int d;
    double bound;
    double operator()(const Noiseless&) const { return 0.0; }
    double operator()(const GaussianChannel& g) const { return g.sigma * g.sigma; }
    double operator()(const StochasticQuantizer& q) const {
      const double s = q.levels;
      const double factor = std::min(std::sqrt(static_cast<double>(d)) / s,
                                     static_cast<double>(d) / (s * s));
      return factor * bound * bound;
    }
  };
  return std::visit(Visitor{d, state_norm_bound}, model.kind());
}

}  // namespace dimix
