#pragma once

#include <span>
#include <string>
#include <variant>

#include "dimix/rng.hpp"
#include "dimix/types.hpp"

namespace dimix {

struct Noiseless {};

/// Every link (j -> i) adds an independent zero-mean Gaussian vector with
/// E||z||^2 = sigma^2, i.e. per-coordinate variance sigma^2 / d.
struct GaussianChannel {
  double sigma = 0.0;
};

/// Unbiased stochastic quantizer with `levels` = s quantization levels.
struct StochasticQuantizer {
  int levels = 1;
};

/// How agent i's estimate of the weighted neighbour average is corrupted.
class NoiseModel {
 public:
  using Kind = std::variant<Noiseless, GaussianChannel, StochasticQuantizer>;

  NoiseModel() = default;
  explicit NoiseModel(Kind kind);

  static NoiseModel noiseless() { return NoiseModel(Noiseless{}); }
  static NoiseModel gaussian(double sigma) { return NoiseModel(GaussianChannel{sigma}); }
  static NoiseModel quantizer(int levels) { return NoiseModel(StochasticQuantizer{levels}); }

  const Kind& kind() const { return kind_; }
  bool is_noiseless() const { return std::holds_alternative<Noiseless>(kind_); }
  std::string describe() const;

 private:
  Kind kind_ = Noiseless{};
};

/// Randomized rounding: floor(s t) + 1[u < s t - floor(s t)]. t must lie in
/// [0, 1]; the result is in {0, ..., s}.
int zeta(double t, int s, double u);

/// Q_s(x): coordinate j is ||x|| sign(x_j) zeta(|x_j| / ||x||, s, u_j) / s with a
/// fresh uniform u_j per coordinate. The zero vector maps to itself.
Vector stochastic_quantize(std::span<const double> x, int s, Rng& rng);
Vector stochastic_quantize(const Vector& x, int s, Rng& rng);

/// x_hat_i = sum_j w_j (x_j + noise_ij) for the given model. Terms with w_j = 0
/// draw nothing. Throws std::invalid_argument when w_row is not a stochastic row.
Vector neighbor_estimate(const NoiseModel& model, const RowVector& w_row, const Matrix& X,
                         Rng& rng);

/// Conditional second-moment bound gamma for the model: 0 (noiseless), sigma^2
/// (Gaussian channel) or min(sqrt(d)/s, d/s^2) * state_norm_bound^2 (quantizer).
double noise_variance_bound(const NoiseModel& model, int d, double state_norm_bound);

}  // namespace dimix
