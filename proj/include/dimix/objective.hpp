#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dimix/topology.hpp"
#include "dimix/types.hpp"

namespace dimix {

/// Synthetic linear-regression data: v_k = u_k . x_tilde + theta_k.
struct RegressionProblem {
  Matrix U;        // N x d features, entries ~ U(0, 1)
  Vector v;        // N targets
  Vector x_tilde;  // d true parameters, entries ~ U(0, 0.8)
  Vector theta;    // N target noises, entries ~ U(0, noise_width)
  std::uint64_t seed = 0;
  double noise_width = 0.1;

  Eigen::Index samples() const { return U.rows(); }
  Eigen::Index dim() const { return U.cols(); }

  /// (1 / 2N) sum_k (v_k - u_k . x)^2.
  double pooled_loss(const Vector& x) const;

  /// True when U has full column rank (N >= d is necessary).
  bool has_unique_optimum() const;
};

/// Draws a problem from `seed`. Same seed, same problem, bit for bit.
RegressionProblem synthesize(Eigen::Index N, Eigen::Index d, std::uint64_t seed,
                             double noise_width = 0.1);

/// Structured text: seed and dimensions always; matrices when `embed_data`.
void write_problem(std::ostream& os, const RegressionProblem& problem, bool embed_data);
RegressionProblem read_problem(std::istream& is);

/// Shard-mean least squares f_i(x) = (1 / 2|S_i|) sum_{k in S_i} (v_k - u_k . x)^2.
/// The Hessian is constant, so curvature constants are exact eigenvalues.
class LocalObjective {
 public:
  LocalObjective(std::vector<Eigen::Index> shard, Matrix U, Vector v);

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;

  const std::vector<Eigen::Index>& shard() const { return shard_; }
  const Matrix& features() const { return U_; }
  const Vector& targets() const { return v_; }
  const Matrix& hessian() const { return H_; }
  /// (1 / |S_i|) U_i^T v_i, so that gradient(x) = H x - linear_term().
  const Vector& linear_term() const { return b_; }
  double mu() const { return mu_; }
  double L() const { return L_; }
  Eigen::Index dim() const { return U_.cols(); }

 private:
  std::vector<Eigen::Index> shard_;
  Matrix U_;
  Vector v_;
  Matrix H_;
  Vector b_;
  double c_;  // v^T v / (2 |S_i|)
  double mu_;
  double L_;
};

/// Largest-remainder apportionment of `total` items by weights r; ties in the
/// remainder go to the lower index. Shards left empty take one item from the
/// currently largest shard. `stolen` (optional) receives the indices of shards
/// that had to borrow.
std::vector<std::size_t> apportion(std::size_t total, const WeightVector& r,
                                   std::vector<std::size_t>* stolen = nullptr);

struct PartitionResult {
  std::vector<LocalObjective> locals;
  std::vector<std::size_t> borrowed;  // shards that received a stolen point
};

/// Seeded shuffle of the sample indices followed by a contiguous split into
/// apportioned shard sizes. Requires n <= N.
PartitionResult partition(const RegressionProblem& problem, const WeightVector& r,
                          std::uint64_t seed);

/// x* minimizing sum_i r_i f_i, by a direct solve of the weighted normal
/// equations. Throws std::domain_error (with a condition estimate) when the
/// weighted Hessian is singular.
Vector global_optimum(std::span<const LocalObjective> locals, const WeightVector& r);

/// sum_i r_i H_i.
Matrix weighted_hessian(std::span<const LocalObjective> locals, const WeightVector& r);

/// sum_i r_i f_i(x_i) with agent i evaluated at row i of X.
double weighted_loss(std::span<const LocalObjective> locals, const WeightVector& r,
                     const Matrix& X);

/// sum_i r_i grad f_i(x).
Vector weighted_gradient(std::span<const LocalObjective> locals, const WeightVector& r,
                         const Vector& x);

struct SmoothnessConstants {
  double mu_f = 0.0;
  double L_f = 0.0;
  std::vector<double> mu_i;
  std::vector<double> L_i;
  bool strongly_convex() const { return mu_f > 0.0; }
  double c1() const { return 1.0 / (mu_f + L_f); }
  double c2() const { return mu_f * L_f / (mu_f + L_f); }
};

/// Extreme eigenvalues of each shard Hessian and of the r-weighted sum.
SmoothnessConstants smoothness_constants(std::span<const LocalObjective> locals,
                                         const WeightVector& r);

/// Extreme eigenvalues of a symmetric matrix (min, max).
std::pair<double, double> extreme_eigenvalues(const Matrix& symmetric);

/// Everything the dynamics and the diagnostics need about one problem
/// instance spread over n agents.
struct DistributedProblem {
  WeightVector r;
  std::vector<LocalObjective> locals;
  Vector x_star;
  SmoothnessConstants constants;
  std::optional<RegressionProblem> pooled;

  std::size_t agents() const { return locals.size(); }
  Eigen::Index dim() const { return x_star.size(); }
};

/// Bundles locals with their weighted optimum and constants.
DistributedProblem make_distributed(WeightVector r, std::vector<LocalObjective> locals,
                                    std::optional<RegressionProblem> pooled = std::nullopt);

}  // namespace dimix
