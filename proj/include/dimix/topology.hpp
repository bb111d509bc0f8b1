#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dimix/types.hpp"

namespace dimix {

/// Absolute tolerance for row sums and stationarity checks.
inline constexpr double kStochasticTol = 1e-12;

/// Strictly positive stochastic vector r: the common stationary distribution
/// of the mixing matrices and the weights of the global objective.
class WeightVector {
 public:
  /// Validates r (positive entries, unit sum within kStochasticTol).
  explicit WeightVector(Vector r);

  /// r_i = p_i / sum(p). Throws std::invalid_argument on an empty input or a
  /// non-positive entry (the message names the index).
  static WeightVector from_positive(std::span<const double> p);

  static WeightVector uniform(std::size_t n);

  /// The experiment's random weights: p_i ~ U(0.01, 0.09), normalized.
  static WeightVector random(std::size_t n, std::uint64_t seed);

  const Vector& values() const { return r_; }
  double operator[](std::size_t i) const { return r_[static_cast<Eigen::Index>(i)]; }
  std::size_t size() const { return static_cast<std::size_t>(r_.size()); }
  double min() const { return r_min_; }
  double max() const { return r_.maxCoeff(); }

 private:
  Vector r_;
  double r_min_;
};

/// Row-stochastic n x n averaging matrix.
struct MixingMatrix {
  Matrix W;

  std::size_t size() const { return static_cast<std::size_t>(W.rows()); }

  /// Edge set {(j, i) : W_ij > 0}, as (sender, receiver) pairs.
  std::vector<std::pair<int, int>> edges() const;

  /// Smallest strictly positive entry (0 for the zero matrix).
  double min_positive() const;
};

/// Weights of the fixed undirected cycle: neighbours get
/// r_j / (2 (r_i + r_j)) and the diagonal takes the remaining mass.
/// Requires n >= 3.
MixingMatrix fixed_cycle_matrix(const WeightVector& r);

/// Cyclic gossip matrix at iteration t >= 1: only the pair of agents
/// (<t>, <t+1>) averages, with weights r_j / (r_<t> + r_<t+1>); everyone else
/// holds. Period n. Requires n >= 3.
MixingMatrix gossip_matrix(Iteration t, const WeightVector& r);

/// A deterministic rule t -> W(t) together with the constants of the
/// connectivity assumption. Immutable; safe to share between threads.
class MixingSchedule {
 public:
  using Generator = std::function<MixingMatrix(Iteration)>;

  MixingSchedule(std::string name, WeightVector r, Generator generator,
                 double eta, int window);

  /// W(t) = W for every t. B = 1, eta = smallest positive entry.
  static MixingSchedule fixed_cycle(const WeightVector& r);

  /// Cyclic gossip. B = n, eta = smallest positive entry over one period.
  static MixingSchedule gossip(const WeightVector& r);

  /// Matrices W(t) = list[(t - 1) mod size]. eta is computed over the list;
  /// B defaults to the list length when window <= 0.
  static MixingSchedule from_list(std::string name, const WeightVector& r,
                                  std::vector<MixingMatrix> list, int window = 0);

  MixingMatrix at(Iteration t) const;

  const std::string& name() const { return name_; }
  std::size_t size() const { return r_.size(); }
  const WeightVector& weights() const { return r_; }
  double eta() const { return eta_; }
  int window() const { return window_; }

  /// Same schedule with a different declared connectivity window.
  MixingSchedule with_window(int window) const;

 private:
  std::string name_;
  WeightVector r_;
  Generator generator_;
  double eta_;
  int window_;
};

/// Tarjan's strongly connected components over an adjacency list.
/// Returns the component index of each vertex.
std::vector<int> strongly_connected_components(
    const std::vector<std::vector<int>>& adjacency);

bool is_strongly_connected(std::size_t n, const std::vector<std::pair<int, int>>& edges);

struct ValidationReport {
  // (a) stochasticity
  double max_row_sum_deviation = 0.0;
  Iteration worst_row_sum_t = 0;
  int worst_row_sum_row = -1;
  double max_stationarity_deviation = 0.0;
  bool negative_entry = false;
  bool stochastic_ok = true;

  // (b) bounded nonzero entries
  double min_positive_entry = 0.0;
  bool eta_ok = true;

  // (c) B-connectivity over windows (t, t+B] for t in [1, horizon - B]
  Iteration windows_checked = 0;
  Iteration windows_failed = 0;
  Iteration first_failed_window = 0;
  bool connectivity_ok = true;

  bool passed() const { return stochastic_ok && eta_ok && connectivity_ok; }
};

/// Checks the three connectivity-assumption properties over t in [1, horizon].
/// Failures are reported, never thrown. horizon must be >= B.
ValidationReport validate_schedule(const MixingSchedule& schedule, Iteration horizon);

}  // namespace dimix
