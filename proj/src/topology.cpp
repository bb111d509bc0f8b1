#include "dimix/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "dimix/rng.hpp"

namespace dimix {
namespace {

// 0-based position of the 1-based cyclic index <i> = (i mod n) + 1 for a 1-based i.
std::size_t wrap(Iteration i, std::size_t n) {
  const auto m = static_cast<Iteration>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

void require_cycle(std::size_t n, const char* what) {
  if (n < 3) {
    throw std::invalid_argument(std::string(what) + ": need n >= 3 agents, got " +
                                std::to_string(n));
  }
}

}  // namespace

WeightVector::WeightVector(Vector r) : r_(std::move(r)) {
  if (r_.size() == 0) throw std::invalid_argument("weight vector: empty");
  for (Eigen::Index i = 0; i < r_.size(); ++i) {
    if (!(r_[i] > 0.0) || !std::isfinite(r_[i])) {
      throw std::invalid_argument("weight vector: entry " + std::to_string(i) +
                                  " is not strictly positive");
    }
  }
  if (std::abs(r_.sum() - 1.0) > kStochasticTol) {
    throw std::invalid_argument("weight vector: entries do not sum to 1");
  }
  r_min_ = r_.minCoeff();
}

WeightVector WeightVector::from_positive(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("weight vector: empty input");
  Vector r(static_cast<Eigen::Index>(p.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0) || !std::isfinite(p[i])) {
      throw std::invalid_argument("weight vector: entry " + std::to_string(i) +
                                  " is not strictly positive");
    }
    r[static_cast<Eigen::Index>(i)] = p[i];
    total += p[i];
  }
  return WeightVector(r / total);
}

WeightVector WeightVector::uniform(std::size_t n) {
  if (n == 0) throw std::invalid_argument("weight vector: empty input");
  return WeightVector(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
}

WeightVector WeightVector::random(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::kWeights);
  std::vector<double> p(n);
  for (double& x : p) x = rng.uniform(0.01, 0.09);
  return from_positive(p);
}

std::vector<std::pair<int, int>> MixingMatrix::edges() const {
  std::vector<std::pair<int, int>> out;
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      if (W(i, j) > 0.0) out.emplace_back(static_cast<int>(j), static_cast<int>(i));
    }
  }
  return out;
}

double MixingMatrix::min_positive() const {
  double m = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < W.size(); ++k) {
    const double w = W.data()[k];
    if (w > 0.0) m = std::min(m, w);
  }
  return std::isinf(m) ? 0.0 : m;
}

MixingMatrix fixed_cycle_matrix(const WeightVector& r) {
  const std::size_t n = r.size();
  require_cycle(n, "fixed_cycle_matrix");
  Matrix W = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = wrap(static_cast<Iteration>(i) - 1, n);
    const std::size_t next = wrap(static_cast<Iteration>(i) + 1, n);
    const auto ii = static_cast<Eigen::Index>(i);
    W(ii, static_cast<Eigen::Index>(prev)) = r[prev] / (2.0 * (r[i] + r[prev]));
    W(ii, static_cast<Eigen::Index>(next)) = r[next] / (2.0 * (r[i] + r[next]));
    W(ii, ii) = r[i] / (2.0 * (r[i] + r[next])) + r[i] / (2.0 * (r[i] + r[prev]));
  }
  return {std::move(W)};
}

MixingMatrix gossip_matrix(Iteration t, const WeightVector& r) {
  if (t < 1) throw std::invalid_argument("gossip_matrix: t must be >= 1");
  const std::size_t n = r.size();
  require_cycle(n, "gossip_matrix");
  const auto a = static_cast<Eigen::Index>(wrap(t, n));
  const auto c = static_cast<Eigen::Index>(wrap(t + 1, n));
  Matrix W = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double pair = r.values()[a] + r.values()[c];
  for (Eigen::Index i : {a, c}) {
    for (Eigen::Index j : {a, c}) W(i, j) = r.values()[j] / pair;
  }
  return {std::move(W)};
}

MixingSchedule::MixingSchedule(std::string name, WeightVector r, Generator generator,
                               double eta, int window)
    : name_(std::move(name)),
      r_(std::move(r)),
      generator_(std::move(generator)),
      eta_(eta),
      window_(window) {
  if (!(eta_ > 0.0)) throw std::invalid_argument("mixing schedule: eta must be positive");
  if (window_ < 1) throw std::invalid_argument("mixing schedule: B must be >= 1");
}

MixingSchedule MixingSchedule::fixed_cycle(const WeightVector& r) {
  MixingMatrix W = fixed_cycle_matrix(r);
  const double eta = W.min_positive();
  return MixingSchedule("fixed_cycle", r, [W = std::move(W)](Iteration) { return W; }, eta, 1);
}

MixingSchedule MixingSchedule::gossip(const WeightVector& r) {
  const std::size_t n = r.size();
  double eta = std::numeric_limits<double>::infinity();
  for (Iteration t = 1; t <= static_cast<Iteration>(n); ++t) {
    eta = std::min(eta, gossip_matrix(t, r).min_positive());
  }
  return MixingSchedule("gossip", r, [r](Iteration t) { return gossip_matrix(t, r); }, eta,
                        static_cast<int>(n));
}

MixingSchedule MixingSchedule::from_list(std::string name, const WeightVector& r,
                                         std::vector<MixingMatrix> list, int window) {
  if (list.empty()) throw std::invalid_argument("mixing schedule: empty matrix list");
  const auto n = static_cast<Eigen::Index>(r.size());
  double eta = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < list.size(); ++k) {
    if (list[k].W.rows() != n || list[k].W.cols() != n) {
      throw std::invalid_argument("mixing schedule: matrix " + std::to_string(k + 1) +
                                  " is not " + std::to_string(n) + "x" + std::to_string(n));
    }
    const double m = list[k].min_positive();
    if (m > 0.0) eta = std::min(eta, m);
  }
  if (std::isinf(eta)) eta = std::numeric_limits<double>::min();
  const int B = window > 0 ? window : static_cast<int>(list.size());
  auto shared = std::make_shared<const std::vector<MixingMatrix>>(std::move(list));
  return MixingSchedule(
      std::move(name), r,
      [shared](Iteration t) {
        const auto m = static_cast<Iteration>(shared->size());
        return (*shared)[static_cast<std::size_t>((t - 1) % m)];
      },
      eta, B);
}

MixingMatrix MixingSchedule::at(Iteration t) const {
  if (t < 1) throw std::invalid_argument("mixing schedule: t must be >= 1");
  return generator_(t);
}

MixingSchedule MixingSchedule::with_window(int window) const {
  return MixingSchedule(name_, r_, generator_, eta_, window);
}

std::vector<int> strongly_connected_components(
    const std::vector<std::vector<int>>& adjacency) {
  // Iterative Tarjan so deep graphs cannot overflow the call stack.
  const int n = static_cast<int>(adjacency.size());
  std::vector<int> index(n, -1), low(n, 0), component(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  std::vector<std::pair<int, std::size_t>> call;
  int next_index = 0;
  int next_component = 0;

  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    call.emplace_back(root, 0);
    while (!call.empty()) {
      auto& [v, edge] = call.back();
      if (edge == 0 && index[v] < 0) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      if (edge < adjacency[v].size()) {
        const int w = adjacency[v][edge++];
        if (index[w] < 0) {
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          component[w] = next_component;
        } while (w != v);
        ++next_component;
      }
      const int finished = v;
      call.pop_back();
      if (!call.empty()) {
        const int parent = call.back().first;
        low[parent] = std::min(low[parent], low[finished]);
      }
    }
  }
  return component;
}

bool is_strongly_connected(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
  if (n == 0) return true;
  std::vector<std::vector<int>> adjacency(n);
  for (const auto& [from, to] : edges) adjacency[static_cast<std::size_t>(from)].push_back(to);
  const auto comp = strongly_connected_components(adjacency);
  return std::all_of(comp.begin(), comp.end(), [&](int c) { return c == comp[0]; });
}

ValidationReport validate_schedule(const MixingSchedule& schedule, Iteration horizon) {
  const std::size_t n = schedule.size();
  const Iteration B = schedule.window();
  if (horizon < B) throw std::invalid_argument("validate_schedule: horizon must be >= B");

  ValidationReport report;
  report.min_positive_entry = std::numeric_limits<double>::infinity();
  const RowVector r = schedule.weights().values().transpose();

  // Edge sets of each iteration, kept for the sliding-window unions.
  std::vector<std::vector<std::pair<int, int>>> edge_sets;
  edge_sets.reserve(static_cast<std::size_t>(horizon));

  for (Iteration t = 1; t <= horizon; ++t) {
    const MixingMatrix M = schedule.at(t);
    const Matrix& W = M.W;
    if (W.rows() != static_cast<Eigen::Index>(n) || W.cols() != static_cast<Eigen::Index>(n)) {
      throw std::invalid_argument("validate_schedule: W(" + std::to_string(t) +
                                  ") has the wrong shape");
    }
    if ((W.array() < 0.0).any()) report.negative_entry = true;
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      const double dev = std::abs(W.row(i).sum() - 1.0);
      if (dev > report.max_row_sum_deviation) {
        report.max_row_sum_deviation = dev;
        report.worst_row_sum_t = t;
        report.worst_row_sum_row = static_cast<int>(i);
      }
    }
    const double stat = (r * W - r).cwiseAbs().maxCoeff();
    report.max_stationarity_deviation = std::max(report.max_stationarity_deviation, stat);
    const double m = M.min_positive();
    if (m > 0.0) report.min_positive_entry = std::min(report.min_positive_entry, m);
    edge_sets.push_back(M.edges());
  }
  if (std::isinf(report.min_positive_entry)) report.min_positive_entry = 0.0;

  report.stochastic_ok = !report.negative_entry &&
                         report.max_row_sum_deviation <= kStochasticTol &&
                         report.max_stationarity_deviation <= kStochasticTol;
  report.eta_ok = report.min_positive_entry >= schedule.eta();

  for (Iteration t = 1; t + B <= horizon; ++t) {
    std::vector<std::pair<int, int>> window;
    for (Iteration k = t + 1; k <= t + B; ++k) {
      const auto& e = edge_sets[static_cast<std::size_t>(k - 1)];
      window.insert(window.end(), e.begin(), e.end());
    }
    ++report.windows_checked;
    if (!is_strongly_connected(n, window)) {
      if (report.windows_failed == 0) report.first_failed_window = t;
      ++report.windows_failed;
    }
  }
  report.connectivity_ok = report.windows_failed == 0;
  return report;
}

}  // namespace dimix
