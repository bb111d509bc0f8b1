#include "dimix/objective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dimix/rng.hpp"

namespace dimix {
namespace {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename Row>
std::string join(const Row& row) {
  std::string out;
  for (Eigen::Index k = 0; k < row.size(); ++k) {
    if (k) out += ',';
    out += format_double(row[k]);
  }
  return out;
}

std::vector<double> split_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

double RegressionProblem::pooled_loss(const Vector& x) const {
  return (v - U * x).squaredNorm() / (2.0 * static_cast<double>(U.rows()));
}

bool RegressionProblem::has_unique_optimum() const {
  if (U.rows() < U.cols()) return false;
  Eigen::ColPivHouseholderQR<Matrix> qr(U);
  return qr.rank() == U.cols();
}

RegressionProblem synthesize(Eigen::Index N, Eigen::Index d, std::uint64_t seed,
                             double noise_width) {
  if (N < 1 || d < 1) throw std::invalid_argument("synthesize: N and d must be >= 1");
  if (!(noise_width >= 0.0)) throw std::invalid_argument("synthesize: noise width must be >= 0");
  Rng rng = make_stream(seed, Stream::kProblem);
  RegressionProblem p;
  p.seed = seed;
  p.noise_width = noise_width;
  p.U.resize(N, d);
  for (Eigen::Index k = 0; k < N; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) p.U(k, j) = rng.uniform();
  }
  p.x_tilde.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) p.x_tilde[j] = rng.uniform(0.0, 0.8);
  p.theta.resize(N);
  for (Eigen::Index k = 0; k < N; ++k) p.theta[k] = rng.uniform(0.0, noise_width);
  p.v = p.U * p.x_tilde + p.theta;
  return p;
}

void write_problem(std::ostream& os, const RegressionProblem& problem, bool embed_data) {
  os << "# dimix regression problem\n";
  os << "N = " << problem.samples() << "\n";
  os << "d = " << problem.dim() << "\n";
  os << "seed = " << problem.seed << "\n";
  os << "noise_width = " << format_double(problem.noise_width) << "\n";
  os << "embedded = " << (embed_data ? "true" : "false") << "\n";
  if (!embed_data) return;
  for (Eigen::Index k = 0; k < problem.samples(); ++k) {
    os << "U." << k << " = " << join(problem.U.row(k)) << "\n";
  }
  os << "v = " << join(problem.v) << "\n";
  os << "x_tilde = " << join(problem.x_tilde) << "\n";
  os << "theta = " << join(problem.theta) << "\n";
}

RegressionProblem read_problem(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("problem file: bad line '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument("problem file: missing key '" + key + "'");
    return it->second;
  };
  const auto N = static_cast<Eigen::Index>(std::stoll(need("N")));
  const auto d = static_cast<Eigen::Index>(std::stoll(need("d")));
  const auto seed = static_cast<std::uint64_t>(std::stoull(need("seed")));
  const double width = kv.count("noise_width") ? std::stod(kv["noise_width"]) : 0.1;
  if (!kv.count("embedded") || kv["embedded"] != "true") return synthesize(N, d, seed, width);

  RegressionProblem p;
  p.seed = seed;
  p.noise_width = width;
  p.U.resize(N, d);
  for (Eigen::Index k = 0; k < N; ++k) {
    const auto row = split_numbers(need("U." + std::to_string(k)));
    if (static_cast<Eigen::Index>(row.size()) != d) throw std::invalid_argument("problem file: bad row width");
    for (Eigen::Index j = 0; j < d; ++j) p.U(k, j) = row[static_cast<std::size_t>(j)];
  }
  auto vec = [&](const std::string& key, Eigen::Index len) {
    const auto vals = split_numbers(need(key));
    if (static_cast<Eigen::Index>(vals.size()) != len) {
      throw std::invalid_argument("problem file: '" + key + "' has the wrong length");
    }
    return Vector(Eigen::Map<const Vector>(vals.data(), len));
  };
  p.v = vec("v", N);
  p.x_tilde = vec("x_tilde", d);
  p.theta = vec("theta", N);
  return p;
}

LocalObjective::LocalObjective(std::vector<Eigen::Index> shard, Matrix U, Vector v)
    : shard_(std::move(shard)), U_(std::move(U)), v_(std::move(v)) {
  if (U_.rows() == 0) throw std::invalid_argument("local objective: empty shard");
  if (U_.rows() != v_.size()) throw std::invalid_argument("local objective: size mismatch");
  const double m = static_cast<double>(U_.rows());
  H_ = (U_.transpose() * U_) / m;
  b_ = (U_.transpose() * v_) / m;
  c_ = v_.squaredNorm() / (2.0 * m);
  std::tie(mu_, L_) = extreme_eigenvalues(H_);
  mu_ = std::max(mu_, 0.0);
}

double LocalObjective::value(const Vector& x) const {
  return (v_ - U_ * x).squaredNorm() / (2.0 * static_cast<double>(U_.rows()));
}

Vector LocalObjective::gradient(const Vector& x) const { return H_ * x - b_; }

std::vector<std::size_t> apportion(std::size_t total, const WeightVector& r,
                                   std::vector<std::size_t>* stolen) {
  const std::size_t n = r.size();
  if (n > total) throw std::invalid_argument("apportion: more shards than items");
  std::vector<std::size_t> sizes(n);
  std::vector<double> remainder(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = r[i] * static_cast<double>(total);
    sizes[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - std::floor(quota);
    assigned += sizes[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++sizes[order[k % n]];

  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[i] != 0) continue;
    const auto largest = static_cast<std::size_t>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    --sizes[largest];
    sizes[i] = 1;
    if (stolen) stolen->push_back(i);
  }
  return sizes;
}

PartitionResult partition(const RegressionProblem& problem, const WeightVector& r,
                          std::uint64_t seed) {
  const auto N = static_cast<std::size_t>(problem.samples());
  PartitionResult result;
  const auto sizes = apportion(N, r, &result.borrowed);

  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_stream(seed, Stream::kPartition);
  for (std::size_t k = N; k > 1; --k) {
    const auto j = static_cast<std::size_t>(rng.below(k));
    std::swap(order[k - 1], order[j]);
  }

  std::size_t offset = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::vector<Eigen::Index> shard(order.begin() + static_cast<std::ptrdiff_t>(offset),
                                    order.begin() + static_cast<std::ptrdiff_t>(offset + sizes[i]));
    offset += sizes[i];
    Matrix U(static_cast<Eigen::Index>(shard.size()), problem.dim());
    Vector v(static_cast<Eigen::Index>(shard.size()));
    for (std::size_t k = 0; k < shard.size(); ++k) {
      U.row(static_cast<Eigen::Index>(k)) = problem.U.row(shard[k]);
      v[static_cast<Eigen::Index>(k)] = problem.v[shard[k]];
    }
    result.locals.emplace_back(std::move(shard), std::move(U), std::move(v));
  }
  return result;
}

Matrix weighted_hessian(std::span<const LocalObjective> locals, const WeightVector& r) {
  if (locals.size() != r.size()) throw std::invalid_argument("weighted_hessian: agent count mismatch");
  const Eigen::Index d = locals.front().dim();
  Matrix H = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < locals.size(); ++i) H += r[i] * locals[i].hessian();
  return H;
}

Vector global_optimum(std::span<const LocalObjective> locals, const WeightVector& r) {
  if (locals.empty()) throw std::invalid_argument("global_optimum: no agents");
  const Matrix H = weighted_hessian(locals, r);
  Vector b = Vector::Zero(H.rows());
  for (std::size_t i = 0; i < locals.size(); ++i) b += r[i] * locals[i].linear_term();

  const auto [lo, hi] = extreme_eigenvalues(H);
  const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(lo > hi * 1e-14)) {
    throw std::domain_error("global_optimum: weighted Hessian is singular (condition estimate " +
                            std::to_string(condition) + ")");
  }
  Eigen::LDLT<Matrix> ldlt(H);
  Vector x = ldlt.solve(b);
  // One refinement step keeps the residual at rounding level on stiff shards.
  x += ldlt.solve(b - H * x);
  return x;
}

double weighted_loss(std::span<const LocalObjective> locals, const WeightVector& r,
                     const Matrix& X) {
  double total = 0.0;
  for (std::size_t i = 0; i < locals.size(); ++i) {
    total += r[i] * locals[i].value(X.row(static_cast<Eigen::Index>(i)).transpose());
  }
  return total;
}

Vector weighted_gradient(std::span<const LocalObjective> locals, const WeightVector& r,
                         const Vector& x) {
  Vector g = Vector::Zero(x.size());
  for (std::size_t i = 0; i < locals.size(); ++i) g += r[i] * locals[i].gradient(x);
  return g;
}

std::pair<double, double> extreme_eigenvalues(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigenvalue solver failed");
  const auto& ev = solver.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

SmoothnessConstants smoothness_constants(std::span<const LocalObjective> locals,
                                         const WeightVector& r) {
  SmoothnessConstants out;
  for (const auto& f : locals) {
    out.mu_i.push_back(f.mu());
    out.L_i.push_back(f.L());
  }
  std::tie(out.mu_f, out.L_f) = extreme_eigenvalues(weighted_hessian(locals, r));
  // Clamp round-off on rank-deficient sums.
  if (out.mu_f < out.L_f * 1e-14) out.mu_f = 0.0;
  return out;
}

DistributedProblem make_distributed(WeightVector r, std::vector<LocalObjective> locals,
                                    std::optional<RegressionProblem> pooled) {
  if (locals.size() != r.size()) throw std::invalid_argument("make_distributed: agent count mismatch");
  Vector x_star = global_optimum(locals, r);
  SmoothnessConstants constants = smoothness_constants(locals, r);
  return DistributedProblem{std::move(r), std::move(locals), std::move(x_star),
                            std::move(constants), std::move(pooled)};
}

}  // namespace dimix
