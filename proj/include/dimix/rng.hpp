#pragma once

#include <cstdint>
#include <initializer_list>

namespace dimix {

/// SplitMix64 generator.
///
/// Every random quantity in a run comes from a stream keyed by
/// (seed, tag, ids...) through `stream_key`, so a draw depends only on where
/// it is consumed and never on execution order or thread scheduling. Uniform
/// and normal variates are produced here rather than through <random>
/// distributions, whose algorithms differ between standard libraries.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return next(); }

  std::uint64_t next();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via Box-Muller (the second variate is cached).
  double normal();

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stream tags. Values are part of the reproducibility contract; do not
/// renumber.
enum class Stream : std::uint64_t {
  kProblem = 1,
  kWeights = 2,
  kPartition = 3,
  kNoise = 4,
  kOracle = 5,
  kInitialState = 6,
};

/// Seed for the stream identified by (seed, tag, ids...).
std::uint64_t stream_key(std::uint64_t seed, Stream tag,
                         std::initializer_list<std::uint64_t> ids = {});

inline Rng make_stream(std::uint64_t seed, Stream tag,
                       std::initializer_list<std::uint64_t> ids = {}) {
  return Rng(stream_key(seed, tag, ids));
}

}  // namespace dimix
