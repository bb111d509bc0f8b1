#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dimix/rng.hpp"

using dimix::Rng;
using dimix::Stream;

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, KnownSplitMix64Output) {
  // Reference values of SplitMix64 seeded with 0.
  Rng r(0);
  EXPECT_EQ(r.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(r.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(r.next(), 0x06C45D188009454FULL);
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(7);
  double sum = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // mean 1/2, sd of the mean sqrt(1/12/n)
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, BelowStaysInRange) {
  Rng r(3);
  std::set<std::uint64_t> seen;
  for (int k = 0; k < 5000; ++k) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = r.normal();
    s1 += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Rng, StreamKeysSeparateTagsAndIds) {
  const auto a = dimix::stream_key(1, Stream::kNoise, {0, 1});
  const auto b = dimix::stream_key(1, Stream::kNoise, {1, 0});
  const auto c = dimix::stream_key(1, Stream::kProblem, {0, 1});
  const auto d = dimix::stream_key(2, Stream::kNoise, {0, 1});
  EXPECT_NE(a, b);
  EXPECT_NE(a, c);
  EXPECT_NE(a, d);
  EXPECT_EQ(a, dimix::stream_key(1, Stream::kNoise, {0, 1}));
}
