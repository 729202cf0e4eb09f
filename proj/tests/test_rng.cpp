#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "vfluct/rng.hpp"

using namespace vfluct;

TEST(Philox, KnownAnswerVectors) {
  // Reference outputs of Philox4x32-10.
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32(0)({0, 0, 0, 0}), (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  const std::uint64_t ones = 0xffffffffffffffffull;
  EXPECT_EQ(Philox4x32(ones)({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}),
            (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  // Key words {0xa4093822, 0x299f31d0}.
  EXPECT_EQ(Philox4x32(0x299f31d0a4093822ull)(
                {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}),
            (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(BrownianBatch, SameSeedIsBitIdentical) {
  const TimeGrid grid(1.0, 64);
  const auto a = sample_brownian(50, grid, 7);
  const auto b = sample_brownian(50, grid, 7);
  const auto c = sample_brownian(50, grid, 8);
  for (std::size_t m = 0; m < 50; ++m) {
    EXPECT_EQ(a.increments(m), b.increments(m));
    EXPECT_NE(a.increments(m), c.increments(m));
  }
}

TEST(BrownianBatch, PooledVarianceIsDelta) {
  const TimeGrid grid(1.0, 128);
  const std::size_t paths = 100000;
  const auto batch = sample_brownian(paths, grid, 2024);
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  std::vector<double> dB(grid.steps());
  for (std::size_t m = 0; m < paths; ++m) {
    batch.increments(m, dB);
    for (double v : dB) {
      s1 += v;
      s2 += v * v;
      s4 += v * v * v * v;
    }
  }
  const double n = static_cast<double>(paths * grid.steps());
  const double var = s2 / n;
  const double se = std::sqrt((s4 / n - var * var) / n);
  EXPECT_LE(std::abs(var - grid.delta()), 3 * se);
  EXPECT_LE(std::abs(s1 / n), 3 * std::sqrt(grid.delta() / n));
}

TEST(BrownianBatch, StreamsDoNotDependOnPathCount) {
  const TimeGrid grid(1.0, 16);
  const auto small = sample_brownian(10, grid, 3);
  const auto large = sample_brownian(20, grid, 3);
  for (std::size_t m = 0; m < 10; ++m) EXPECT_EQ(small.increments(m), large.increments(m));
}

TEST(BrownianBatch, ExplicitAndZeroBatches) {
  const TimeGrid grid(1.0, 4);
  const auto z = BrownianBatch::zeros(3, grid);
  for (std::size_t m = 0; m < 3; ++m) {
    for (double v : z.increments(m)) EXPECT_EQ(v, 0.0);
  }
  const auto e = BrownianBatch::from_increments(grid, {{1, 2, 3, 4}});
  EXPECT_EQ(e.increments(0), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_THROW(BrownianBatch::from_increments(grid, {{1, 2}}), DomainError);
  EXPECT_THROW(sample_brownian(0, grid, 1), DomainError);
  EXPECT_THROW(e.increments(1), DomainError);
}

TEST(NormalStream, OddLengthUsesPrefixOfPairs) {
  NormalStream s(11, 4);
  std::vector<double> a(5), b(6);
  s.fill(a);
  s.fill(b);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(a[k], b[k]);
}
