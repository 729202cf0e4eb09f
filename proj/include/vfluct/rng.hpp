#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "vfluct/error.hpp"
#include "vfluct/grid.hpp"

namespace vfluct {

/// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
/// A stateless bijection of a 128-bit counter under a 64-bit key.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t key)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Counter operator()(Counter ctr) const {
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, k);
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  std::array<std::uint32_t, 2> key_;
};

namespace detail {

// Uniform on (0, 1] from 53 random bits.
inline double to_unit_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

}  // namespace detail

/// Standard normals indexed by (stream, position). Each Philox block yields
/// one Box-Muller pair, so position 2k and 2k+1 share a counter.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream, std::uint32_t domain = 0)
      : philox_(seed), stream_(stream), domain_(domain) {}

  void fill(std::span<double> out) const {
    for (std::size_t k = 0; 2 * k < out.size(); ++k) {
      const auto pair = normal_pair(k);
      out[2 * k] = pair[0];
      if (2 * k + 1 < out.size()) out[2 * k + 1] = pair[1];
    }
  }

  std::array<double, 2> normal_pair(std::uint64_t block) const {
    const auto r = philox_({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(stream_),
                            static_cast<std::uint32_t>(stream_ >> 32), domain_});
    const double u1 = detail::to_unit_open(r[0], r[1]);
    const double u2 = detail::to_unit_open(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

 private:
  Philox4x32 philox_;
  std::uint64_t stream_;
  std::uint32_t domain_;
};

/// M Brownian increment paths on a grid. Increment (m, i) is a pure function
/// of (seed, m, i): paths are generated on demand, so a batch of a million
/// paths costs no memory and any path can be regenerated by any worker.
/// A batch may instead carry explicit increments (used for fixed test inputs).
class BrownianBatch {
 public:
  static BrownianBatch sample(std::size_t paths, const TimeGrid& grid, std::uint64_t seed) {
    if (paths < 1) throw DomainError("sample_brownian: need at least one path");
    return BrownianBatch(paths, grid, seed, {});
  }

  /// increments[m] must hold N values.
  static BrownianBatch from_increments(const TimeGrid& grid,
                                       std::vector<std::vector<double>> increments) {
    if (increments.empty()) throw DomainError("BrownianBatch: no paths");
    for (const auto& p : increments) {
      if (p.size() != grid.steps()) throw DomainError("BrownianBatch: path length mismatch");
    }
    const std::size_t m = increments.size();
    return BrownianBatch(m, grid, 0, std::move(increments));
  }

  static BrownianBatch zeros(std::size_t paths, const TimeGrid& grid) {
    return from_increments(grid, std::vector<std::vector<double>>(
                                     paths, std::vector<double>(grid.steps(), 0.0)));
  }

  std::size_t paths() const { return paths_; }
  const TimeGrid& grid() const { return grid_; }
  std::uint64_t seed() const { return seed_; }
  bool is_explicit() const { return !explicit_.empty(); }

  /// Writes the N increments of path m, each Normal(0, delta).
  void increments(std::size_t m, std::span<double> out) const {
    if (m >= paths_) throw DomainError("BrownianBatch: path index out of range");
    if (out.size() != grid_.steps()) throw DomainError("BrownianBatch: buffer size mismatch");
    if (is_explicit()) {
      std::copy(explicit_[m].begin(), explicit_[m].end(), out.begin());
      return;
    }
    NormalStream(seed_, m).fill(out);
    const double scale = std::sqrt(grid_.delta());
    for (double& v : out) v *= scale;
  }

  std::vector<double> increments(std::size_t m) const {
    std::vector<double> out(grid_.steps());
    increments(m, out);
    return out;
  }

 private:
  BrownianBatch(std::size_t paths, const TimeGrid& grid, std::uint64_t seed,
                std::vector<std::vector<double>> increments)
      : paths_(paths), grid_(grid), seed_(seed), explicit_(std::move(increments)) {}

  std::size_t paths_;
  TimeGrid grid_;
  std::uint64_t seed_;
  std::vector<std::vector<double>> explicit_;
};

inline BrownianBatch sample_brownian(std::size_t paths, const TimeGrid& grid, std::uint64_t seed) {
  return BrownianBatch::sample(paths, grid, seed);
}

}  // namespace vfluct
