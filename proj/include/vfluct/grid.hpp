#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "vfluct/error.hpp"

namespace vfluct {

inline constexpr std::size_t kDefaultMaxSteps = 4096;

/// Uniform grid t_j = j * delta on [0, T], j = 0..N.
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t steps, std::size_t max_steps = kDefaultMaxSteps)
      : horizon_(horizon), steps_(steps), delta_(horizon / static_cast<double>(steps)) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw DomainError("TimeGrid: horizon must be positive and finite");
    }
    if (steps < 2) throw DomainError("TimeGrid: need at least 2 steps");
    if (steps > max_steps) {
      throw DomainError("TimeGrid: " + std::to_string(steps) + " steps exceeds the cap of " +
                        std::to_string(max_steps));
    }
  }

  double horizon() const { return horizon_; }
  std::size_t steps() const { return steps_; }
  std::size_t size() const { return steps_ + 1; }
  double delta() const { return delta_; }

  // The last node is pinned to T exactly.
  double node(std::size_t j) const {
    return j == steps_ ? horizon_ : static_cast<double>(j) * delta_;
  }
  // Cell midpoint s_i* = t_i + delta/2: kernel evaluation point for cell i.
  double mid(std::size_t i) const { return (static_cast<double>(i) + 0.5) * delta_; }

  // Nearest node index to time t, clamped to [0, N].
  std::size_t index_of(double t) const {
    const double r = std::nearbyint(t / delta_);
    if (r <= 0.0) return 0;
    if (r >= static_cast<double>(steps_)) return steps_;
    return static_cast<std::size_t>(r);
  }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.horizon_ == b.horizon_ && a.steps_ == b.steps_;
  }

 private:
  double horizon_;
  std::size_t steps_;
  double delta_;
};

}  // namespace vfluct
