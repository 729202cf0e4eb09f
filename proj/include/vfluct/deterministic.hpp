#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vfluct/coefficients.hpp"
#include "vfluct/error.hpp"
#include "vfluct/grid.hpp"
#include "vfluct/linalg.hpp"
#include "vfluct/parallel.hpp"

namespace vfluct {

/// Time kernels of b and sigma at (t_j, s_i*), i < j, cached once per grid.
/// Row j holds the j entries i = 0..j-1.
struct KernelCache {
  Matrix drift;
  Matrix diffusion;

  KernelCache(const CoefficientSet& c, const TimeGrid& grid)
      : drift(grid.size(), grid.steps()), diffusion(grid.size(), grid.steps()) {
    parallel_for(grid.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t j = begin; j < end; ++j) {
        const double t = grid.node(j);
        for (std::size_t i = 0; i < j; ++i) {
          drift(j, i) = c.drift.kernel(t, grid.mid(i));
          diffusion(j, i) = c.diffusion.kernel(t, grid.mid(i));
        }
      }
    });
  }
};

/// Deterministic limit x_{t_j}, j = 0..N.
struct LimitPath {
  TimeGrid grid;
  std::vector<double> values;
  std::string preset;

  double operator[](std::size_t j) const { return values[j]; }
};

/// D[i][j] ~ D_{theta_i} Y_{t_j}. Entries with i >= j are zero: the state
/// Y_{t_i} entering cell i does not depend on the increment of that cell.
struct DerivativeField {
  TimeGrid grid;
  Matrix values;  // (N+1) x (N+1), row = theta index
  std::string preset;

  double operator()(std::size_t i, std::size_t j) const { return i < j ? values(i, j) : 0.0; }

  /// theta -> D_theta Y_{t_j} for theta indices 0..N.
  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t i = 0; i < j; ++i) out[i] = values(i, j);
    return out;
  }
};

/// Var(Y_{t_j}), j = 0..N.
struct VariancePath {
  TimeGrid grid;
  std::vector<double> values;
};

namespace detail {

[[noreturn]] inline void diverged(const std::string& what, std::size_t node) {
  throw DivergenceError(what + ": non-finite value at node " + std::to_string(node));
}

}  // namespace detail

/// x_{t_j} = x0 + sum_{i<j} b(t_j, s_i*, x_{t_i}) delta.
inline LimitPath solve_deterministic_limit(const CoefficientSet& c, const TimeGrid& grid, double x0,
                                           const KernelCache& cache) {
  LimitPath path{grid, std::vector<double>(grid.size()), c.name};
  std::vector<double> drift_terms(grid.steps());
  path.values[0] = x0;
  for (std::size_t j = 1; j <= grid.steps(); ++j) {
    drift_terms[j - 1] = c.drift.g.f(path.values[j - 1]) * grid.delta();
    const double xj = x0 + dot(cache.drift.row(j).data(), drift_terms.data(), j);
    if (!std::isfinite(xj)) detail::diverged("deterministic limit", j);
    path.values[j] = xj;
  }
  return path;
}

inline LimitPath solve_deterministic_limit(const CoefficientSet& c, const TimeGrid& grid,
                                           double x0) {
  return solve_deterministic_limit(c, grid, x0, KernelCache(c, grid));
}

/// Solves D_theta Y_t = sigma(t, theta, x_theta) + \int_theta^t b'(t, s, x_s) D_theta Y_s ds
/// row by row:
///   D[i][j] = sigma(t_j, s_i*, x_i) + sum_{i<k<j} b'(t_j, s_k*, x_k) D[i][k] delta.
/// The b' matrix is cached once, so the work is O(N^3) with an O(1) inner loop.
inline DerivativeField solve_derivative_field(const CoefficientSet& c, const TimeGrid& grid,
                                              const LimitPath& x, const KernelCache& cache) {
  if (!(x.grid == grid)) throw DomainError("solve_derivative_field: grid mismatch");
  const std::size_t n = grid.steps();
  const double d = grid.delta();
  Matrix slope(grid.size(), n);  // b'(t_j, s_k*, x_k) * delta
  Matrix noise(grid.size(), n);  // sigma(t_j, s_i*, x_i)
  std::vector<double> gp(n), gs(n);
  for (std::size_t k = 0; k < n; ++k) {
    gp[k] = c.drift.g.df(x[k]);
    gs[k] = c.diffusion.g.f(x[k]);
  }
  for (std::size_t j = 1; j <= n; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      slope(j, k) = cache.drift(j, k) * gp[k] * d;
      noise(j, k) = cache.diffusion(j, k) * gs[k];
    }
  }

  DerivativeField field{grid, Matrix(grid.size(), grid.size()), c.name};
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto row = field.values.row(i);
      for (std::size_t j = i + 1; j <= n; ++j) {
        const std::size_t len = j - i - 1;
        const double v =
            noise(j, i) + (len ? dot(slope.row(j).data() + i + 1, row.data() + i + 1, len) : 0.0);
        if (!std::isfinite(v)) detail::diverged("derivative field row " + std::to_string(i), j);
        row[j] = v;
      }
    }
  });
  return field;
}

inline DerivativeField solve_derivative_field(const CoefficientSet& c, const TimeGrid& grid,
                                              const LimitPath& x) {
  return solve_derivative_field(c, grid, x, KernelCache(c, grid));
}

/// Var(Y_{t_j}) = sum_{i<j} D[i][j]^2 delta, the squared L2 norm of the
/// deterministic Malliavin derivative.
inline VariancePath variance_of_Y(const DerivativeField& field, const TimeGrid& grid) {
  if (!(field.grid == grid)) throw DomainError("variance_of_Y: grid mismatch");
  VariancePath var{grid, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t j = 1; j <= grid.steps(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < j; ++i) acc += field.values(i, j) * field.values(i, j);
    var.values[j] = acc * grid.delta();
  }
  return var;
}

}  // namespace vfluct
