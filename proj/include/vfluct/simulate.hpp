#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfluct/coefficients.hpp"
#include "vfluct/deterministic.hpp"
#include "vfluct/error.hpp"
#include "vfluct/grid.hpp"
#include "vfluct/linalg.hpp"
#include "vfluct/parallel.hpp"
#include "vfluct/rng.hpp"

namespace vfluct {

enum class Process { X, Fluctuation, Y, Z };

inline const char* process_name(Process p) {
  switch (p) {
    case Process::X: return "X";
    case Process::Fluctuation: return "Xtilde";
    case Process::Y: return "Y";
    case Process::Z: return "Z";
  }
  return "?";
}

/// Default observation nodes: T/2 and T.
inline std::vector<std::size_t> default_nodes(const TimeGrid& grid) {
  return {grid.steps() / 2, grid.steps()};
}

inline std::vector<std::size_t> all_nodes(const TimeGrid& grid) {
  std::vector<std::size_t> nodes(grid.size());
  for (std::size_t j = 0; j < nodes.size(); ++j) nodes[j] = j;
  return nodes;
}

/// Simulated values P[m][k] of one process at the observation nodes.
struct PathEnsemble {
  PathEnsemble(Process p, const TimeGrid& g, std::vector<std::size_t> observed, std::size_t paths)
      : process(p), grid(g), nodes(std::move(observed)), values(paths, nodes.size()) {}

  Process process;
  TimeGrid grid;
  std::vector<std::size_t> nodes;
  Matrix values;  // paths x nodes
  double eps = std::numeric_limits<double>::quiet_NaN();
  std::string preset;
  std::uint64_t seed = 0;

  std::size_t paths() const { return values.rows(); }
  double at(std::size_t m, std::size_t k) const { return values(m, k); }

  std::size_t slot_of(std::size_t node) const {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k] == node) return k;
    }
    throw DomainError("PathEnsemble: node " + std::to_string(node) + " was not observed");
  }

  /// All path values at one observed node.
  std::vector<double> at_node(std::size_t node) const {
    const std::size_t k = slot_of(node);
    std::vector<double> out(paths());
    for (std::size_t m = 0; m < out.size(); ++m) out[m] = values(m, k);
    return out;
  }
};

/// D_{theta_i} Z_T per path, i = 0..N.
struct DerivativeRowEnsemble {
  TimeGrid grid;
  Matrix values;  // paths x (N+1)
};

/// Scratch buffers for one worker.
struct PathWorkspace {
  std::vector<double> increments, drift, noise, state, aux, aux2, aux3;

  explicit PathWorkspace(const TimeGrid& grid)
      : increments(grid.steps()),
        drift(grid.steps()),
        noise(grid.steps()),
        state(grid.size()),
        aux(grid.size()),
        aux2(grid.size()),
        aux3(grid.size()) {}
};

namespace detail {

[[noreturn]] inline void path_diverged(const char* what, std::size_t path, std::size_t node) {
  throw DivergenceError(std::string(what) + ": non-finite value on path " + std::to_string(path) +
                        " at node " + std::to_string(node));
}

}  // namespace detail

/// Everything deterministic that the coupled simulators share: cached time
/// kernels, the limit path, the state functions evaluated along it, the
/// derivative field, and the terminal-time weights that turn the Malliavin
/// derivative of Z into O(N^2) (row) or O(N) (contraction) work per path.
class LinearizedModel {
 public:
  LinearizedModel(const CoefficientSet& c, const TimeGrid& grid, double x0)
      : LinearizedModel(c, grid, std::nullopt, x0) {}

  LinearizedModel(const CoefficientSet& c, const TimeGrid& grid, const LimitPath& x)
      : LinearizedModel(c, grid, x, x.values.at(0)) {
    if (!(x.grid == grid)) throw DomainError("LinearizedModel: limit path grid mismatch");
  }

  const CoefficientSet& coefficients() const { return coeff_; }
  const TimeGrid& grid() const { return grid_; }
  const KernelCache& cache() const { return cache_; }
  const LimitPath& limit() const { return limit_; }
  const DerivativeField& field() const { return field_; }
  const VariancePath& variance() const { return variance_; }

  /// Fluctuation X~ = (X - x)/eps of the Euler scheme, written directly in
  /// fluctuation form:
  ///   X~_j = sum_{i<j} [b(t_j, s_i*, X_i) - b(t_j, s_i*, x_i)]/eps delta
  ///        + sum_{i<j} sigma(t_j, s_i*, X_i) dB_i,   X_i = x_i + eps X~_i.
  void fluctuation_path(double eps, std::span<const double> dB, std::span<double> out,
                        PathWorkspace& ws, std::size_t path = 0) const {
    const std::size_t n = grid_.steps();
    const double d = grid_.delta();
    out[0] = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t i = j - 1;
      const double xi = limit_[i] + eps * out[i];
      ws.drift[i] = (coeff_.drift.g.f(xi) - drift_at_limit_[i]) / eps * d;
      ws.noise[i] = coeff_.diffusion.g.f(xi) * dB[i];
      const double v = dot(cache_.drift.row(j).data(), ws.drift.data(), j) +
                       dot(cache_.diffusion.row(j).data(), ws.noise.data(), j);
      if (!std::isfinite(v)) detail::path_diverged("simulate_X", path, j);
      out[j] = v;
    }
  }

  /// Y_j = sum_{i<j} b'(t_j, s_i*, x_i) Y_i delta + sum_{i<j} sigma(t_j, s_i*, x_i) dB_i.
  void limit_path(std::span<const double> dB, std::span<double> out, PathWorkspace& ws,
                  std::size_t path = 0) const {
    const std::size_t n = grid_.steps();
    const double d = grid_.delta();
    out[0] = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t i = j - 1;
      ws.drift[i] = slope_[i] * out[i] * d;
      ws.noise[i] = diffusion_at_limit_[i] * dB[i];
      const double v = dot(cache_.drift.row(j).data(), ws.drift.data(), j) +
                       dot(cache_.diffusion.row(j).data(), ws.noise.data(), j);
      if (!std::isfinite(v)) detail::path_diverged("simulate_Y", path, j);
      out[j] = v;
    }
  }

  /// Z_j = sum_{i<j} [b'(.) Z_i + b''(.) Y_i^2] delta + 2 sum_{i<j} sigma'(.) Y_i dB_i.
  void correction_path(std::span<const double> dB, std::span<const double> y,
                       std::span<double> out, PathWorkspace& ws, std::size_t path = 0) const {
    const std::size_t n = grid_.steps();
    const double d = grid_.delta();
    out[0] = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t i = j - 1;
      ws.drift[i] = (slope_[i] * out[i] + curvature_[i] * y[i] * y[i]) * d;
      ws.noise[i] = 2.0 * diffusion_slope_[i] * y[i] * dB[i];
      const double v = dot(cache_.drift.row(j).data(), ws.drift.data(), j) +
                       dot(cache_.diffusion.row(j).data(), ws.noise.data(), j);
      if (!std::isfinite(v)) detail::path_diverged("simulate_Z", path, j);
      out[j] = v;
    }
  }

  /// D_{theta_i} Z_T for i = 0..N:
  ///   gamma_i Y_i + sum_{k>i} D[i][k] (beta_k Y_k + gamma_k dB_k),
  /// where gamma and beta fold the resolvent of the b' recursion into the
  /// sigma' and b'' source terms.
  void dz_terminal_row(std::span<const double> dB, std::span<const double> y,
                       std::span<double> out, PathWorkspace& ws, std::size_t path = 0) const {
    const std::size_t n = grid_.steps();
    auto& c = ws.aux;
    for (std::size_t k = 0; k < n; ++k) c[k] = beta_[k] * y[k] + gamma_[k] * dB[k];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t len = n - i - 1;
      const double tail =
          len ? dot(field_.values.row(i).data() + i + 1, c.data() + i + 1, len) : 0.0;
      const double v = gamma_[i] * y[i] + tail;
      if (!std::isfinite(v)) detail::path_diverged("simulate_DZ_terminal", path, i);
      out[i] = v;
    }
    out[n] = 0.0;
  }

  /// <DZ_T, DY_T> = sum_i D_{theta_i} Z_T D[i][N] delta, contracted to O(N)
  /// through precomputed weights.
  double dz_dy_inner(std::span<const double> dB, std::span<const double> y) const {
    const std::size_t n = grid_.steps();
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += inner_y_[k] * y[k] + inner_db_[k] * dB[k];
    return acc * grid_.delta();
  }

  /// Skorokhod integral delta(Z_T DY_T) = Z_T Y_T - <DZ_T, DY_T>.
  double skorokhod_terminal(std::span<const double> dB, std::span<const double> y,
                            double z_terminal) const {
    return z_terminal * y[grid_.steps()] - dz_dy_inner(dB, y);
  }

  const std::vector<double>& resolvent_row() const { return resolvent_; }

 private:
  LinearizedModel(const CoefficientSet& c, const TimeGrid& grid, std::optional<LimitPath> x,
                  double x0)
      : coeff_(c),
        grid_(grid),
        cache_(c, grid),
        limit_(x ? std::move(*x) : solve_deterministic_limit(c, grid, x0, cache_)),
        field_(solve_derivative_field(c, grid, limit_, cache_)),
        variance_(variance_of_Y(field_, grid)) {
    const std::size_t n = grid.steps();
    const double d = grid.delta();
    drift_at_limit_.resize(n);
    slope_.resize(n);
    curvature_.resize(n);
    diffusion_at_limit_.resize(n);
    diffusion_slope_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = limit_[i];
      drift_at_limit_[i] = c.drift.g.f(xi);
      slope_[i] = c.drift.g.df(xi);
      curvature_[i] = c.drift.g.d2f(xi);
      diffusion_at_limit_[i] = c.diffusion.g.f(xi);
      diffusion_slope_[i] = c.diffusion.g.df(xi);
    }

    // Terminal row r of (I - L)^{-1}, L_jk = b'(t_j, s_k*, x_k) delta (k < j).
    resolvent_.assign(n + 1, 0.0);
    resolvent_[n] = 1.0;
    for (std::size_t k = n; k-- > 0;) {
      double acc = 0.0;
      for (std::size_t j = k + 1; j <= n; ++j) acc += resolvent_[j] * cache_.drift(j, k);
      resolvent_[k] = acc * slope_[k] * d;
    }
    gamma_.assign(n + 1, 0.0);
    beta_.assign(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      double sd = 0.0;
      double sb = 0.0;
      for (std::size_t j = k + 1; j <= n; ++j) {
        sd += resolvent_[j] * cache_.diffusion(j, k);
        sb += resolvent_[j] * cache_.drift(j, k);
      }
      gamma_[k] = 2.0 * diffusion_slope_[k] * sd;
      beta_[k] = 2.0 * curvature_[k] * d * sb;
    }
    // G_k = sum_{i<k} D[i][k] D[i][N].
    inner_y_.assign(n, 0.0);
    inner_db_.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      double g = 0.0;
      for (std::size_t i = 0; i < k; ++i) g += field_.values(i, k) * field_.values(i, n);
      inner_y_[k] = gamma_[k] * field_.values(k, n) + g * beta_[k];
      inner_db_[k] = g * gamma_[k];
    }
  }

  CoefficientSet coeff_;
  TimeGrid grid_;
  KernelCache cache_;
  LimitPath limit_;
  DerivativeField field_;
  VariancePath variance_;
  std::vector<double> drift_at_limit_, slope_, curvature_, diffusion_at_limit_, diffusion_slope_;
  std::vector<double> resolvent_, gamma_, beta_, inner_y_, inner_db_;
};

namespace detail {

inline void check_batch(const BrownianBatch& batch, const TimeGrid& grid, const char* who) {
  if (!(batch.grid() == grid)) throw DomainError(std::string(who) + ": batch grid mismatch");
}

inline void check_nodes(const std::vector<std::size_t>& nodes, const TimeGrid& grid) {
  for (auto j : nodes) {
    if (j > grid.steps()) throw DomainError("observation node out of range");
  }
}

inline PathEnsemble make_ensemble(Process p, const TimeGrid& grid,
                                  const std::vector<std::size_t>& nodes, std::size_t paths,
                                  const std::string& preset, std::uint64_t seed) {
  check_nodes(nodes, grid);
  PathEnsemble e(p, grid, nodes, paths);
  e.preset = preset;
  e.seed = seed;
  return e;
}

// Runs fn(m, dB, ws) for every path with per-worker scratch space.
template <class Fn>
void for_each_path(const BrownianBatch& batch, Fn&& fn) {
  const TimeGrid& grid = batch.grid();
  parallel_for(batch.paths(), [&](std::size_t begin, std::size_t end) {
    PathWorkspace ws(grid);
    for (std::size_t m = begin; m < end; ++m) {
      batch.increments(m, ws.increments);
      fn(m, std::span<const double>(ws.increments), ws);
    }
  });
}

}  // namespace detail

/// Euler scheme of X_eps (left-point state, kernels at cell midpoints),
/// reported as X = x + eps X~ at the observation nodes.
inline PathEnsemble simulate_X(const LinearizedModel& model, double eps, const BrownianBatch& batch,
                               const std::vector<std::size_t>& nodes) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("simulate_X: eps must lie in (0, 1)");
  detail::check_batch(batch, model.grid(), "simulate_X");
  auto out = detail::make_ensemble(Process::X, model.grid(), nodes, batch.paths(),
                                   model.coefficients().name, batch.seed());
  out.eps = eps;
  detail::for_each_path(batch, [&](std::size_t m, std::span<const double> dB, PathWorkspace& ws) {
    model.fluctuation_path(eps, dB, ws.aux3, ws, m);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      out.values(m, k) = model.limit()[nodes[k]] + eps * ws.aux3[nodes[k]];
    }
  });
  return out;
}

inline PathEnsemble simulate_X(const CoefficientSet& c, const TimeGrid& grid, double x0, double eps,
                               const BrownianBatch& batch,
                               const std::vector<std::size_t>& nodes = {}) {
  return simulate_X(LinearizedModel(c, grid, x0), eps, batch,
                    nodes.empty() ? default_nodes(grid) : nodes);
}

/// X~ = (X - x)/eps node by node.
inline PathEnsemble fluctuation(const PathEnsemble& X, const LimitPath& x, double eps) {
  if (eps == 0.0) throw DomainError("fluctuation: eps must be non-zero");
  if (!(X.grid == x.grid)) throw DomainError("fluctuation: grid mismatch");
  PathEnsemble out = X;
  out.process = Process::Fluctuation;
  out.eps = eps;
  for (std::size_t m = 0; m < X.paths(); ++m) {
    for (std::size_t k = 0; k < X.nodes.size(); ++k) {
      out.values(m, k) = (X.values(m, k) - x[X.nodes[k]]) / eps;
    }
  }
  return out;
}

/// Clark-Ocone sampler: Y_{t_j} = sum_{i<j} D[i][j] dB_i, exactly Gaussian on the grid.
inline PathEnsemble simulate_Y_exact(const DerivativeField& field, const BrownianBatch& batch,
                                     const std::vector<std::size_t>& nodes = {}) {
  const TimeGrid& grid = field.grid;
  detail::check_batch(batch, grid, "simulate_Y_exact");
  const auto obs = nodes.empty() ? default_nodes(grid) : nodes;
  auto out =
      detail::make_ensemble(Process::Y, grid, obs, batch.paths(), field.preset, batch.seed());
  // Columns of D, stored contiguously per observed node.
  std::vector<std::vector<double>> columns;
  for (auto j : obs) columns.push_back(field.column(j));
  detail::for_each_path(batch, [&](std::size_t m, std::span<const double> dB, PathWorkspace&) {
    for (std::size_t k = 0; k < obs.size(); ++k) {
      out.values(m, k) = dot(columns[k].data(), dB.data(), obs[k]);
    }
  });
  return out;
}

/// Euler scheme of the linearized equation for Y.
inline PathEnsemble simulate_Y_euler(const LinearizedModel& model, const BrownianBatch& batch,
                                     const std::vector<std::size_t>& nodes) {
  detail::check_batch(batch, model.grid(), "simulate_Y_euler");
  auto out = detail::make_ensemble(Process::Y, model.grid(), nodes, batch.paths(),
                                   model.coefficients().name, batch.seed());
  detail::for_each_path(batch, [&](std::size_t m, std::span<const double> dB, PathWorkspace& ws) {
    model.limit_path(dB, ws.state, ws, m);
    for (std::size_t k = 0; k < nodes.size(); ++k) out.values(m, k) = ws.state[nodes[k]];
  });
  return out;
}

inline PathEnsemble simulate_Y_euler(const CoefficientSet& c, const TimeGrid& grid,
                                     const LimitPath& x, const BrownianBatch& batch,
                                     const std::vector<std::size_t>& nodes = {}) {
  return simulate_Y_euler(LinearizedModel(c, grid, x), batch,
                          nodes.empty() ? default_nodes(grid) : nodes);
}

namespace detail {

// Y must come from the same batch: its observed values must match the
// regenerated Euler path.
inline void check_coupled(const PathEnsemble& Y, std::size_t m, std::span<const double> y) {
  for (std::size_t k = 0; k < Y.nodes.size(); ++k) {
    const double a = Y.values(m, k);
    const double b = y[Y.nodes[k]];
    if (std::abs(a - b) > 1e-9 * (1.0 + std::abs(b))) {
      throw DomainError("Y ensemble is not coupled to this Brownian batch (path " +
                        std::to_string(m) + ")");
    }
  }
}

}  // namespace detail

/// Second-order correction Z, driven by the same increments as Y.
inline PathEnsemble simulate_Z(const LinearizedModel& model, const PathEnsemble& Y,
                               const BrownianBatch& batch, const std::vector<std::size_t>& nodes) {
  detail::check_batch(batch, model.grid(), "simulate_Z");
  if (Y.paths() != batch.paths()) throw DomainError("simulate_Z: Y and batch path counts differ");
  auto out = detail::make_ensemble(Process::Z, model.grid(), nodes, batch.paths(),
                                   model.coefficients().name, batch.seed());
  detail::for_each_path(batch, [&](std::size_t m, std::span<const double> dB, PathWorkspace& ws) {
    model.limit_path(dB, ws.state, ws, m);
    detail::check_coupled(Y, m, ws.state);
    model.correction_path(dB, ws.state, ws.aux2, ws, m);
    for (std::size_t k = 0; k < nodes.size(); ++k) out.values(m, k) = ws.aux2[nodes[k]];
  });
  return out;
}

inline PathEnsemble simulate_Z(const CoefficientSet& c, const TimeGrid& grid, const LimitPath& x,
                               const PathEnsemble& Y, const BrownianBatch& batch,
                               const std::vector<std::size_t>& nodes = {}) {
  return simulate_Z(LinearizedModel(c, grid, x), Y, batch,
                    nodes.empty() ? default_nodes(grid) : nodes);
}

/// Terminal row D_{theta_i} Z_T of the Malliavin derivative of Z.
inline DerivativeRowEnsemble simulate_DZ_terminal(const LinearizedModel& model,
                                                  const PathEnsemble& Y,
                                                  const BrownianBatch& batch) {
  detail::check_batch(batch, model.grid(), "simulate_DZ_terminal");
  if (Y.paths() != batch.paths()) {
    throw DomainError("simulate_DZ_terminal: Y and batch path counts differ");
  }
  DerivativeRowEnsemble out{model.grid(), Matrix(batch.paths(), model.grid().size())};
  detail::for_each_path(batch, [&](std::size_t m, std::span<const double> dB, PathWorkspace& ws) {
    model.limit_path(dB, ws.state, ws, m);
    detail::check_coupled(Y, m, ws.state);
    model.dz_terminal_row(dB, ws.state, out.values.row(m), ws, m);
  });
  return out;
}

inline DerivativeRowEnsemble simulate_DZ_terminal(const CoefficientSet& c, const TimeGrid& grid,
                                                  const LimitPath& x, const PathEnsemble& Y,
                                                  const DerivativeField& D,
                                                  const BrownianBatch& batch) {
  LinearizedModel model(c, grid, x);
  if (!(D.grid == grid)) throw DomainError("simulate_DZ_terminal: field grid mismatch");
  return simulate_DZ_terminal(model, Y, batch);
}

/// Terminal and observed samples of all coupled processes from one pass over
/// the batch; the experiment runners use this instead of the per-process
/// simulators above (which share the same per-path routines).
struct CoupledSamples {
  std::vector<std::size_t> nodes;
  std::vector<double> eps;
  std::vector<Matrix> fluct;  // one (paths x nodes) matrix per eps
  Matrix y;                   // paths x nodes
  Matrix z;                   // paths x nodes
  std::vector<double> skorokhod;  // delta(Z_T DY_T), per path

  std::vector<double> column(const Matrix& mat, std::size_t slot) const {
    std::vector<double> out(mat.rows());
    for (std::size_t m = 0; m < out.size(); ++m) out[m] = mat(m, slot);
    return out;
  }
};

inline CoupledSamples simulate_coupled(const LinearizedModel& model, const BrownianBatch& batch,
                                       const std::vector<double>& eps_list,
                                       const std::vector<std::size_t>& nodes,
                                       bool with_correction) {
  detail::check_batch(batch, model.grid(), "simulate_coupled");
  detail::check_nodes(nodes, model.grid());
  for (double e : eps_list) {
    if (!(e > 0.0 && e < 1.0)) throw DomainError("simulate_coupled: eps must lie in (0, 1)");
  }
  const std::size_t paths = batch.paths();
  CoupledSamples out;
  out.nodes = nodes;
  out.eps = eps_list;
  out.fluct.assign(eps_list.size(), Matrix(paths, nodes.size()));
  out.y = Matrix(paths, nodes.size());
  if (with_correction) {
    out.z = Matrix(paths, nodes.size());
    out.skorokhod.assign(paths, 0.0);
  }
  detail::for_each_path(batch, [&](std::size_t m, std::span<const double> dB, PathWorkspace& ws) {
    model.limit_path(dB, ws.state, ws, m);
    for (std::size_t k = 0; k < nodes.size(); ++k) out.y(m, k) = ws.state[nodes[k]];
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
      model.fluctuation_path(eps_list[e], dB, ws.aux3, ws, m);
      for (std::size_t k = 0; k < nodes.size(); ++k) out.fluct[e](m, k) = ws.aux3[nodes[k]];
    }
    if (with_correction) {
      model.correction_path(dB, ws.state, ws.aux2, ws, m);
      for (std::size_t k = 0; k < nodes.size(); ++k) out.z(m, k) = ws.aux2[nodes[k]];
      out.skorokhod[m] = model.skorokhod_terminal(dB, ws.state, ws.aux2[model.grid().steps()]);
    }
  });
  return out;
}

}  // namespace vfluct
