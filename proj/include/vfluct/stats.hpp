#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vfluct/error.hpp"
#include "vfluct/grid.hpp"
#include "vfluct/linalg.hpp"
#include "vfluct/rng.hpp"

namespace vfluct {

inline constexpr std::size_t kMinHistogramBins = 16;
inline constexpr std::size_t kMaxHistogramBins = 1 << 16;
inline constexpr std::size_t kBootstrapResamples = 200;

struct MeanWithError {
  double value = 0.0;
  double se = 0.0;
};

/// Sample mean and its standard error, accumulated in index order.
inline MeanWithError mean_with_error(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("mean_with_error: empty sample");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

inline double root_mean_square(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("root_mean_square: empty sample");
  double ss = 0.0;
  for (double x : xs) ss += x * x;
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

/// sup_x |F_a(x) - F_b(x)| of the two empirical CDFs, by a merge of the
/// sorted samples. Ties across samples are consumed together.
inline double kolmogorov_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("kolmogorov_distance: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Half the L1 distance between the two histograms on a shared binning of
/// the pooled range [min, max] with `bins` equal cells.
inline double tv_histogram(std::span<const double> a, std::span<const double> b, std::size_t bins) {
  if (a.empty() || b.empty()) throw DomainError("tv_histogram: empty sample");
  if (bins < 2) throw DomainError("tv_histogram: need at least 2 bins");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  if (!(hi > lo)) return 0.0;
  const double nbins = static_cast<double>(bins);
  const auto index = [&](double x) {
    const double r = std::floor((x - lo) / (hi - lo) * nbins);
    return std::min(bins - 1, static_cast<std::size_t>(std::max(r, 0.0)));
  };
  std::vector<double> p(bins, 0.0), q(bins, 0.0);
  for (double x : a) p[index(x)] += 1.0;
  for (double x : b) q[index(x)] += 1.0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double tv = 0.0;
  for (std::size_t k = 0; k < bins; ++k) tv += std::abs(p[k] / na - q[k] / nb);
  return 0.5 * tv;
}

namespace detail {

// Linear-interpolation quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& s, double prob) {
  const double pos = prob * static_cast<double>(s.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace detail

/// Freedman-Diaconis bin count on the pooled sample, floored at 16 bins.
inline std::size_t freedman_diaconis_bins(std::span<const double> a, std::span<const double> b) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  if (pooled.size() < 2) return kMinHistogramBins;
  std::sort(pooled.begin(), pooled.end());
  const double iqr = detail::sorted_quantile(pooled, 0.75) - detail::sorted_quantile(pooled, 0.25);
  const double range = pooled.back() - pooled.front();
  if (!(iqr > 0.0) || !(range > 0.0)) return kMinHistogramBins;
  const double width = 2.0 * iqr * std::pow(static_cast<double>(pooled.size()), -1.0 / 3.0);
  const double count = std::ceil(range / width);
  return std::clamp(static_cast<std::size_t>(count), kMinHistogramBins, kMaxHistogramBins);
}

struct DistanceReport {
  double epsilon = 0.0;
  double t = 0.0;
  double kolmogorov = 0.0;
  double kolmogorov_se = 0.0;
  double tv_histogram = 0.0;
  double tv_se = 0.0;
  std::size_t bins = 0;
  std::size_t samples_a = 0;
  std::size_t samples_b = 0;
};

/// Kolmogorov and histogram-TV distances with bootstrap standard errors.
/// Equal-sized samples are treated as coupled and resampled by path index.
inline DistanceReport distance_report(std::span<const double> a, std::span<const double> b,
                                      double epsilon, double t, std::uint64_t seed,
                                      std::size_t resamples = kBootstrapResamples) {
  DistanceReport r;
  r.epsilon = epsilon;
  r.t = t;
  r.samples_a = a.size();
  r.samples_b = b.size();
  r.bins = freedman_diaconis_bins(a, b);
  r.kolmogorov = kolmogorov_distance(a, b);
  r.tv_histogram = tv_histogram(a, b, r.bins);
  if (resamples < 2) return r;

  const bool paired = a.size() == b.size();
  const Philox4x32 philox(seed);
  const auto draw = [&](std::uint64_t rep, std::uint64_t k, std::uint32_t lane,
                        std::size_t n) -> std::size_t {
    const auto out = philox({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                             static_cast<std::uint32_t>(rep), 0xB007u + lane});
    return static_cast<std::size_t>((static_cast<std::uint64_t>(out[0]) * n) >> 32);
  };
  std::vector<double> ra(a.size()), rb(b.size());
  std::vector<double> ks(resamples), tv(resamples);
  for (std::size_t rep = 0; rep < resamples; ++rep) {
    for (std::size_t k = 0; k < a.size(); ++k) {
      const std::size_t idx = draw(rep, k, 0, a.size());
      ra[k] = a[idx];
      if (paired) rb[k] = b[idx];
    }
    if (!paired) {
      for (std::size_t k = 0; k < b.size(); ++k) rb[k] = b[draw(rep, k, 1, b.size())];
    }
    ks[rep] = kolmogorov_distance(ra, rb);
    tv[rep] = tv_histogram(ra, rb, r.bins);
  }
  const auto sd = [](const std::vector<double>& v) {
    const auto m = mean_with_error(v);
    return m.se * std::sqrt(static_cast<double>(v.size()));
  };
  r.kolmogorov_se = sd(ks);
  r.tv_se = sd(tv);
  return r;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // Euclidean norm of log-log residuals
  std::size_t points = 0;
};

/// Ordinary least squares of log(distance) on log(epsilon).
inline RateFit rate_fit(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw DomainError("rate_fit: need at least 3 points");
  std::vector<double> xs, ys;
  for (const auto& [eps, dist] : points) {
    if (!(eps > 0.0) || !(dist > 0.0)) {
      throw DomainError("rate_fit: non-positive value (distance below Monte Carlo resolution)");
    }
    xs.push_back(std::log(eps));
    ys.push_back(std::log(dist));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("rate_fit: epsilon values must differ");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = ys[k] - (fit.intercept + fit.slope * xs[k]);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss);
  fit.points = xs.size();
  return fit;
}

inline RateFit rate_fit(const std::vector<std::pair<double, double>>& points) {
  return rate_fit(std::span<const std::pair<double, double>>(points));
}

/// Per-path delta(Z_T DY_T) = Z_T Y_T - sum_i DZ[i] D_row[i] delta from the
/// duality relation; D_row is the terminal column of the derivative field.
inline std::vector<double> skorokhod_term(std::span<const double> y_terminal,
                                          std::span<const double> z_terminal,
                                          const Matrix& dz_rows, std::span<const double> d_row,
                                          const TimeGrid& grid) {
  const std::size_t m = y_terminal.size();
  if (z_terminal.size() != m || dz_rows.rows() != m) {
    throw DomainError("skorokhod_term: per-path inputs differ in length");
  }
  if (d_row.size() != grid.size() || dz_rows.cols() != grid.size()) {
    throw DomainError("skorokhod_term: derivative rows must have N+1 entries");
  }
  std::vector<double> out(m);
  for (std::size_t p = 0; p < m; ++p) {
    const double inner = dot(dz_rows.row(p).data(), d_row.data(), d_row.size()) * grid.delta();
    out[p] = z_terminal[p] * y_terminal[p] - inner;
  }
  return out;
}

/// Bounded test functions for the weak expansion.
enum class TestFunction { Cos, Tanh, Sigmoid, Constant };

inline TestFunction parse_test_function(const std::string& id) {
  if (id == "cos") return TestFunction::Cos;
  if (id == "tanh") return TestFunction::Tanh;
  if (id == "sigmoid") return TestFunction::Sigmoid;
  if (id == "const") return TestFunction::Constant;
  throw DomainError("unknown test function '" + id + "' (expected cos, tanh, sigmoid, const)");
}

inline const char* test_function_id(TestFunction f) {
  switch (f) {
    case TestFunction::Cos: return "cos";
    case TestFunction::Tanh: return "tanh";
    case TestFunction::Sigmoid: return "sigmoid";
    case TestFunction::Constant: return "const";
  }
  return "?";
}

/// cos(x), tanh(x), the logistic smoothing 1/(1 + exp(-4x)) of the indicator
/// of [0, inf), or the constant 1.
inline double apply(TestFunction f, double x) {
  switch (f) {
    case TestFunction::Cos: return std::cos(x);
    case TestFunction::Tanh: return std::tanh(x);
    case TestFunction::Sigmoid: return 1.0 / (1.0 + std::exp(-4.0 * x));
    case TestFunction::Constant: return 1.0;
  }
  return 0.0;
}

/// Mean of (phi(X~_T) - phi(Y_T))/eps over coupled paths.
inline MeanWithError thm2_lhs(TestFunction phi, std::span<const double> fluct,
                              std::span<const double> y, double eps) {
  if (eps == 0.0) throw DomainError("thm2_lhs: eps must be non-zero");
  if (fluct.size() != y.size()) throw DomainError("thm2_lhs: samples must be coupled");
  std::vector<double> diff(y.size());
  for (std::size_t m = 0; m < y.size(); ++m) diff[m] = (apply(phi, fluct[m]) - apply(phi, y[m])) / eps;
  return mean_with_error(diff);
}

/// Mean of phi(Y_T) delta / (2 Var(Y_T)).
inline MeanWithError thm2_rhs(TestFunction phi, std::span<const double> y,
                              std::span<const double> skorokhod, double var_y) {
  if (!(var_y > 0.0)) throw DegenerateLawError("thm2_rhs: Var(Y_T) must be positive");
  if (skorokhod.size() != y.size()) throw DomainError("thm2_rhs: samples must be coupled");
  std::vector<double> v(y.size());
  for (std::size_t m = 0; m < y.size(); ++m) v[m] = apply(phi, y[m]) * skorokhod[m] / (2.0 * var_y);
  return mean_with_error(v);
}

inline double combined_se(const MeanWithError& a, const MeanWithError& b) {
  return std::sqrt(a.se * a.se + b.se * b.se);
}

}  // namespace vfluct
