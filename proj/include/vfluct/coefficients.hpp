#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vfluct/error.hpp"
#include "vfluct/grid.hpp"
#include "vfluct/kernels.hpp"

namespace vfluct {

using TimeKernel = std::function<double(double t, double s)>;
using StateMap = std::function<double(double x)>;

/// A state function with its first two derivatives.
struct StateProfile {
  StateMap f;
  StateMap df;
  StateMap d2f;
};

/// One coefficient in product form: c(t, s, x) = kernel(t, s) * g(x).
struct CoefficientTerm {
  TimeKernel kernel;
  StateProfile g;

  double value(double t, double s, double x) const { return kernel(t, s) * g.f(x); }
  double d1(double t, double s, double x) const { return kernel(t, s) * g.df(x); }
  double d2(double t, double s, double x) const { return kernel(t, s) * g.d2f(x); }
};

/// Drift b and diffusion sigma of the Volterra equation together with their
/// x-partials. Every built-in preset is separable in (t, s) and x, which is
/// what lets the simulators cache the time kernels once per grid.
struct CoefficientSet {
  std::string name;
  std::vector<double> params;
  std::optional<double> hurst;
  CoefficientTerm drift;
  CoefficientTerm diffusion;

  double b(double t, double s, double x) const { return drift.value(t, s, x); }
  double sigma(double t, double s, double x) const { return diffusion.value(t, s, x); }
  double db(double t, double s, double x) const { return drift.d1(t, s, x); }
  double dsigma(double t, double s, double x) const { return diffusion.d1(t, s, x); }
  double d2b(double t, double s, double x) const { return drift.d2(t, s, x); }
  double d2sigma(double t, double s, double x) const { return diffusion.d2(t, s, x); }
};

/// Kernel bounds k1, k2, k3 and exponents of the linear-growth and
/// bounded-derivative hypotheses.
struct AssumptionBounds {
  TimeKernel k1;
  TimeKernel k2;
  TimeKernel k3;
  double alpha = 2.0;
  double beta = 2.0;
  double gamma = 2.0;
  double L = 1.0;
};

namespace presets {

inline StateProfile zero_map() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
}
inline StateProfile constant_map(double c) {
  return {[c](double) { return c; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
}
inline StateProfile linear_map(double a) {
  return {[a](double x) { return a * x; }, [a](double) { return a; },
          [](double) { return 0.0; }};
}
inline StateProfile sine_map(double a) {
  return {[a](double x) { return a * std::sin(x); }, [a](double x) { return a * std::cos(x); },
          [a](double x) { return -a * std::sin(x); }};
}
inline StateProfile cosine_map() {
  return {[](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); },
          [](double x) { return -std::cos(x); }};
}
inline TimeKernel unit_kernel() {
  return [](double, double) { return 1.0; };
}
inline TimeKernel fbm_kernel(const FbmKernelParams& p) {
  return [p](double t, double s) { return eval_fbm_kernel(p, t, s); };
}

inline bool is_fbm_family(const std::string& name) {
  return name == "fbm-trig" || name == "fbm-additive";
}

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> all = {"additive-unit", "multiplicative", "linear-growth",
                                               "trig",          "fbm-trig",       "fbm-additive"};
  return all;
}

// Default parameter lists, used when the caller passes none.
inline std::vector<double> default_params(const std::string& name) {
  if (name == "linear-growth") return {1.0};      // a
  if (name == "trig") return {1.0, 1.0};          // k0, lambda
  if (name == "fbm-trig") return {1.0};           // drift amplitude a
  if (name == "fbm-additive") return {1.0};       // sigma0
  return {};
}

}  // namespace presets

/// Builds a named preset:
///   additive-unit   b = 0,                     sigma = 1
///   multiplicative  b = 0,                     sigma = x
///   linear-growth   b = a x,                   sigma = 1                  params [a]
///   trig            b = k sin x,               sigma = k cos x            params [k0, lambda],
///                   k(t, s) = k0 exp(-lambda (t - s))
///   fbm-trig        b = K_H a sin x,           sigma = K_H cos x          params [a]
///   fbm-additive    b = 0,                     sigma = K_H sigma0         params [sigma0]
/// fbm-family presets require H.
inline CoefficientSet make_preset(const std::string& name, std::vector<double> params = {},
                                  std::optional<double> hurst = std::nullopt) {
  using namespace presets;
  if (params.empty()) params = default_params(name);
  const auto expect = [&](std::size_t n) {
    if (params.size() != n) {
      throw DomainError("preset '" + name + "' takes " + std::to_string(n) + " parameter(s), got " +
                        std::to_string(params.size()));
    }
  };
  if (is_fbm_family(name) && !hurst) throw DomainError("preset '" + name + "' requires H");
  if (!is_fbm_family(name) && hurst) {
    throw DomainError("preset '" + name + "' does not take H");
  }

  CoefficientSet c;
  c.name = name;
  c.hurst = hurst;
  if (name == "additive-unit") {
    expect(0);
    c.drift = {unit_kernel(), zero_map()};
    c.diffusion = {unit_kernel(), constant_map(1.0)};
  } else if (name == "multiplicative") {
    expect(0);
    c.drift = {unit_kernel(), zero_map()};
    c.diffusion = {unit_kernel(), linear_map(1.0)};
  } else if (name == "linear-growth") {
    expect(1);
    c.drift = {unit_kernel(), linear_map(params[0])};
    c.diffusion = {unit_kernel(), constant_map(1.0)};
  } else if (name == "trig") {
    expect(2);
    const double k0 = params[0];
    const double lambda = params[1];
    TimeKernel k = [k0, lambda](double t, double s) { return k0 * std::exp(-lambda * (t - s)); };
    c.drift = {k, sine_map(1.0)};
    c.diffusion = {k, cosine_map()};
  } else if (name == "fbm-trig") {
    expect(1);
    const auto p = make_fbm_params(*hurst);
    c.drift = {fbm_kernel(p), sine_map(params[0])};
    c.diffusion = {fbm_kernel(p), cosine_map()};
  } else if (name == "fbm-additive") {
    expect(1);
    const auto p = make_fbm_params(*hurst);
    c.drift = {unit_kernel(), zero_map()};
    c.diffusion = {fbm_kernel(p), constant_map(params[0])};
  } else {
    throw DomainError("unknown preset '" + name + "'");
  }
  c.params = std::move(params);
  return c;
}

namespace detail {

// Exponent alpha > 1 keeping K_H^{2 alpha} integrable near both kernel
// singularities.
inline double fbm_integrability_exponent(double H) {
  const double gap = std::abs(1.0 - 2.0 * H);
  if (gap < 1e-12) return 2.0;
  return std::min(2.0, 0.5 * (1.0 + 1.0 / gap));
}

// sup_{t <= T} \int_0^t K_H(t, s)^{2 alpha} ds via self-similarity
// K_H(t, t u) = t^{H - 1/2} K_H(1, u).
inline double fbm_power_mass(const FbmKernelParams& p, double alpha, double T) {
  if (p.brownian) return T;
  const double H = p.H;
  auto value = [&](double u, double gap) {
    return std::pow(detail::fbm_kernel_gap(p, 1.0, u, gap), 2.0 * alpha);
  };
  const double unit = quad::integrate_singular(value, 0.0, 1.0, "power mass");
  return unit * std::pow(T, alpha * (2.0 * H - 1.0) + 1.0);
}

}  // namespace detail

/// Declared bounds for a built-in preset on [0, T].
inline AssumptionBounds preset_bounds(const CoefficientSet& c, double T) {
  AssumptionBounds bounds;
  const auto constant = [](double v) -> TimeKernel { return [v](double, double) { return v; }; };
  const auto sup_mass = [&](double k1, double k2, double k3) {
    return T * std::max(std::pow(k1, 2 * bounds.alpha) + std::pow(k2, 2 * bounds.beta),
                        std::pow(k3, 2 * bounds.gamma));
  };
  if (c.name == "additive-unit" || c.name == "multiplicative") {
    bounds.k1 = bounds.k2 = bounds.k3 = constant(1.0);
    bounds.L = sup_mass(1.0, 1.0, 1.0);
  } else if (c.name == "linear-growth") {
    const double a = std::abs(c.params.at(0));
    bounds.k1 = constant(std::max(1.0, a));
    bounds.k2 = constant(a);
    bounds.k3 = constant(1.0);
    bounds.L = sup_mass(std::max(1.0, a), a, 1.0);
  } else if (c.name == "trig") {
    const double k0 = std::abs(c.params.at(0));
    const double lambda = c.params.at(1);
    TimeKernel k = [k0, lambda](double t, double s) {
      return std::numbers::sqrt2 * k0 * std::exp(-lambda * (t - s));
    };
    bounds.k1 = bounds.k2 = bounds.k3 = k;
    const double kmax = std::numbers::sqrt2 * k0 * std::max(1.0, std::exp(-lambda * T));
    bounds.L = sup_mass(kmax, kmax, kmax);
  } else if (c.name == "fbm-trig" || c.name == "fbm-additive") {
    const auto p = make_fbm_params(c.hurst.value());
    const double m = c.name == "fbm-trig" ? std::abs(c.params.at(0)) + 1.0 : std::abs(c.params.at(0));
    TimeKernel k = [p, m](double t, double s) { return m * eval_fbm_kernel(p, t, s); };
    bounds.k1 = bounds.k2 = bounds.k3 = k;
    const double e = detail::fbm_integrability_exponent(p.H);
    bounds.alpha = bounds.beta = bounds.gamma = e;
    // Grid midpoint sums of a singular integrand may exceed the exact mass slightly.
    bounds.L = 1.25 * 2.0 * std::pow(m, 2 * e) * detail::fbm_power_mass(p, e, T);
  } else {
    throw DomainError("no declared bounds for preset '" + c.name + "'");
  }
  return bounds;
}

struct AssumptionReport {
  std::vector<std::string> violations;
  std::size_t checked_points = 0;
  double sup_growth_mass = 0.0;      // sup_t sum (k1^{2 alpha} + k2^{2 beta}) delta
  double sup_curvature_mass = 0.0;   // sup_t sum k3^{2 gamma} delta

  bool ok() const { return violations.empty(); }
};

/// Spot-checks linear growth and the derivative bounds at every pair
/// (t_j, s_i*), i < j, and every probe x; advisory only.
inline AssumptionReport check_assumptions(const CoefficientSet& c, const AssumptionBounds& bounds,
                                          const TimeGrid& grid, const std::vector<double>& probe_xs) {
  if (probe_xs.empty()) throw DomainError("check_assumptions: empty probe set");
  constexpr std::size_t kMaxMessages = 32;
  constexpr double kSlack = 1e-12;
  AssumptionReport report;
  const auto record = [&](const std::string& what, double t, double s, double x, double lhs,
                          double rhs) {
    if (report.violations.size() >= kMaxMessages) return;
    report.violations.push_back(what + " at (t=" + std::to_string(t) + ", s=" + std::to_string(s) +
                                ", x=" + std::to_string(x) + "): " + std::to_string(lhs) + " > " +
                                std::to_string(rhs));
  };
  const double d = grid.delta();
  for (std::size_t j = 1; j <= grid.steps(); ++j) {
    const double t = grid.node(j);
    double growth_mass = 0.0;
    double curvature_mass = 0.0;
    for (std::size_t i = 0; i < j; ++i) {
      const double s = grid.mid(i);
      const double k1 = bounds.k1(t, s);
      const double k2 = bounds.k2(t, s);
      const double k3 = bounds.k3(t, s);
      growth_mass += (std::pow(k1, 2 * bounds.alpha) + std::pow(k2, 2 * bounds.beta)) * d;
      curvature_mass += std::pow(k3, 2 * bounds.gamma) * d;
      for (double x : probe_xs) {
        ++report.checked_points;
        const double growth = std::abs(c.b(t, s, x)) + std::abs(c.sigma(t, s, x));
        const double lin = k1 * (1.0 + std::abs(x));
        if (growth > lin * (1.0 + kSlack)) record("linear growth", t, s, x, growth, lin);
        const double slope = std::abs(c.db(t, s, x)) + std::abs(c.dsigma(t, s, x));
        if (slope > k2 * (1.0 + kSlack)) record("first derivative bound", t, s, x, slope, k2);
        const double curv = std::abs(c.d2b(t, s, x)) + std::abs(c.d2sigma(t, s, x));
        if (curv > k3 * (1.0 + kSlack)) record("second derivative bound", t, s, x, curv, k3);
      }
    }
    report.sup_growth_mass = std::max(report.sup_growth_mass, growth_mass);
    report.sup_curvature_mass = std::max(report.sup_curvature_mass, curvature_mass);
  }
  if (report.sup_growth_mass > bounds.L) {
    report.violations.push_back("sup_t integral of k1^(2 alpha) + k2^(2 beta) = " +
                                std::to_string(report.sup_growth_mass) + " exceeds L = " +
                                std::to_string(bounds.L));
  }
  if (report.sup_curvature_mass > bounds.L) {
    report.violations.push_back("sup_t integral of k3^(2 gamma) = " +
                                std::to_string(report.sup_curvature_mass) + " exceeds L = " +
                                std::to_string(bounds.L));
  }
  return report;
}

}  // namespace vfluct
