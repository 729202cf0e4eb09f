#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "vfluct/error.hpp"
#include "vfluct/grid.hpp"
#include "vfluct/quadrature.hpp"
#include "vfluct/special.hpp"

namespace vfluct {

inline constexpr double kBrownianTolerance = 1e-6;

/// Constants of the fractional Brownian motion kernel K_H.
struct FbmKernelParams {
  double H = 0.5;
  double cH = 0.0;  // only meaningful for H > 1/2
  double VH = 1.0;  // only meaningful away from H = 1/2
  bool brownian = true;
  double norm = 1.0;  // 1 / (Gamma(H + 1/2) sqrt(V_H))
};

inline FbmKernelParams make_fbm_params(double H) {
  if (!(H > 0.0 && H < 1.0)) throw DomainError("fBm kernel: H must lie in (0, 1)");
  FbmKernelParams p;
  p.H = H;
  p.brownian = std::abs(H - 0.5) <= kBrownianTolerance;
  if (!p.brownian) {
    p.VH = std::tgamma(2.0 - 2.0 * H) * std::cos(std::numbers::pi * H) /
           (std::numbers::pi * H * (1.0 - 2.0 * H));
    p.norm = 1.0 / (std::tgamma(H + 0.5) * std::sqrt(p.VH));
  }
  if (H > 0.5 && !p.brownian) {
    p.cH = std::sqrt(H * (2.0 * H - 1.0) / beta_function(2.0 - 2.0 * H, H - 0.5));
  }
  return p;
}

namespace detail {

// K_H(t, s) with the gap t - s supplied by the caller.
inline double fbm_kernel_gap(const FbmKernelParams& p, double t, double s, double gap) {
  if (p.brownian) return 1.0;
  const double H = p.H;
  return std::pow(gap, H - 0.5) * p.norm * hyp2f1(H - 0.5, 0.5 - H, H + 0.5, 1.0 - t / s);
}

inline void check_kernel_domain(double t, double s) {
  if (!(s > 0.0) || !(s < t)) throw DomainError("fBm kernel: requires 0 < s < t");
}

}  // namespace detail

/// K_H(t, s) through the hypergeometric representation; exactly 1 at H = 1/2.
inline double eval_fbm_kernel(const FbmKernelParams& p, double t, double s) {
  detail::check_kernel_domain(t, s);
  return detail::fbm_kernel_gap(p, t, s, t - s);
}

/// K_H(t, s) for H > 1/2 through
///   c_H s^{1/2-H} \int_s^t (u - s)^{H-3/2} u^{H-1/2} du,
/// with u = s + v^{1/(H-1/2)} removing the endpoint singularity.
inline double fbm_kernel_integral_route(const FbmKernelParams& p, double t, double s) {
  detail::check_kernel_domain(t, s);
  if (p.brownian || p.H <= 0.5) {
    throw DomainError("fBm kernel integral route needs H > 1/2");
  }
  const double h = p.H - 0.5;
  const double q = 1.0 / h;
  auto integrand = [&](double v) { return std::pow(s + std::pow(v, q), h) / h; };
  const double integral =
      quad::integrate(integrand, 0.0, std::pow(t - s, h), "fBm kernel integral route");
  return p.cH * std::pow(s, -h) * integral;
}

/// R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2.
inline double fbm_covariance(double H, double t, double s) {
  const double e = 2.0 * H;
  return 0.5 * (std::pow(t, e) + std::pow(s, e) - std::pow(std::abs(t - s), e));
}

/// Cell integrals of K_H(t, .) and K_H(t, .)^2 over [a, b] with a < b <= t.
inline double kernel_cell_integral(const FbmKernelParams& p, double t, double a, double b,
                                   bool squared) {
  if (p.brownian) return b - a;
  auto value = [&](double s, double gap) {
    const double k = detail::fbm_kernel_gap(p, t, s, b == t ? gap : t - s);
    return squared ? k * k : k;
  };
  if (a == 0.0 || b == t) return quad::integrate_singular(value, a, b, "kernel cell integral");
  return quad::integrate([&](double s) { return value(s, t - s); }, a, b, "kernel cell integral");
}

/// \int_0^t K_H(t, s)^2 ds; the integrand is singular like s^{-|2H-1|} at 0 and,
/// for H < 1/2, like (t - s)^{2H-1} at t.
inline double kernel_l2_mass(const FbmKernelParams& p, double t) {
  if (!(t > 0.0)) throw DomainError("kernel_l2_mass: t must be positive");
  if (p.brownian) return t;
  return kernel_cell_integral(p, t, 0.0, t, true);
}

/// Weights w_i such that B^H_{t_j} ~ sum_{i<j} w_i dB_i reproduces the
/// fBm covariance on the grid. Interior cells use the cell average of
/// K_H(t_j, .); the two boundary cells, where the kernel may blow up, use the
/// root-mean-square value so that the singular mass is kept.
inline std::vector<double> fbm_synthesis_weights(const FbmKernelParams& p, const TimeGrid& grid,
                                                 std::size_t j) {
  if (j == 0 || j > grid.steps()) throw DomainError("fbm_synthesis_weights: node out of range");
  const double t = grid.node(j);
  const double d = grid.delta();
  std::vector<double> w(j);
  for (std::size_t i = 0; i < j; ++i) {
    const double a = grid.node(i);
    const double b = (i + 1 == j) ? t : grid.node(i + 1);
    if (i == 0 || i + 1 == j) {
      w[i] = std::sqrt(kernel_cell_integral(p, t, a, b, true) / d);
    } else {
      w[i] = kernel_cell_integral(p, t, a, b, false) / d;
    }
  }
  return w;
}

}  // namespace vfluct
