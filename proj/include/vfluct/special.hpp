#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "vfluct/error.hpp"

namespace vfluct {

inline constexpr std::size_t kHyp2f1MaxTerms = 100000;

namespace detail {

inline bool is_nonpositive_integer(double v) {
  return v <= 0.0 && std::nearbyint(v) == v;
}

inline double distance_to_integer(double v) {
  return std::abs(v - std::nearbyint(v));
}

// 1/Gamma(v), zero at the poles.
inline double rgamma(double v) {
  if (is_nonpositive_integer(v)) return 0.0;
  return 1.0 / std::tgamma(v);
}

[[noreturn]] inline void hyp2f1_failure(const char* what, double a, double b, double c,
                                        double z) {
  std::ostringstream os;
  os.precision(17);
  os << "hyp2f1(" << a << ", " << b << ", " << c << ", " << z << "): " << what;
  throw NumericalFailure(os.str());
}

// Maclaurin series of 2F1 for x in [0, 1); stops once a term drops below
// 1e-16 of the partial sum.
inline double hyp2f1_series(double a, double b, double c, double x, double a0, double b0,
                            double c0, double z0) {
  double term = 1.0;
  double sum = 1.0;
  for (std::size_t n = 0; n < kHyp2f1MaxTerms; ++n) {
    const double dn = static_cast<double>(n);
    term *= (a + dn) * (b + dn) / ((c + dn) * (dn + 1.0)) * x;
    sum += term;
    if (term == 0.0 || std::abs(term) < 1e-16 * std::abs(sum)) return sum;
    if (!std::isfinite(sum)) hyp2f1_failure("series overflow", a0, b0, c0, z0);
  }
  hyp2f1_failure("series did not converge within the term cap", a0, b0, c0, z0);
}

}  // namespace detail

/// Gauss hypergeometric function 2F1(a, b; c; z) for z <= 0.
///
/// The Pfaff transformation 2F1(a,b;c;z) = (1-z)^{-a} 2F1(a, c-b; c; w) with
/// w = z/(z-1) moves the series argument into [0, 1). When w is close to 1 and
/// the transformed parameters are not in the logarithmic case, the 1-w
/// connection formula is applied to the transformed function so that kernels
/// evaluated near s = 0 stay cheap. Throws NumericalFailure if the series hits
/// the term cap.
inline double hyp2f1(double a, double b, double c, double z) {
  if (std::isnan(a) || std::isnan(b) || std::isnan(c) || std::isnan(z)) {
    throw DomainError("hyp2f1: NaN argument");
  }
  if (detail::is_nonpositive_integer(c)) {
    throw DomainError("hyp2f1: c must not be a non-positive integer");
  }
  if (z > 0.0 || !std::isfinite(z)) throw DomainError("hyp2f1: only finite z <= 0 is supported");
  if (z == 0.0 || a == 0.0) return 1.0;

  const double w = z / (z - 1.0);
  const double one_minus_w = 1.0 / (1.0 - z);
  // w rounds to 1 once |z| > 1e16; one_minus_w keeps the information.
  if (!(w >= 0.0 && w <= 1.0 && one_minus_w > 0.0)) {
    throw std::logic_error("hyp2f1: Pfaff argument left [0, 1)");
  }
  const double prefactor = std::pow(one_minus_w, a);  // (1 - z)^{-a}
  const double bp = c - b;

  // Connection formula in 1 - w; d = c - a - bp.
  const double d = c - a - bp;
  if (w > 0.75 && detail::distance_to_integer(d) > 1e-3) {
    const double g1 = std::tgamma(c) * std::tgamma(d) * detail::rgamma(c - a) *
                      detail::rgamma(c - bp);
    const double g2 = std::tgamma(c) * std::tgamma(-d) * detail::rgamma(a) *
                      detail::rgamma(bp);
    if (std::isfinite(g1) && std::isfinite(g2)) {
      double f1 = 0.0;
      if (g1 != 0.0) f1 = detail::hyp2f1_series(a, bp, 1.0 - d, one_minus_w, a, b, c, z);
      double f2 = 0.0;
      if (g2 != 0.0) {
        f2 = std::pow(one_minus_w, d) *
             detail::hyp2f1_series(c - a, c - bp, 1.0 + d, one_minus_w, a, b, c, z);
      }
      return prefactor * (g1 * f1 + g2 * f2);
    }
  }
  return prefactor * detail::hyp2f1_series(a, bp, c, w, a, b, c, z);
}

inline double beta_function(double x, double y) {
  return std::exp(std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace vfluct
