#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "vfluct/error.hpp"

namespace vfluct::quad {

inline constexpr double kRelTol = 1e-10;
inline constexpr double kFailTol = 1e-6;
inline constexpr unsigned kMaxDepth = 18;

/// Adaptive 31-point Gauss-Kronrod on [a, b]. Endpoints are never sampled.
template <class F>
double integrate(F&& f, double a, double b, const char* what = "quadrature") {
  if (a == b) return 0.0;
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, kMaxDepth, kRelTol, &error, &l1);
  if (!std::isfinite(value) || error > kFailTol * l1 + 1e-300) {
    std::ostringstream os;
    os << what << ": adaptive quadrature did not converge on [" << a << ", " << b
       << "], error estimate " << error;
    throw NumericalFailure(os.str());
  }
  return value;
}

/// Integral over [a, b] of f(s, gap) with integrable algebraic singularities
/// at either endpoint, by tanh-sinh quadrature. gap is b - s, computed without
/// cancellation near b.
template <class F>
double integrate_singular(F&& f, double a, double b, const char* what) {
  if (a == b) return 0.0;
  boost::math::quadrature::tanh_sinh<double> rule(15);
  // sc is a - s on the left half and b - s on the right half.
  auto g = [&](double s, double sc) { return f(s, sc > 0.0 ? sc : b - s); };
  double error = 0.0;
  double l1 = 0.0;
  const double value = rule.integrate(g, a, b, kRelTol, &error, &l1);
  if (!std::isfinite(value) || error > kFailTol * l1 + 1e-300) {
    std::ostringstream os;
    os << what << ": tanh-sinh quadrature did not converge on [" << a << ", " << b
       << "], error estimate " << error;
    throw NumericalFailure(os.str());
  }
  return value;
}

}  // namespace vfluct::quad
