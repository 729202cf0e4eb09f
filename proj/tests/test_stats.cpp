#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <gtest/gtest.h>

#include "vfluct/simulate.hpp"
#include "vfluct/stats.hpp"

using namespace vfluct;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed, double shift) {
  std::vector<double> out(n);
  NormalStream(seed, 0).fill(out);
  for (double& v : out) v += shift;
  return out;
}

// E[f(B)] for B ~ Normal(0, var): 60-point Gauss-Legendre on +-12 standard
// deviations, accurate to ~1e-15 for the bounded-times-cubic integrands here.
template <class F>
double gaussian_expectation(F f, double var) {
  const double sd = std::sqrt(var);
  auto integrand = [&](double u) {
    return f(sd * u) * std::exp(-0.5 * u * u) / std::sqrt(2 * std::numbers::pi);
  };
  return boost::math::quadrature::gauss<double, 60>::integrate(integrand, -12.0, 12.0);
}

}  // namespace

TEST(Moments, MeanAndRms) {
  const std::vector<double> xs = {1, 2, 3, 4};
  const auto m = mean_with_error(xs);
  EXPECT_DOUBLE_EQ(m.value, 2.5);
  EXPECT_NEAR(m.se, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_DOUBLE_EQ(root_mean_square(xs), std::sqrt(7.5));
  EXPECT_THROW(mean_with_error(std::vector<double>{}), DomainError);
}

TEST(Kolmogorov, TrivialCases) {
  const std::vector<double> a = {0.3, -1.0, 2.0, 2.0};
  EXPECT_EQ(kolmogorov_distance(a, a), 0.0);
  EXPECT_EQ(kolmogorov_distance(std::vector<double>{0.0}, std::vector<double>{1.0}), 1.0);
  EXPECT_DOUBLE_EQ(kolmogorov_distance(std::vector<double>{0, 1}, std::vector<double>{1, 2}), 0.5);
  EXPECT_THROW(kolmogorov_distance(a, std::vector<double>{}), DomainError);
}

TEST(Kolmogorov, UnitShiftedGaussians) {
  const double exact = 2 * normal_cdf(0.5) - 1;
  EXPECT_NEAR(exact, 0.3829, 1e-4);
  const auto a = normals(100000, 1, 0.0);
  const auto b = normals(100000, 2, 1.0);
  EXPECT_NEAR(kolmogorov_distance(a, b), exact, 0.01);
}

TEST(HistogramTv, TrivialCases) {
  const std::vector<double> a = {0.1, 0.5, 0.9, 0.3};
  EXPECT_EQ(tv_histogram(a, a, 7), 0.0);
  EXPECT_EQ(tv_histogram(std::vector<double>{0, 0.1}, std::vector<double>{5, 6}, 4), 1.0);
  EXPECT_THROW(tv_histogram(a, a, 1), DomainError);
  EXPECT_THROW(tv_histogram(a, std::vector<double>{}, 4), DomainError);
}

TEST(HistogramTv, UnitShiftedGaussiansWithFreedmanDiaconis) {
  const auto a = normals(100000, 3, 0.0);
  const auto b = normals(100000, 4, 1.0);
  const auto bins = freedman_diaconis_bins(a, b);
  EXPECT_GE(bins, kMinHistogramBins);
  EXPECT_NEAR(tv_histogram(a, b, bins), 2 * normal_cdf(0.5) - 1, 0.02);
}

TEST(HistogramTv, InvariantUnderIncreasingAffineMap) {
  // Dyadic data and a dyadic map keep every bin assignment exact.
  std::vector<double> a, b;
  for (int k = 0; k < 200; ++k) {
    a.push_back(std::ldexp(static_cast<double>((k * 37) % 101), -5));
    b.push_back(std::ldexp(static_cast<double>((k * 53) % 97 + 3), -5));
  }
  std::vector<double> ma(a), mb(b);
  for (double& v : ma) v = 4.0 * v - 8.0;
  for (double& v : mb) v = 4.0 * v - 8.0;
  for (std::size_t bins : {2, 16, 50}) {
    EXPECT_EQ(tv_histogram(a, b, bins), tv_histogram(ma, mb, bins)) << bins;
  }
  EXPECT_EQ(kolmogorov_distance(a, b), kolmogorov_distance(ma, mb));
}

TEST(DistanceReport, KolmogorovBelowTvPlusBootstrapMargin) {
  const auto a = normals(20000, 5, 0.0);
  const auto b = normals(20000, 6, 0.2);
  const auto r = distance_report(a, b, 0.1, 1.0, 99);
  EXPECT_GT(r.kolmogorov_se, 0.0);
  EXPECT_GT(r.tv_se, 0.0);
  EXPECT_LE(r.kolmogorov, r.tv_histogram + 4 * std::hypot(r.kolmogorov_se, r.tv_se));
  const auto again = distance_report(a, b, 0.1, 1.0, 99);
  EXPECT_EQ(r.kolmogorov_se, again.kolmogorov_se);
  EXPECT_EQ(r.tv_se, again.tv_se);
}

TEST(RateFit, ExactPowerLaws) {
  std::vector<std::pair<double, double>> lin, quad;
  for (double e : {0.4, 0.2, 0.1, 0.05}) {
    lin.push_back({e, e});
    quad.push_back({e, e * e});
  }
  const auto f1 = rate_fit(lin);
  EXPECT_NEAR(f1.slope, 1.0, 1e-12);
  EXPECT_NEAR(f1.residual, 0.0, 1e-12);
  EXPECT_EQ(f1.points, 4u);
  EXPECT_NEAR(rate_fit(quad).slope, 2.0, 1e-12);
}

TEST(RateFit, NoisyLinearLaw) {
  const double eta[] = {0.1, -0.1, 0.07, -0.05};
  std::vector<std::pair<double, double>> pts;
  int k = 0;
  for (double e : {0.4, 0.2, 0.1, 0.05}) pts.push_back({e, e * (1 + eta[k++])});
  const auto f = rate_fit(pts);
  EXPECT_GE(f.slope, 0.85);
  EXPECT_LE(f.slope, 1.15);
}

TEST(RateFit, Errors) {
  EXPECT_THROW(rate_fit(std::vector<std::pair<double, double>>{{0.1, 1}, {0.2, 2}}), DomainError);
  EXPECT_THROW(rate_fit(std::vector<std::pair<double, double>>{{0.1, 1}, {0.2, 0}, {0.3, 1}}),
               DomainError);
}

TEST(Skorokhod, ZeroCorrectionGivesZero) {
  const TimeGrid grid(1.0, 8);
  const std::vector<double> y = {1.0, -2.0}, z = {0.0, 0.0};
  const Matrix dz(2, grid.size());
  const std::vector<double> d(grid.size(), 1.0);
  for (double v : skorokhod_term(y, z, dz, d, grid)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(skorokhod_term(y, std::vector<double>{0.0}, dz, d, grid), DomainError);
  EXPECT_THROW(skorokhod_term(y, z, dz, std::vector<double>(3, 1.0), grid), DomainError);
}

TEST(Skorokhod, CenteredForTrig) {
  const TimeGrid grid(1.0, 64);
  const LinearizedModel model(make_preset("trig"), grid, 0.3);
  const auto s = simulate_coupled(model, sample_brownian(100000, grid, 17), {0.1}, {64}, true);
  const auto m = mean_with_error(s.skorokhod);
  EXPECT_LE(std::abs(m.value), 3 * m.se);
  EXPECT_GT(m.se, 0.0);
}

TEST(Skorokhod, MultiplicativeClosedForm) {
  // Y = B, Z = B_T^2 - T, DZ = 2 B_T: delta = (B_T^2 - T) B_T - 2 T B_T.
  std::vector<double> rms;
  for (std::size_t n : {64, 256, 1024}) {
    const TimeGrid grid(1.0, n);
    const LinearizedModel model(make_preset("multiplicative"), grid, 1.0);
    const auto batch = sample_brownian(1000, grid, 4);
    const auto s = simulate_coupled(model, batch, {0.1}, {n}, true);
    std::vector<double> gap(batch.paths());
    for (std::size_t m = 0; m < batch.paths(); ++m) {
      double B = 0.0;
      for (double v : batch.increments(m)) B += v;
      gap[m] = s.skorokhod[m] - ((B * B - 1.0) * B - 2.0 * B);
    }
    rms.push_back(root_mean_square(gap));
  }
  EXPECT_LT(rms[2], 0.6 * rms[0]);
  EXPECT_LT(rms[2], 0.2);
}

TEST(TestFunctions, ParseAndApply) {
  EXPECT_EQ(parse_test_function("cos"), TestFunction::Cos);
  EXPECT_EQ(std::string(test_function_id(TestFunction::Sigmoid)), "sigmoid");
  EXPECT_DOUBLE_EQ(apply(TestFunction::Sigmoid, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(apply(TestFunction::Constant, 3.0), 1.0);
  EXPECT_THROW(parse_test_function("x^2"), DomainError);
}

TEST(WeakExpansion, TrivialCases) {
  const std::vector<double> y = {0.1, -0.4, 1.2}, delta = {0.0, 0.0, 0.0};
  const auto lhs = thm2_lhs(TestFunction::Tanh, y, y, 0.05);
  EXPECT_EQ(lhs.value, 0.0);
  EXPECT_EQ(lhs.se, 0.0);
  const std::vector<double> x = {0.3, 0.2, -5.0};
  EXPECT_EQ(thm2_lhs(TestFunction::Constant, x, y, 0.05).value, 0.0);
  EXPECT_EQ(thm2_rhs(TestFunction::Cos, y, delta, 1.0).value, 0.0);
  EXPECT_THROW(thm2_lhs(TestFunction::Cos, x, y, 0.0), DomainError);
  EXPECT_THROW(thm2_rhs(TestFunction::Cos, y, delta, 0.0), DegenerateLawError);
  EXPECT_DOUBLE_EQ(combined_se({0, 3}, {0, 4}), 5.0);
}

TEST(WeakExpansion, MultiplicativeRhsMatchesQuadratureOracle) {
  const double x0 = 1.0, T = 1.0;
  const TimeGrid grid(T, 128);
  const LinearizedModel model(make_preset("multiplicative"), grid, x0);
  const auto s = simulate_coupled(model, sample_brownian(200000, grid, 23), {0.05}, {128}, true);
  const auto y = s.column(s.y, 0);
  for (auto phi : {TestFunction::Cos, TestFunction::Tanh, TestFunction::Sigmoid}) {
    const double oracle = gaussian_expectation(
        [&](double B) { return apply(phi, x0 * B) * (B * B * B - 3 * T * B); }, T) / (2 * T);
    const auto rhs = thm2_rhs(phi, y, s.skorokhod, model.variance().values.back());
    EXPECT_LE(std::abs(rhs.value - oracle), 3 * rhs.se) << test_function_id(phi);
  }
  // delta is odd under B -> -B and cos is even, so the cos rhs is centered.
  const auto rhs_cos = thm2_rhs(TestFunction::Cos, y, s.skorokhod, 1.0);
  EXPECT_LE(std::abs(rhs_cos.value), 3 * rhs_cos.se);
}

TEST(WeakExpansion, ConstantTestFunctionGivesCenteredRhs) {
  const TimeGrid grid(1.0, 64);
  const LinearizedModel model(make_preset("trig"), grid, 0.1);
  const auto s = simulate_coupled(model, sample_brownian(50000, grid, 8), {0.05}, {64}, true);
  const auto y = s.column(s.y, 0);
  EXPECT_EQ(thm2_lhs(TestFunction::Constant, s.column(s.fluct[0], 0), y, 0.05).value, 0.0);
  const auto rhs = thm2_rhs(TestFunction::Constant, y, s.skorokhod, model.variance().values.back());
  EXPECT_LE(std::abs(rhs.value), 3 * rhs.se);
}

// For multiplicative noise X~ = (exp(eps B - eps^2 T / 2) - 1)/eps exactly, so
// the difference quotient carries a next-order term that is linear in eps.
TEST(WeakExpansion, MultiplicativeDifferenceQuotientFollowsLognormalLaw) {
  const double T = 1.0;
  const TimeGrid grid(T, 256);
  const LinearizedModel model(make_preset("multiplicative"), grid, 1.0);
  const std::vector<double> eps = {0.1, 0.05};
  const auto s = simulate_coupled(model, sample_brownian(100000, grid, 31), eps, {256}, false);
  const auto y = s.column(s.y, 0);
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const double ep = eps[e];
    const double exact = gaussian_expectation(
        [&](double B) {
          return (std::cos(std::expm1(ep * B - 0.5 * ep * ep * T) / ep) - std::cos(B)) / ep;
        },
        T);
    const auto lhs = thm2_lhs(TestFunction::Cos, s.column(s.fluct[e], 0), y, ep);
    EXPECT_LE(std::abs(lhs.value - exact), 3 * lhs.se) << ep;
    EXPECT_GT(exact, 0.17 * ep);  // the cos rhs is zero
  }
}
