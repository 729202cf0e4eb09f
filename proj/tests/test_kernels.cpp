#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "vfluct/kernels.hpp"

using namespace vfluct;

TEST(FbmParams, Constants) {
  const auto p = make_fbm_params(0.7);
  EXPECT_FALSE(p.brownian);
  const double vh = std::tgamma(0.6) * std::cos(0.7 * M_PI) / (M_PI * 0.7 * (1 - 1.4));
  EXPECT_NEAR(p.VH, vh, 1e-14);
  EXPECT_NEAR(p.cH * p.cH, 0.7 * 0.4 / beta_function(0.6, 0.2), 1e-14);
  EXPECT_TRUE(make_fbm_params(0.5).brownian);
  EXPECT_TRUE(make_fbm_params(0.5 + 5e-7).brownian);
  EXPECT_FALSE(make_fbm_params(0.5 + 2e-6).brownian);
  EXPECT_THROW(make_fbm_params(0.0), DomainError);
  EXPECT_THROW(make_fbm_params(1.0), DomainError);
}

TEST(FbmKernel, BrownianCaseIsOne) {
  const auto p = make_fbm_params(0.5);
  for (double s : {0.01, 0.3, 0.99}) EXPECT_EQ(eval_fbm_kernel(p, 1.0, s), 1.0);
}

TEST(FbmKernel, DomainErrors) {
  const auto p = make_fbm_params(0.3);
  EXPECT_THROW(eval_fbm_kernel(p, 1.0, 0.0), DomainError);
  EXPECT_THROW(eval_fbm_kernel(p, 1.0, 1.0), DomainError);
  EXPECT_THROW(eval_fbm_kernel(p, 1.0, 1.5), DomainError);
}

TEST(FbmKernel, FrozenValues) {
  // 30-digit evaluations of the hypergeometric representation.
  EXPECT_NEAR(eval_fbm_kernel(make_fbm_params(0.3), 1, 0.5), 0.873014114338668044, 1e-10);
  EXPECT_NEAR(eval_fbm_kernel(make_fbm_params(0.7), 1, 0.5), 0.977140497393616788, 1e-10);
  EXPECT_NEAR(eval_fbm_kernel(make_fbm_params(0.9), 1, 0.5), 0.675897991721780406, 1e-10);
}

TEST(FbmKernel, HypergeometricRouteMatchesIntegralRoute) {
  for (double H : {0.55, 0.7, 0.9}) {
    const auto p = make_fbm_params(H);
    for (auto [t, s] : {std::pair{1.0, 0.5}, {1.0, 0.01}, {0.3, 0.29}, {2.0, 1e-4}}) {
      const double hyp = eval_fbm_kernel(p, t, s);
      const double integral = fbm_kernel_integral_route(p, t, s);
      EXPECT_LT(std::abs(hyp - integral), 1e-6 * std::abs(integral)) << H << " " << t << " " << s;
    }
  }
  EXPECT_THROW(fbm_kernel_integral_route(make_fbm_params(0.3), 1, 0.5), DomainError);
}

TEST(FbmKernel, SingularityNearDiagonalIsOfOrderGapPower) {
  const auto p = make_fbm_params(0.3);
  std::vector<double> normalized;
  for (double s : {0.99, 0.999, 0.9999}) {
    normalized.push_back(eval_fbm_kernel(p, 1.0, s) * std::pow(1.0 - s, 0.2));
  }
  for (double v : normalized) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 10.0);
  }
  EXPECT_NEAR(normalized[2] / normalized[0], 1.0, 0.05);
}

TEST(FbmKernel, NonNegativeAndMonotoneInFirstArgumentForLargeH) {
  for (double H : {0.3, 0.5, 0.7, 0.9}) {
    const auto p = make_fbm_params(H);
    for (int si = 1; si <= 9; ++si) {
      const double s = 0.1 * si;
      double prev = -1.0;
      for (int ti = 1; ti <= 40; ++ti) {
        const double t = s + 0.025 * ti;
        const double k = eval_fbm_kernel(p, t, s);
        EXPECT_GE(k, 0.0);
        if (H >= 0.5) {
          EXPECT_GE(k, prev - 1e-14) << H << " " << s << " " << t;
        }
        prev = k;
      }
    }
  }
}

TEST(KernelL2Mass, EqualsPowerLawForGridOfHurstAndTime) {
  for (double H : {0.3, 0.5, 0.7, 0.9}) {
    const auto p = make_fbm_params(H);
    for (double t : {0.25, 0.5, 1.0}) {
      const double expected = std::pow(t, 2 * H);
      EXPECT_LE(std::abs(kernel_l2_mass(p, t) - expected) / expected, 1e-3) << H << " " << t;
    }
  }
  EXPECT_EQ(kernel_l2_mass(make_fbm_params(0.5), 0.25), 0.25);
  EXPECT_NEAR(kernel_l2_mass(make_fbm_params(0.3), 0.5), 0.659754, 1e-5);
  EXPECT_NEAR(kernel_l2_mass(make_fbm_params(0.7), 1.0), 1.0, 1e-6);
  EXPECT_THROW(kernel_l2_mass(make_fbm_params(0.7), 0.0), DomainError);
}

TEST(FbmCovariance, Formula) {
  EXPECT_DOUBLE_EQ(fbm_covariance(0.7, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(fbm_covariance(0.3, 0.8, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(fbm_covariance(0.5, 2, 1), 1.0);
  EXPECT_DOUBLE_EQ(fbm_covariance(0.7, 1, 0.5), 0.5);
}

TEST(FbmSynthesis, WeightsReproduceVarianceOnGrid) {
  const TimeGrid grid(1.0, 64);
  for (double H : {0.3, 0.7}) {
    const auto p = make_fbm_params(H);
    for (std::size_t j : {std::size_t{1}, std::size_t{32}, std::size_t{64}}) {
      const auto w = fbm_synthesis_weights(p, grid, j);
      double var = 0.0;
      for (double v : w) var += v * v * grid.delta();
      const double t = grid.node(j);
      EXPECT_NEAR(var / std::pow(t, 2 * H), 1.0, 2e-3) << H << " " << j;
    }
  }
  EXPECT_THROW(fbm_synthesis_weights(make_fbm_params(0.3), grid, 0), DomainError);
}

TEST(FbmSynthesis, BrownianWeightsAreOne) {
  const TimeGrid grid(1.0, 8);
  for (double w : fbm_synthesis_weights(make_fbm_params(0.5), grid, 8)) EXPECT_DOUBLE_EQ(w, 1.0);
}
