#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mixboot/kernels.hpp"
#include "test_support.hpp"

using namespace mixboot;
using mixboot::test::central_diff;
using mixboot::test::simpson;

namespace {

struct Case {
  Kernel kernel;
  double theta_lo, theta_hi;
};

// The three shipped families, with parameter ranges for randomized checks.
std::vector<Case> families() {
  return {{Kernel::gaussian_location(0.1), -5.0, 5.0},
          {Kernel::gaussian_common_variance(2.5), -5.0, 5.0},
          {Kernel::exponential(), 0.2, 5.0}};
}

// Integration range covering all but a negligible tail of k(. | theta).
std::pair<double, double> support(const Kernel& k, double theta) {
  if (k.family() == Family::Exponential) return {0.0, 60.0 * theta};
  return {theta - 14.0 * k.sigma(), theta + 14.0 * k.sigma()};
}

// (k')^2 / k by quadrature over the closed-form density.
double fisher_by_quadrature(const Kernel& k, double theta) {
  auto [a, b] = support(k, theta);
  auto integrand = [&](double y) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta));
    const double kp = central_diff([&](double t) { return k.density(y, t); }, theta, h);
    const double kv = k.density(y, theta);
    return kv > 1e-300 ? kp * kp / kv : 0.0;
  };
  return simpson(integrand, a, b, 40000);
}

}  // namespace

TEST(KernelDensity, GaussianPeakValue) {
  const auto k = Kernel::gaussian_location(0.1);
  EXPECT_NEAR(k.density(1.0, 1.0), 1.0 / (0.1 * std::sqrt(2.0 * std::numbers::pi)), 1e-12);
  EXPECT_NEAR(k.density(1.0, 1.0), 3.9894228, 1e-7);
}

TEST(KernelDensity, ExponentialAtZero) { EXPECT_DOUBLE_EQ(Kernel::exponential().density(0.0, 2.0), 0.5); }

TEST(KernelDensity, FarTailStaysFinite) {
  const auto k = Kernel::gaussian_location(0.1);
  const double d = k.density(1.0, 5.0);
  EXPECT_FALSE(std::isnan(d));
  EXPECT_GE(d, 0.0);
  EXPECT_LT(d, 1e-100);
  EXPECT_TRUE(std::isfinite(k.log_density(1.0, 5.0)));
}

TEST(KernelDensity, DomainErrors) {
  const auto e = Kernel::exponential();
  EXPECT_THROW(e.density(1.0, 0.0), std::domain_error);
  EXPECT_THROW(e.density(1.0, -1.0), std::domain_error);
  EXPECT_THROW(e.grad_theta(1.0, 0.0), std::domain_error);
  EXPECT_THROW(e.fisher_info(-2.0), std::domain_error);
  EXPECT_THROW(e.cdf(1.0, 0.0), std::domain_error);
  Rng rng(1);
  EXPECT_THROW(e.sample(0.0, rng), std::domain_error);
  EXPECT_THROW(Kernel::gaussian_location(0.0), std::invalid_argument);
  EXPECT_THROW(Kernel::gaussian_common_variance(-1.0), std::domain_error);
  const auto g = Kernel::gaussian_location(1.0);
  EXPECT_THROW(g.density(0.0, std::nan("")), std::domain_error);
}

TEST(KernelGradient, ZeroAtMode) {
  EXPECT_DOUBLE_EQ(Kernel::gaussian_location(0.1).grad_theta(2.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(Kernel::exponential().grad_theta(2.0, 2.0), 0.0);
}

TEST(KernelGradient, MatchesFiniteDifferenceExample) {
  const auto k = Kernel::gaussian_location(0.1);
  const double fd = central_diff([&](double t) { return k.density(1.1, t); }, 1.0);
  const double an = k.grad_theta(1.1, 1.0);
  EXPECT_LT(std::abs(fd - an) / std::abs(an), 1e-6);
}

TEST(KernelGradient, MatchesFiniteDifferenceRandom) {
  std::mt19937_64 rng(7);
  for (const auto& c : families()) {
    std::uniform_real_distribution<double> th(c.theta_lo, c.theta_hi), u(0.3, 3.0), sgn(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double theta = th(rng);
      double y;
      if (c.kernel.family() == Family::Exponential) {
        // away from y = theta where the gradient vanishes
        y = theta * (sgn(rng) < 0.5 ? u(rng) / 3.5 : 1.0 + u(rng));
      } else {
        y = theta + (sgn(rng) < 0.5 ? -1.0 : 1.0) * u(rng) * c.kernel.sigma();
      }
      const double fd = central_diff([&](double t) { return c.kernel.density(y, t); }, theta);
      const double an = c.kernel.grad_theta(y, theta);
      worst = std::max(worst, std::abs(fd - an) / std::abs(an));
    }
    EXPECT_LT(worst, 1e-6) << c.kernel.name();
  }
}

TEST(KernelGradient, ScoreIsGradientOverDensity) {
  const auto k = Kernel::exponential();
  for (double y : {0.1, 1.0, 4.0}) {
    EXPECT_NEAR(k.score(y, 2.0), k.grad_theta(y, 2.0) / k.density(y, 2.0), 1e-14);
  }
  EXPECT_EQ(k.score(-1.0, 2.0), 0.0);
}

TEST(KernelGradient, VarianceScoreMatchesFiniteDifference) {
  const double y = 0.7, mu = 0.2, v = 1.3;
  const double fd = central_diff(
      [&](double s2) { return Kernel::gaussian_common_variance(s2).log_density(y, mu); }, v);
  EXPECT_NEAR(Kernel::gaussian_common_variance(v).score_variance(y, mu), fd, 1e-8);
}

TEST(KernelFisher, GaussianSigmaTenth) {
  const auto k = Kernel::gaussian_location(0.1);
  EXPECT_NEAR(fisher_by_quadrature(k, 0.3), 100.0, 1e-4);
  EXPECT_NEAR(k.fisher_info(0.3), 100.0, 1e-9);
  EXPECT_NEAR(k.fisher_info(-7.0), 100.0, 1e-9);
}

TEST(KernelFisher, ExponentialScaleTwo) {
  const auto k = Kernel::exponential();
  EXPECT_NEAR(fisher_by_quadrature(k, 2.0), 0.25, 1e-6);
  EXPECT_DOUBLE_EQ(k.fisher_info(2.0), 0.25);
}

TEST(KernelFisher, GaussianUnitSigma) {
  const auto k = Kernel::gaussian_location(1.0);
  EXPECT_NEAR(fisher_by_quadrature(k, 0.0), 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(k.fisher_info(0.0), 1.0);
}

TEST(KernelFisher, PositiveAndMatchesQuadrature) {
  std::mt19937_64 rng(11);
  for (const auto& c : families()) {
    std::uniform_real_distribution<double> th(c.theta_lo, c.theta_hi);
    for (int i = 0; i < 5; ++i) {
      const double theta = th(rng);
      const double info = c.kernel.fisher_info(theta);
      EXPECT_GT(info, 0.0);
      EXPECT_NEAR(fisher_by_quadrature(c.kernel, theta), info, 1e-5 * info) << c.kernel.name();
    }
  }
  EXPECT_THROW(Kernel::point_mass().fisher_info(0.0), std::domain_error);
}

TEST(KernelSample, GaussianMeanWithinClt) {
  const auto k = Kernel::gaussian_location(0.1);
  Rng rng(2024);
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += k.sample(3.0, rng);
  EXPECT_NEAR(s / n, 3.0, 4.0 * 0.1 / std::sqrt(static_cast<double>(n)));
}

TEST(KernelSample, ExponentialMeanWithinClt) {
  const auto k = Kernel::exponential();
  Rng rng(2025);
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += k.sample(2.0, rng);
  EXPECT_NEAR(s / n, 2.0, 4.0 * 2.0 / std::sqrt(static_cast<double>(n)));
}

TEST(KernelSample, DeterministicGivenSeed) {
  for (const auto& c : families()) {
    Rng a(99), b(99);
    const double theta = 0.5 * (c.theta_lo + c.theta_hi);
    EXPECT_EQ(c.kernel.sample(theta, a), c.kernel.sample(theta, b));
  }
}

TEST(KernelCdf, Examples) {
  EXPECT_DOUBLE_EQ(Kernel::gaussian_location(0.1).cdf(1.5, 1.5), 0.5);
  EXPECT_NEAR(Kernel::exponential().cdf(std::log(2.0), 1.0), 0.5, 1e-15);
  for (const auto& c : families()) {
    const double theta = c.kernel.family() == Family::Exponential ? 1.0 : 0.0;
    EXPECT_NEAR(c.kernel.cdf(-1e9, theta), 0.0, 1e-12);
    EXPECT_NEAR(c.kernel.cdf(1e9, theta), 1.0, 1e-12);
  }
}

// Invariants over random parameters --------------------------------------

TEST(KernelInvariants, NormalizesToOne) {
  std::mt19937_64 rng(5);
  for (const auto& c : families()) {
    std::uniform_real_distribution<double> th(c.theta_lo, c.theta_hi);
    for (int i = 0; i < 20; ++i) {
      const double theta = th(rng);
      auto [a, b] = support(c.kernel, theta);
      const double mass = simpson([&](double y) { return c.kernel.density(y, theta); }, a, b);
      EXPECT_NEAR(mass, 1.0, 1e-6) << c.kernel.name() << " theta=" << theta;
    }
  }
}

TEST(KernelInvariants, ScoreHasZeroMean) {
  std::mt19937_64 rng(6);
  for (const auto& c : families()) {
    std::uniform_real_distribution<double> th(c.theta_lo, c.theta_hi);
    for (int i = 0; i < 20; ++i) {
      const double theta = th(rng);
      auto [a, b] = support(c.kernel, theta);
      const double g = simpson([&](double y) { return c.kernel.grad_theta(y, theta); }, a, b);
      EXPECT_NEAR(g, 0.0, 1e-6) << c.kernel.name() << " theta=" << theta;
    }
  }
}

TEST(KernelInvariants, CdfDerivativeIsDensity) {
  std::mt19937_64 rng(8);
  for (const auto& c : families()) {
    std::uniform_real_distribution<double> th(c.theta_lo, c.theta_hi);
    const double theta = th(rng);
    auto [a, b] = support(c.kernel, theta);
    double prev = -1.0;
    for (double y = a + (b - a) * 0.01; y < b; y += (b - a) / 97.0) {
      const double h = 1e-5 * (b - a);
      const double d = (c.kernel.cdf(y + h, theta) - c.kernel.cdf(y - h, theta)) / (2.0 * h);
      EXPECT_NEAR(d, c.kernel.density(y, theta), 1e-4) << c.kernel.name() << " y=" << y;
      const double F = c.kernel.cdf(y, theta);
      EXPECT_GE(F, prev);
      prev = F;
    }
  }
}

TEST(KernelPointMass, IndicatorSemantics) {
  const auto k = Kernel::point_mass();
  EXPECT_EQ(k.density(2.0, 2.0), 1.0);
  EXPECT_EQ(k.density(2.0, 2.5), 0.0);
  EXPECT_EQ(k.score(2.0, 2.0), 0.0);
  EXPECT_EQ(k.cdf(1.9, 2.0), 0.0);
  EXPECT_EQ(k.cdf(2.0, 2.0), 1.0);
  Rng rng(1);
  EXPECT_EQ(k.sample(2.0, rng), 2.0);
  EXPECT_TRUE(k.is_bounded());
}

TEST(KernelVectorApi, MatchesScalarApi) {
  const auto k = Kernel::exponential();
  const std::vector<double> theta{1.5};
  std::vector<double> g(1);
  k.grad_theta(2.0, theta, g);
  EXPECT_EQ(g[0], k.grad_theta(2.0, 1.5));
  EXPECT_EQ(k.fisher_information(theta), std::vector<double>{k.fisher_info(1.5)});
  EXPECT_THROW(k.density(1.0, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}
