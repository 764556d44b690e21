#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "mixboot/mixing.hpp"
#include "test_support.hpp"

using namespace mixboot;
using mixboot::test::ks_critical_1pct;
using mixboot::test::ks_statistic;
using mixboot::test::simpson;

namespace {

DiscreteMixing three_atoms() { return DiscreteMixing({1.0, 3.0, 5.0}, {0.2, 0.5, 0.3}); }

double normal_pdf(double y, double mu, double s) {
  const double z = (y - mu) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
}

}  // namespace

TEST(MixingConstruct, RejectsBadWeights) {
  EXPECT_THROW(DiscreteMixing({1.0, 2.0}, {0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(DiscreteMixing({1.0, 2.0}, {1.1, -0.1}), std::invalid_argument);
  EXPECT_THROW(DiscreteMixing({}, {}), std::invalid_argument);
  EXPECT_THROW(DiscreteMixing({1.0}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(GridMixing({1.0, 1.0}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(GridMixing({2.0, 1.0}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_NO_THROW(DiscreteMixing({1.0, 1.0}, {0.5, 0.5}));
}

TEST(MixingConstruct, NormalizedRescales) {
  const auto g = DiscreteMixing::normalized({0.0, 1.0}, {2.0, 6.0});
  EXPECT_DOUBLE_EQ(g.weight(0), 0.25);
  EXPECT_DOUBLE_EQ(g.weight(1), 0.75);
}

TEST(MixtureDensity, SingleAtomIsKernel) {
  const auto k = Kernel::gaussian_location(0.1);
  const DiscreteMixing g({2.0}, {1.0});
  for (double y : {1.7, 2.0, 2.4}) EXPECT_EQ(mixture_density(g, k, y), k.density(y, 2.0));
}

TEST(MixtureDensity, ThreeAtomExample) {
  const auto k = Kernel::gaussian_location(0.1);
  const double direct = 0.2 * normal_pdf(3.0, 1.0, 0.1) + 0.5 * normal_pdf(3.0, 3.0, 0.1) +
                        0.3 * normal_pdf(3.0, 5.0, 0.1);
  EXPECT_NEAR(mixture_density(three_atoms(), k, 3.0), direct, 1e-12);
  EXPECT_NEAR(mixture_density(three_atoms(), k, 3.0), 0.5 * 3.9894228, 1e-7);
}

TEST(MixtureDensity, DuplicateAtoms) {
  const auto k = Kernel::gaussian_location(0.1);
  const DiscreteMixing g({1.0, 1.0}, {0.5, 0.5});
  EXPECT_NEAR(mixture_density(g, k, 1.05), k.density(1.05, 1.0), 1e-15);
}

TEST(MixtureDensity, FarTailUsesLogSpace) {
  const auto k = Kernel::gaussian_location(0.1);
  const double y = 50.0;
  const double d = mixture_density(three_atoms(), k, y);
  EXPECT_GE(d, 0.0);
  EXPECT_FALSE(std::isnan(d));
  const double ld = log_mixture_density(three_atoms(), k, y);
  // dominated by the atom at 5
  EXPECT_NEAR(ld, std::log(0.3) + k.log_density(y, 5.0), 1e-9);
}

TEST(MixtureDensity, IntegratesToOne) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> loc(-3.0, 3.0), wt(0.01, 1.0);
  std::uniform_int_distribution<int> rr(1, 6);
  for (int rep = 0; rep < 10; ++rep) {
    const int r = rr(rng);
    std::vector<double> a(r), w(r);
    for (int j = 0; j < r; ++j) a[j] = loc(rng), w[j] = wt(rng);
    const auto g = DiscreteMixing::normalized(a, w);
    const auto kg = Kernel::gaussian_location(0.3);
    EXPECT_NEAR(simpson([&](double y) { return mixture_density(g, kg, y); }, -8.0, 8.0, 40000), 1.0,
                1e-6);
    std::vector<double> sc(r);
    for (int j = 0; j < r; ++j) sc[j] = 0.5 + std::abs(a[j]);
    const auto ge = DiscreteMixing::normalized(sc, w);
    const auto ke = Kernel::exponential();
    EXPECT_NEAR(simpson([&](double y) { return mixture_density(ge, ke, y); }, 0.0, 250.0, 200000),
                1.0, 1e-6);
  }
}

TEST(MixingCdf, Examples) {
  const auto g = three_atoms();
  EXPECT_EQ(mixing_cdf(g, 0.5), 0.0);
  EXPECT_EQ(mixing_cdf(g, std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_NEAR(mixing_cdf(g, 3.0), 0.7, 1e-15);
  EXPECT_NEAR(mixing_cdf(g, 2.999), 0.2, 1e-15);
  const DiscreteMixing g2({1.0, 2.0, 3.0, 4.0}, {0.5, 0.5}, 2);
  EXPECT_THROW(mixing_cdf(g2, 0.0), std::invalid_argument);
}

TEST(PredictiveCdf, Examples) {
  const auto k = Kernel::gaussian_location(0.1);
  const DiscreteMixing one({2.0}, {1.0});
  EXPECT_EQ(predictive_cdf(one, k, 2.1), k.cdf(2.1, 2.0));
  EXPECT_NEAR(predictive_cdf(three_atoms(), k, 1e6), 1.0, 1e-15);
  EXPECT_NEAR(predictive_cdf(three_atoms(), k, 2.0), 0.2, 1e-10);
}

TEST(MixingCdfs, MonotoneOnGrid) {
  const auto k = Kernel::gaussian_location(0.4);
  const auto g = three_atoms();
  double pg = -1.0, pp = -1.0;
  for (double t = -2.0; t <= 8.0; t += 0.01) {
    const double a = mixing_cdf(g, t), b = predictive_cdf(g, k, t);
    EXPECT_GE(a, pg);
    EXPECT_GE(b, pp);
    pg = a, pp = b;
  }
}

TEST(SampleY, SingleAtomPassesKs) {
  const auto k = Kernel::gaussian_location(0.1);
  const DiscreteMixing g({3.0}, {1.0});
  Rng rng(31);
  std::vector<double> ys(10000);
  for (double& y : ys) y = sample_y(g, k, rng);
  EXPECT_LT(ks_statistic(ys, [&](double y) { return k.cdf(y, 3.0); }), ks_critical_1pct(ys.size()));
}

TEST(SampleY, MixturePassesKs) {
  const auto k = Kernel::exponential();
  const DiscreteMixing g({0.5, 4.0}, {0.3, 0.7});
  Rng rng(32);
  std::vector<double> ys(10000);
  for (double& y : ys) y = sample_y(g, k, rng);
  auto cdf = [](double y) { return 0.3 * (1 - std::exp(-y / 0.5)) + 0.7 * (1 - std::exp(-y / 4.0)); };
  EXPECT_LT(ks_statistic(ys, cdf), ks_critical_1pct(ys.size()));
}

TEST(SampleY, ComponentFrequenciesWithinThreeSe) {
  // Atoms 20 sigma apart, so the component of each draw is its nearest atom.
  const auto k = Kernel::gaussian_location(0.1);
  const auto g = three_atoms();
  Rng rng(33);
  const int n = 100000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) {
    const double y = sample_y(g, k, rng);
    ++counts[y < 2.0 ? 0 : y < 4.0 ? 1 : 2];
  }
  for (int j = 0; j < 3; ++j) {
    const double p = g.weight(j);
    EXPECT_NEAR(counts[j] / double(n), p, 3.0 * std::sqrt(p * (1 - p) / n)) << j;
  }
}

TEST(SampleY, Reproducible) {
  const auto k = Kernel::gaussian_location(0.1);
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_y(three_atoms(), k, a), sample_y(three_atoms(), k, b));
}

TEST(PosteriorWeights, SumToOneAndMatchDirect) {
  const auto k = Kernel::gaussian_location(1.0);
  const auto g = three_atoms();
  std::vector<double> post(3);
  const double lp = posterior_weights(g, k, 2.5, post);
  const double p = mixture_density(g, k, 2.5);
  EXPECT_NEAR(lp, std::log(p), 1e-12);
  double s = 0.0;
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(post[j], g.weight(j) * k.density(2.5, g.location(j)) / p, 1e-14);
    s += post[j];
  }
  EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(DefaultGrid, CoversDataWithHeadroom) {
  const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
  const double s = std::sqrt(5.0 / 3.0);
  const auto grid = default_grid(y, Kernel::gaussian_location(0.1));
  ASSERT_EQ(grid.size(), 300u);
  EXPECT_NEAR(grid.front(), 1.0 - 3 * s, 1e-12);
  EXPECT_NEAR(grid.back(), 4.0 + 3 * s, 1e-12);
  const auto ge = default_grid(y, Kernel::exponential());
  EXPECT_GT(ge.front(), 0.0);
}

TEST(MixingCsv, RoundTripsBitExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<double> a(7), w(7);
  for (int j = 0; j < 7; ++j) a[j] = u(rng), w[j] = std::abs(u(rng)) + 1e-3;
  const auto g = DiscreteMixing::normalized(a, w);
  std::stringstream ss;
  write_mixing_csv(ss, g);
  EXPECT_EQ(ss.str().substr(0, 12), "atom,weight\n");
  const auto back = read_discrete_mixing_csv(ss);
  EXPECT_TRUE(back == g);

  const auto grid = GridMixing::uniform({0.1, 0.2, 0.30000000000000004});
  std::stringstream sg;
  write_mixing_csv(sg, grid);
  EXPECT_TRUE(read_grid_mixing_csv(sg) == grid);
}

TEST(MixingCsv, MultiDimensionalHeader) {
  const DiscreteMixing g({1.0, 2.0, 3.0, 4.0}, {0.5, 0.5}, 2);
  std::stringstream ss;
  write_mixing_csv(ss, g);
  EXPECT_EQ(ss.str().substr(0, 21), "atom_1,atom_2,weight\n");
  EXPECT_TRUE(read_discrete_mixing_csv(ss) == g);
}
