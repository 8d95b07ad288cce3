#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "snse/noise.hpp"

using namespace snse;

namespace {

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

double ks_critical_1pct(std::size_t n, std::size_t m) {
  return 1.628 * std::sqrt(static_cast<double>(n + m) / static_cast<double>(n * m));
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<double>(i);
  return r;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

NoiseSpec make_spec(double beta, SigmaRule sigma = SigmaRule::constant(1.0), std::uint64_t seed = 1) {
  NoiseSpec s;
  s.beta = beta;
  s.sigma = sigma;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(SigmaRule, ParsesPresets) {
  const auto p = SigmaRule::parse("power:gamma=2.0");
  EXPECT_EQ(p.kind(), SigmaRule::Kind::power);
  EXPECT_DOUBLE_EQ(p(3), 1.0 / 9.0);
  const auto b = SigmaRule::parse(" band:l<=8, value=0.1 ");
  EXPECT_DOUBLE_EQ(b(8), 0.1);
  EXPECT_DOUBLE_EQ(b(9), 0.0);
  EXPECT_EQ(b.support_end(), 8);
  const auto c = SigmaRule::parse("const:0.05");
  EXPECT_DOUBLE_EQ(c(1000), 0.05);
  EXPECT_EQ(SigmaRule::parse("power:gamma=1.5,scale=0.25")(4), 0.25 * std::pow(4.0, -1.5));
  for (const auto& r : {p, b, c, SigmaRule::power(1.25, 0.5)}) EXPECT_EQ(SigmaRule::parse(r.to_string()), r);
}

TEST(SigmaRule, RejectsMalformedText) {
  for (const char* bad : {"power", "power:", "power:gamma=x", "band:value=0.1", "band:l<=3", "const:", "const:1,2",
                          "gauss:1", "power:gamma=1,beta=2"})
    EXPECT_THROW(SigmaRule::parse(bad), DomainError) << bad;
}

TEST(PositiveStable, GaussianLimitIsDeterministic) {
  const CounterRng rng(3);
  for (std::uint64_t i = 0; i < 100; ++i) EXPECT_EQ(sample_positive_stable(1.0, 0.5, rng, i), 0.5);
}

TEST(PositiveStable, DomainErrors) {
  EXPECT_THROW(sample_positive_stable(0.0, 1.0, 0.5, 1.0), DomainError);
  EXPECT_THROW(sample_positive_stable(1.2, 1.0, 0.5, 1.0), DomainError);
  EXPECT_THROW(sample_positive_stable(0.5, -1.0, 0.5, 1.0), DomainError);
}

TEST(PositiveStable, LaplaceTransformMatches) {
  const int n = 100000;
  const double t = 0.5;
  for (double beta : {0.6, 1.2, 1.5, 1.8}) {
    const CounterRng rng(42, static_cast<std::uint64_t>(beta * 10));
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = sample_positive_stable(beta / 2.0, t, rng, static_cast<std::uint64_t>(i));
      ASSERT_GT(x[static_cast<std::size_t>(i)], 0.0);
    }
    for (double r : {0.5, 1.0, 2.0}) {
      double mean = 0.0;
      for (double v : x) mean += std::exp(-r * v);
      mean /= n;
      const double exact = std::exp(-t * std::pow(r, beta / 2.0));
      EXPECT_LT(std::abs(mean / exact - 1.0), 0.01) << "beta=" << beta << " r=" << r;
    }
  }
}

TEST(PositiveStable, FractionalMomentMatchesClosedForm) {
  // E X^q = t^{q/a} Gamma(1 - q/a) / Gamma(1 - q); q < a/2 keeps the variance finite.
  const double a = 0.75, q = 0.3, t = 2.0;
  const CounterRng rng(9);
  double mean = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) mean += std::pow(sample_positive_stable(a, t, rng, static_cast<std::uint64_t>(i)), q);
  mean /= n;
  EXPECT_NEAR(mean / positive_stable_moment(a, q, t), 1.0, 0.01);
}

TEST(PositiveStable, HalfStepsSumToFullStepInDistribution) {
  const int n = 10000;
  const double a = 0.7, h = 0.3;
  const CounterRng one(5, 1), two(5, 2);
  std::vector<double> full(n), halves(n);
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::uint64_t>(i);
    full[k] = sample_positive_stable(a, h, one, k);
    halves[k] = sample_positive_stable(a, h / 2, two, 2 * k) + sample_positive_stable(a, h / 2, two, 2 * k + 1);
  }
  EXPECT_LT(ks_statistic(full, halves), ks_critical_1pct(n, n));
}

TEST(LevyIncrements, GaussianCaseIsBrownian) {
  const auto spec = make_spec(2.0);
  const CounterRng rng(11);
  const double dt = 0.01;
  double sum2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto block = levy_increment_block(spec, 1, dt, rng, static_cast<std::uint64_t>(i));
    EXPECT_EQ(block.dX, dt);
    sum2 += std::norm(block(1, 0));
  }
  EXPECT_NEAR(sum2 / n / dt, 1.0, 0.02);
}

TEST(LevyIncrements, CharacteristicFunction) {
  const double dt = 0.5;
  for (double beta : {1.2, 1.5, 1.8, 2.0}) {
    const auto spec = make_spec(beta, SigmaRule::constant(1.0), 17);
    const CounterRng rng(spec.seed);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += std::cos(levy_increment_block(spec, 1, dt, rng, static_cast<std::uint64_t>(i))(1, 1).real());
    const double exact = std::exp(-dt * std::pow(0.5, beta / 2.0));
    EXPECT_LT(std::abs(acc / n / exact - 1.0), 0.01) << beta;
  }
}

TEST(LevyIncrements, SharedSubordinatorCouplesModes) {
  const auto spec = make_spec(1.5);
  const CounterRng rng(23);
  const int n = 100000;
  std::vector<double> a(n), b(n), a2(n), b2(n);
  for (int i = 0; i < n; ++i) {
    const auto block = levy_increment_block(spec, 2, 0.1, rng, static_cast<std::uint64_t>(i));
    const auto k = static_cast<std::size_t>(i);
    a[k] = block(1, 0).real();
    b[k] = block(2, 1).imag();
    a2[k] = a[k] * a[k];
    b2[k] = b[k] * b[k];
  }
  // Rank correlations: second moments are infinite for beta < 2.
  EXPECT_GT(correlation(ranks(a2), ranks(b2)), 0.05);
  EXPECT_LT(std::abs(correlation(ranks(a), ranks(b))), 0.02);
}

TEST(LevyIncrements, CoarseBlocksAreSumsOfFineBlocks) {
  const auto spec = make_spec(1.3);
  const CounterRng rng(29, 4);
  const auto coarse = levy_increment_block(spec, 5, 0.01, rng, 40, 4);
  double dx = 0.0;
  std::vector<Complex> sum(coarse.dL.size());
  for (std::uint64_t j = 40; j < 44; ++j) {
    const auto fine = levy_increment_block(spec, 5, 0.01, rng, j);
    dx += fine.dX;
    for (std::size_t s = 0; s < sum.size(); ++s) sum[s] += fine.dL[s];
  }
  EXPECT_DOUBLE_EQ(coarse.dX, dx);
  EXPECT_DOUBLE_EQ(coarse.dt, 0.04);
  for (std::size_t s = 0; s < sum.size(); ++s) EXPECT_NEAR(std::abs(coarse.dL[s] - sum[s]), 0.0, 1e-15);
}

TEST(LevyIncrements, IndependentOfWorkerCount) {
  const auto spec = make_spec(1.7);
  const CounterRng rng(31);
  const auto a = levy_increment_block(spec, 20, 0.01, rng, 7, 3, 1);
  const auto b = levy_increment_block(spec, 20, 0.01, rng, 7, 3, 4);
  EXPECT_EQ(a.dX, b.dX);
  EXPECT_EQ(a.dL, b.dL);
}

TEST(Summability, ZeroAndFiniteBand) {
  const auto zero = check_summability(SigmaRule::constant(0.0), 1.5, 0.5);
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_TRUE(zero.converged);
  const auto band = check_summability(SigmaRule::band(8, 0.1), 1.5, 0.5);
  double expected = 0.0;
  for (int l = 1; l <= 8; ++l) expected += std::pow(0.1, 1.5) * std::pow(l * (l + 1.0), 0.75);
  EXPECT_NEAR(band.value, expected, 1e-14);
  EXPECT_TRUE(band.converged);
  EXPECT_EQ(band.tail_bound, 0.0);
}

TEST(Summability, PowerLawMatchesDirectSummation) {
  const auto r = check_summability(SigmaRule::power(2.0), 1.5, 0.5);
  EXPECT_TRUE(r.converged);
  long double direct = 0.0L;
  for (long l = 1; l <= 1000000; ++l) {
    const long double ll = static_cast<long double>(l);
    direct += std::pow(ll, -3.0L) * std::pow(ll * (ll + 1.0L), 0.75L);
  }
  EXPECT_NEAR(r.value / static_cast<double>(direct), 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(r.growth_exponent, -1.5);
  EXPECT_LE(r.tail_bound, 1e-2 * r.value);
  // Counting all 2l+1 orders per degree the same rule is not summable.
  EXPECT_FALSE(r.converged_with_multiplicity);
}

TEST(Summability, DivergentRulesReportGrowth) {
  const auto c = check_summability(SigmaRule::constant(0.05), 2.0, 0.0);
  EXPECT_FALSE(c.converged);
  EXPECT_DOUBLE_EQ(c.growth_exponent, 0.0);
  const auto p = check_summability(SigmaRule::power(1.0), 1.5, 0.5);
  EXPECT_FALSE(p.converged);
  EXPECT_DOUBLE_EQ(p.growth_exponent, 0.0);
  const auto q = check_summability(SigmaRule::power(3.0), 2.0, 1.0);
  EXPECT_TRUE(q.converged);
  EXPECT_FALSE(q.converged_with_multiplicity);
  EXPECT_TRUE(check_summability(SigmaRule::power(4.0), 2.0, 1.0).converged_with_multiplicity);
}

TEST(MomentScaling, RejectsInfiniteMoments) {
  auto spec = make_spec(1.5);
  EXPECT_THROW(moment_scaling_estimate(spec, 0.0, 1.5, {1.0}, 10, 1), DomainError);
  EXPECT_THROW(moment_scaling_estimate(spec, 0.0, 1.8, {1.0}, 10, 1), DomainError);
}

TEST(MomentScaling, SelfSimilarSlope) {
  auto spec = make_spec(1.5, SigmaRule::band(1, 1.0), 101);
  const std::vector<double> t{0.01, 0.1, 1.0, 10.0, 100.0};
  const auto est = moment_scaling_estimate(spec, 0.0, 1.0, t, 10000, 1);
  std::vector<double> means;
  for (std::size_t k = 0; k < est.size(); ++k) {
    means.push_back(est[k].mean);
    if (k > 0) {
      EXPECT_GT(est[k].mean, est[k - 1].mean);
    }
  }
  EXPECT_NEAR(log_log_slope(t, means), 1.0 / 1.5, 0.05);
}

TEST(MomentScaling, MedianScalesWhenMeansAreHeavyTailed) {
  auto spec = make_spec(0.8, SigmaRule::band(1, 1.0), 7);
  const std::vector<double> t{0.01, 1.0, 100.0};
  const auto est = moment_scaling_estimate(spec, 0.0, 0.4, t, 20000, 1);
  std::vector<double> medians;
  for (const auto& e : est) medians.push_back(e.median);
  EXPECT_NEAR(log_log_slope(t, medians), 0.4 / 0.8, 0.05);
}

TEST(MomentScaling, TwoDegreeTruncationAgainstBruteForce) {
  // Brute force: L(t) = sqrt(X_t) xi with X_t drawn directly, 10^6 samples.
  const double beta = 1.5, p = 0.5, delta = 0.5, t = 0.7;
  auto spec = make_spec(beta, SigmaRule::power(1.0), 303);
  const auto est = moment_scaling_estimate(spec, delta, p, {0.2, t}, 100000, 2);

  const CounterRng rng(999);
  const int n = 1000000;
  double brute = 0.0;
  double gaussian_part = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::uint64_t>(i);
    const double x = sample_positive_stable(beta / 2.0, t, rng, k);
    // three real modes at l = 1, five at l = 2
    double q = 0.0;
    for (std::uint32_t mode = 0; mode < 8; ++mode) {
      const int l = mode < 3 ? 1 : 2;
      const double w = std::pow(l, -2.0) * std::pow(l * (l + 1.0), 2.0 * delta);
      const double g = rng.normals(Purpose::test, k, mode)[0];
      q += w * g * g;
    }
    brute += std::pow(x * q, p / 2.0);
    gaussian_part += std::pow(q, p / 2.0);
  }
  brute /= n;
  // Independent route: E X^{p/2} in closed form times the Gaussian factor.
  const double factored = positive_stable_moment(beta / 2.0, p / 2.0, t) * gaussian_part / n;
  EXPECT_NEAR(brute / factored, 1.0, 0.01);
  EXPECT_NEAR(est[1].mean / brute, 1.0, 0.02);
}

TEST(StableMoments, SingleModeConstant) {
  EXPECT_NEAR(normal_abs_moment(2.0), 1.0, 1e-14);
  EXPECT_NEAR(normal_abs_moment(1.0), std::sqrt(2.0 / std::numbers::pi), 1e-14);
  EXPECT_NEAR(stable_moment_constant(2.0, 2.0), 1.0, 1e-14);
  EXPECT_THROW(stable_moment_constant(1.5, 1.5), DomainError);
}
