#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "snse/ou.hpp"

using namespace snse;

namespace {

NoiseSpec noise(double beta, SigmaRule sigma, std::uint64_t seed = 1, int n_substeps = 1, double noise_dt = 0.0) {
  NoiseSpec s;
  s.beta = beta;
  s.sigma = sigma;
  s.seed = seed;
  s.n_substeps = n_substeps;
  s.noise_dt = noise_dt;
  return s;
}

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

}  // namespace

TEST(OU, PureDecayWithoutNoise) {
  const auto spec = noise(1.5, SigmaRule::constant(0.0));
  OUState s = make_ou_state(3, {}, spec);
  s.z = unit_mode(3, 1, 0);
  for (int k = 0; k < 10; ++k) ou_advance(s, 0.1, spec);
  const auto expected = std::exp(-2.0) * unit_mode(3, 1, 0);
  EXPECT_NEAR(s.t, 1.0, 1e-15);
  EXPECT_NEAR(std::abs(s.z(1, 0) - expected(1, 0)), 0.0, 1e-16);
  EXPECT_GT(s.clock, 0.0);  // the clock still runs
}

TEST(OU, DecayRatesAndDomainErrors) {
  const auto k = ou_decay_rates(2, {.nu = 0.5, .omega = 3.0, .alpha = 1.0});
  EXPECT_NEAR(std::abs(k[triangular_index(2, 1)] - Complex(0.5 * 6.0 + 1.0, -2.0 * 3.0 / 6.0)), 0.0, 1e-15);
  EXPECT_THROW(ou_decay_rates(2, {.spectrum = Spectrum::ricci_shifted}), DomainError);
  EXPECT_NO_THROW(ou_decay_rates(2, {.alpha = 0.1, .spectrum = Spectrum::ricci_shifted}));
  auto s = make_ou_state(2, {}, noise(2.0, SigmaRule::constant(1.0), 1, 3, 0.01));
  EXPECT_THROW(ou_advance(s, 0.05, noise(2.0, SigmaRule::constant(1.0), 1, 3, 0.01)), DomainError);
  EXPECT_THROW(ou_advance(s, 0.0, noise(2.0, SigmaRule::constant(1.0))), DomainError);
}

TEST(OU, GaussianStationaryVariance) {
  // Ito isometry: Var of a real coordinate -> sigma^2 (1 - e^{-2 r t}) / (2 r), r = nu lambda + alpha.
  const double sigma = 0.7, alpha = 0.5, t = 4.0, dt = 0.002;
  const auto spec = noise(2.0, SigmaRule::band(1, sigma), 77);
  const OUParams params{.alpha = alpha};
  const int n = 10000;
  std::vector<double> a(n);
  for (int path = 0; path < n; ++path) {
    OUState s = make_ou_state(1, params, spec, static_cast<std::uint64_t>(path));
    for (int k = 0; k < static_cast<int>(std::lround(t / dt)); ++k) ou_advance(s, dt, spec);
    a[static_cast<std::size_t>(path)] = real_coordinates(s.z, 1, 0).real();
  }
  double var = 0.0;
  for (double x : a) var += x * x;
  var /= n;
  const double r = 2.0 + alpha;
  EXPECT_NEAR(var / (sigma * sigma * (1.0 - std::exp(-2.0 * r * t)) / (2.0 * r)), 1.0, 0.03);
}

TEST(OU, CoupledRefinementIsFirstOrder) {
  const double dt = 0.1, T = 1.0;
  const int paths = 200;
  const int ref_sub = 128;
  auto endpoint = [&](int n_sub, std::uint64_t path) {
    const auto spec = noise(2.0, SigmaRule::power(1.0), 5, n_sub, dt / ref_sub);
    OUState s = make_ou_state(4, {.omega = 1.0}, spec, path);
    for (int k = 0; k < 10; ++k) ou_advance(s, dt, spec);
    EXPECT_NEAR(s.t, T, 1e-12);
    return s.z;
  };
  std::vector<double> err;
  // n_sub = 1 has kappa h ~ 2 on the top degree, outside the asymptotic range.
  for (int n_sub : {2, 4, 8, 16}) {
    double e2 = 0.0;
    for (int p = 0; p < paths; ++p) {
      const auto d = endpoint(n_sub, static_cast<std::uint64_t>(p)) - endpoint(ref_sub, static_cast<std::uint64_t>(p));
      e2 += h_inner(d, d);
    }
    err.push_back(std::sqrt(e2 / paths));
  }
  for (std::size_t k = 1; k < err.size(); ++k) EXPECT_GT(std::log2(err[k - 1] / err[k]), 0.9) << k;
}

TEST(OU, CoarseAndFineStepsShareTheNoisePath) {
  // Same sub-step length, different dt: identical z at common times.
  const auto fine = noise(1.4, SigmaRule::power(1.5), 9, 1, 0.01);
  const auto coarse = noise(1.4, SigmaRule::power(1.5), 9, 2, 0.01);
  OUState a = make_ou_state(5, {.omega = 2.0}, fine, 3);
  OUState b = make_ou_state(5, {.omega = 2.0}, coarse, 3);
  for (int k = 0; k < 4; ++k) ou_advance(a, 0.01, fine);
  for (int k = 0; k < 2; ++k) ou_advance(b, 0.02, coarse);
  EXPECT_EQ(a.noise_index, b.noise_index);
  EXPECT_DOUBLE_EQ(a.clock, b.clock);
  const auto d = a.z - b.z;
  EXPECT_LT(std::sqrt(h_inner(d, d)), 1e-13);
}

TEST(OU, LinearInSigma) {
  const auto one = noise(1.6, SigmaRule::power(1.0, 1.0), 13);
  const auto two = noise(1.6, SigmaRule::power(1.0, 2.0), 13);
  OUState a = make_ou_state(6, {.omega = 1.0}, one);
  OUState b = make_ou_state(6, {.omega = 1.0}, two);
  for (int k = 0; k < 20; ++k) {
    ou_advance(a, 0.05, one);
    ou_advance(b, 0.05, two);
  }
  for (std::size_t i = 0; i < a.z.coeffs().size(); ++i) {
    EXPECT_DOUBLE_EQ(b.z.coeffs()[i].real(), 2.0 * a.z.coeffs()[i].real());
    EXPECT_DOUBLE_EQ(b.z.coeffs()[i].imag(), 2.0 * a.z.coeffs()[i].imag());
  }
}

TEST(OU, TwoStepsMatchOneDoubleStepInDistribution) {
  const auto single = noise(1.5, SigmaRule::band(1, 1.0), 21, 1);
  const auto doubled = noise(1.5, SigmaRule::band(1, 1.0), 22, 2);
  const int n = 10000;
  std::vector<double> a(n), b(n);
  for (int p = 0; p < n; ++p) {
    const auto path = static_cast<std::uint64_t>(p);
    OUState s1 = make_ou_state(1, {}, single, path);
    ou_advance(s1, 0.1, single);
    ou_advance(s1, 0.1, single);
    OUState s2 = make_ou_state(1, {}, doubled, path);
    ou_advance(s2, 0.2, doubled);
    a[path] = real_coordinates(s1.z, 1, 1).real();
    b[path] = real_coordinates(s2.z, 1, 1).real();
  }
  EXPECT_LT(ks_statistic(a, b), 1.628 * std::sqrt(2.0 / n));
}

TEST(OU, RotationDoesNotChangeDecay) {
  const auto spec = noise(2.0, SigmaRule::constant(0.0));
  const auto z0 = random_stream_field(8, 4);
  OUState slow = make_ou_state(8, {.omega = 0.0, .alpha = 0.3}, spec);
  OUState fast = make_ou_state(8, {.omega = 50.0, .alpha = 0.3}, spec);
  slow.z = fast.z = z0;
  for (int k = 0; k < 50; ++k) {
    ou_advance(slow, 0.02, spec);
    ou_advance(fast, 0.02, spec);
    EXPECT_NEAR(h_inner(slow.z, slow.z), h_inner(fast.z, fast.z), 1e-12);
  }
}

TEST(ZlpBound, LimitsAndMonotonicity) {
  const auto spec = noise(1.5, SigmaRule::power(1.0));
  EXPECT_EQ(zlp_bound(0.0, 1.0, spec, 0.0, 10).expression, 0.0);
  double limit = 0.0;
  for (int l = 1; l <= 10; ++l) limit += (2 * l + 1) * std::pow(1.0 / l, 1.5) / (1.5 * (l * (l + 1.0) + 0.2));
  EXPECT_NEAR(zlp_bound(200.0, 1.0, spec, 0.2, 10).expression, std::pow(limit, 1.0 / 1.5), 1e-12);
  double previous = std::numeric_limits<double>::infinity();
  for (double alpha : {0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 1e3}) {
    const double v = zlp_bound(1.0, 1.0, spec, alpha, 10).expression;
    EXPECT_LT(v, previous);
    previous = v;
  }
  EXPECT_THROW(zlp_bound(1.0, 1.5, spec, 0.0, 10), DomainError);
  EXPECT_EQ(zlp_bound(1.0, 1.0, noise(1.5, SigmaRule::band(4, 1.0)), 0.0, 4).tail_sum, 0.0);
  EXPECT_GT(zlp_bound(1.0, 1.0, spec, 0.0, 10).tail_sum, 0.0);
}

TEST(OUMoments, ZeroNoiseGivesZero) {
  const auto r = ou_moment_check(noise(1.5, SigmaRule::constant(0.0)), {}, 3, 1.0, {0.5}, 20, 0.05);
  EXPECT_EQ(r[0].empirical, 0.0);
  EXPECT_EQ(r[0].bound, 0.0);
}

TEST(OUMoments, GaussianSecondMomentMatchesClosedForm) {
  const auto spec = noise(2.0, SigmaRule::band(1, 1.0), 3);
  const auto r = ou_moment_check(spec, {}, 1, 2.0, {1.0}, 10000, 0.002);
  EXPECT_NEAR(r[0].ratio, 1.0, 0.03);
}

TEST(OUMoments, SingleRealModeCalibration) {
  // One real coordinate of z is symmetric stable with scale expression tau,
  // so E|a|^p = c_p tau^{p/beta} holds with equality.
  const double beta = 1.5, p = 0.5, t = 1.0, dt = 0.005;
  const auto spec = noise(beta, SigmaRule::band(1, 1.0), 8);
  const int n = 10000;
  double mean = 0.0;
  for (int path = 0; path < n; ++path) {
    OUState s = make_ou_state(1, {}, spec, static_cast<std::uint64_t>(path));
    for (int k = 0; k < 200; ++k) ou_advance(s, dt, spec);
    mean += std::pow(std::abs(real_coordinates(s.z, 1, 0).real()), p);
  }
  mean /= n;
  const double tau = -std::expm1(-beta * 2.0 * t) / (beta * 2.0);
  EXPECT_NEAR(mean / (stable_moment_constant(beta, p) * std::pow(tau, p / beta)), 1.0, 0.03);
}

TEST(OUMoments, RatioStableOverOneDecade) {
  const auto spec = noise(1.5, SigmaRule::power(0.5), 19);
  const auto r = ou_moment_check(spec, {}, 4, 1.0, {0.1, 1.0}, 4000, 0.01);
  EXPECT_NEAR(r[1].ratio / r[0].ratio, 1.0, 0.2);
  for (const auto& c : r) EXPECT_LE(c.ratio, 1.0);
}

TEST(SupNormGrowth, ZeroNoiseAndSlope) {
  const auto zero = sup_norm_growth(noise(1.5, SigmaRule::constant(0.0)), {}, 2, 0.0, 1.0, {0.5, 1.0}, 10, 0.05);
  for (double e : zero.estimate) EXPECT_EQ(e, 0.0);
  const auto spec = noise(1.5, SigmaRule::band(1, 1.0), 31);
  const auto g = sup_norm_growth(spec, {}, 1, 0.0, 1.0, {0.1, 0.3, 1.0, 3.0}, 4000, 0.01);
  EXPECT_LE(g.slope, 1.0 / 1.5 + 0.1);
  EXPECT_GT(g.slope, 0.0);
}

TEST(SupNormGrowth, IncreasesWithDelta) {
  const auto spec = noise(1.5, SigmaRule::power(1.0), 37);
  const auto lo = sup_norm_growth(spec, {}, 4, 0.0, 1.0, {1.0}, 500, 0.02);
  const auto hi = sup_norm_growth(spec, {}, 4, 0.25, 1.0, {1.0}, 500, 0.02);
  EXPECT_GT(hi.estimate[0], lo.estimate[0]);
}

TEST(OUPaths, IndependentOfWorkerCount) {
  const auto spec = noise(1.3, SigmaRule::power(1.0), 41);
  const auto a = ou_sample_paths(spec, {.omega = 1.0}, 6, 0.05, {0.5, 1.0}, 16, 0.5, 1);
  const auto b = ou_sample_paths(spec, {.omega = 1.0}, 6, 0.05, {0.5, 1.0}, 16, 0.5, 4);
  for (std::size_t p = 0; p < a.size(); ++p) {
    EXPECT_EQ(a[p].norm, b[p].norm);
    EXPECT_EQ(a[p].sup_norm, b[p].sup_norm);
  }
}
