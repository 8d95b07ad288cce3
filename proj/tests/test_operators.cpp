#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "snse/operators.hpp"

using namespace snse;

namespace {

double max_abs(const SpectralField& f) {
  double d = 0.0;
  for (const auto& c : f.coeffs()) d = std::max(d, std::abs(c));
  return d;
}

double norm_v2(const SpectralField& u) { return h_inner(stokes_apply(u, 1.0), u); }

// Five-point central difference.
template <class F>
double d5(F&& f, double x, double h) {
  return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h);
}

}  // namespace

TEST(Stokes, EigenvaluesOnUnitModes) {
  const auto z10 = unit_mode(4, 1, 0);
  const auto az = stokes_apply(z10, 1.0);
  EXPECT_NEAR(std::abs(az(1, 0) - 2.0 * z10(1, 0)), 0.0, 1e-15);
  for (int m = -2; m <= 2; ++m) {
    const auto z = unit_mode(4, 2, m);
    const auto half = stokes_apply(z, 0.5);
    EXPECT_LT(max_abs(half - std::sqrt(6.0) * z), 1e-14);
  }
  const auto u = random_stream_field(6, 3);
  EXPECT_EQ(stokes_apply(u, 0.0), u);
}

TEST(Stokes, RicciShiftedSpectrumHasZeroModeAtDegreeOne) {
  EXPECT_EQ(stokes_eigenvalue(1, Spectrum::ricci_shifted), 0.0);
  EXPECT_EQ(stokes_eigenvalue(3, Spectrum::ricci_shifted), 10.0);
  EXPECT_THROW(stokes_apply(unit_mode(3, 2, 0), -0.5, Spectrum::ricci_shifted), DomainError);
}

TEST(Stokes, PoincareLowerBound) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto u = random_stream_field(12, seed, 0, 0.5 * static_cast<double>(seed % 4));
    EXPECT_GE(norm_v2(u), 2.0 * h_inner(u, u) * (1.0 - 1e-14));
  }
}

TEST(CurlScalar, DegreeOneAndZero) {
  SpectralField psi = SpectralField::stream(3);
  psi(1, 0) = 1.0;
  const auto zeta = curl_scalar(psi);
  EXPECT_EQ(zeta.kind(), FieldKind::scalar);
  EXPECT_DOUBLE_EQ(zeta(1, 0).real(), 2.0);
  EXPECT_EQ(max_abs(curl_scalar(SpectralField::stream(3))), 0.0);
}

TEST(CurlScalar, FiniteDifferenceCurlOracle) {
  // psi = 2 Re(c Y_{3,1}); u from finite differences of psi, then
  // curl u = (1/sin)(d_theta(sin u_phi) - d_phi u_theta), also by finite differences.
  const int lmax = 4;
  const Complex c(0.6, 0.2);
  auto psi = [&](double th, double ph) { return 2.0 * (c * eval_ylm(3, 1, th, ph)).real(); };
  const double h = 1e-3;
  auto u_theta = [&](double th, double ph) {
    return d5([&](double x) { return psi(th, x); }, ph, h) / std::sin(th);
  };
  auto u_phi = [&](double th, double ph) { return -d5([&](double x) { return psi(x, ph); }, th, h); };

  SpectralField field = SpectralField::stream(lmax);
  field(3, 1) = c;
  OperatorContext ctx(lmax, 1.0, 0.0);
  const auto& tr = ctx.transform();
  const auto zeta = tr.scalar_synthesis(curl_scalar(field));
  for (int i = 0; i < tr.grid().n_lat(); i += 2)
    for (int k = 0; k < tr.grid().n_lon(); k += 3) {
      const double th = tr.grid().ring(i).theta;
      const double ph = tr.grid().longitudes()[static_cast<std::size_t>(k)];
      const double a = d5([&](double x) { return std::sin(x) * u_phi(x, ph); }, th, h);
      const double b = d5([&](double x) { return u_theta(th, x); }, ph, h);
      EXPECT_NEAR(zeta(i, k), (a - b) / std::sin(th), 1e-6);
    }
}

TEST(Coriolis, VanishesWithoutRotation) {
  OperatorContext ctx(8, 1.0, 0.0);
  const auto u = random_stream_field(8, 1);
  EXPECT_EQ(max_abs(coriolis_apply(u, ctx)), 0.0);
  EXPECT_LT(max_abs(coriolis_apply(u, ctx, CoriolisPath::grid)), 1e-15);
}

TEST(Coriolis, GridAndSpectralPathsAgree) {
  for (int lmax : {3, 10, 21}) {
    OperatorContext ctx(lmax, 1.0, 7.29);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto u = random_stream_field(lmax, seed, 0, 0.0);
      const auto diff = coriolis_apply(u, ctx, CoriolisPath::grid) - coriolis_apply(u, ctx, CoriolisPath::spectral);
      EXPECT_LT(max_abs(diff), 1e-8) << lmax;
    }
  }
}

TEST(Coriolis, SkewnessAgainstStokesPowers) {
  OperatorContext ctx(16, 1.0, 2.5);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto u = random_stream_field(16, seed, 5, 0.0);
    for (auto path : {CoriolisPath::spectral, CoriolisPath::grid}) {
      const auto cu = coriolis_apply(u, ctx, path);
      EXPECT_LT(std::abs(h_inner(cu, u)), 1e-10);
      EXPECT_LT(std::abs(h_inner(cu, stokes_apply(u, 1.0))), 1e-10 * norm_v2(u));
      EXPECT_LT(std::abs(h_inner(cu, stokes_apply(u, 2.0))), 1e-10 * h_inner(stokes_apply(u, 1.0), stokes_apply(u, 1.0)));
    }
  }
}

TEST(Ricci, ZeroAndFrameOracle) {
  const auto g = gauss_legendre_grid(5, 9);
  const auto zero = ricci_apply(GridVector(g), g);
  for (double v : zero.theta.values) EXPECT_EQ(v, 0.0);
  for (double v : zero.phi.values) EXPECT_EQ(v, 0.0);

  // Coordinate-basis oracle: the metric diag(1, sin^2) lowers
  // (u^theta, u^phi) = (u_theta, u_phi / sin); frame components of the
  // resulting covector are (w_theta, w_phi / sin).
  GridVector e_theta(g);
  GridVector mixed(g);
  for (int i = 0; i < g.n_lat(); ++i)
    for (int k = 0; k < g.n_lon(); ++k) {
      e_theta.theta(i, k) = 1.0;
      mixed.theta(i, k) = std::cos(g.longitudes()[static_cast<std::size_t>(k)]);
      mixed.phi(i, k) = g.ring(i).mu + 0.3;
    }
  const auto r = ricci_apply(e_theta, g);
  const auto rm = ricci_apply(mixed, g);
  for (int i = 0; i < g.n_lat(); ++i) {
    const double s = g.ring(i).sin_theta;
    for (int k = 0; k < g.n_lon(); ++k) {
      EXPECT_NEAR(r.theta(i, k), 1.0, 1e-15);
      EXPECT_NEAR(r.phi(i, k), 0.0, 1e-15);
      const double lowered_phi = s * s * (mixed.phi(i, k) / s);
      EXPECT_NEAR(rm.phi(i, k), lowered_phi / s, 1e-15);
      EXPECT_NEAR(rm.theta(i, k), mixed.theta(i, k), 1e-15);
    }
  }
}

TEST(Ricci, StressFormsAgree) {
  for (int lmax : {4, 12}) {
    OperatorContext ctx(lmax, 1.0, 0.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto u = random_stream_field(lmax, seed, 2, 0.0);
      const double rough = stress_form_rough(u, ctx);
      const double curl = stress_form_curl(u, ctx);
      EXPECT_NEAR(rough, curl, 1e-8 * std::max(1.0, std::abs(curl)));
      // Spectral value: sum over modes of (lambda - 2) lambda |psi|^2.
      EXPECT_NEAR(curl, norm_v2(u) - 2.0 * h_inner(u, u), 1e-8 * std::max(1.0, norm_v2(u)));
    }
  }
}

TEST(Trilinear, AntisymmetryInLastTwoSlots) {
  OperatorContext ctx(10, 1.0, 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto v = random_stream_field(10, seed, 0);
    const auto w = random_stream_field(10, seed, 1);
    const auto z = random_stream_field(10, seed, 2);
    EXPECT_NEAR(trilinear_b(v, w, w, ctx), 0.0, 1e-9);
    EXPECT_NEAR(trilinear_b(v, z, w, ctx), -trilinear_b(v, w, z, ctx), 1e-9);
  }
}

TEST(Trilinear, SingleModeSelfAdvectionVanishes) {
  const int lmax = 5;
  OperatorContext ctx(lmax, 1.0, 0.0);
  for (int l = 1; l <= lmax; ++l)
    for (int m = -l; m <= l; ++m) {
      const auto v = unit_mode(lmax, l, m);
      for (int l2 = 1; l2 <= lmax; ++l2)
        for (int m2 = -l2; m2 <= l2; ++m2) EXPECT_NEAR(trilinear_b(v, v, unit_mode(lmax, l2, m2), ctx), 0.0, 1e-9);
    }
}

TEST(Trilinear, RequiresProductGrid) {
  OperatorContext ctx(6, 1.0, 0.0, {.dealias = false});
  const auto u = random_stream_field(6, 0);
  EXPECT_THROW(trilinear_b(u, u, u, ctx), ResolutionError);
  EXPECT_THROW(OperatorContext(6, 1.0, 0.0, {.dealias = true, .n_lat = 7}), ResolutionError);
  EXPECT_THROW(OperatorContext(6, 0.0, 0.0), DomainError);
  EXPECT_THROW(OperatorContext(0, 1.0, 0.0), DomainError);
}

TEST(NonlinearB, SingleModesAreSteady) {
  const int lmax = 6;
  OperatorContext ctx(lmax, 1.0, 0.0);
  for (int l = 1; l <= lmax; ++l)
    for (int m = -l; m <= l; ++m) EXPECT_LT(max_abs(nonlinear_B(unit_mode(lmax, l, m), ctx)), 1e-9);
}

TEST(NonlinearB, ConservesEnergy) {
  OperatorContext ctx(20, 1.0, 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto u = random_stream_field(20, seed, 0, 0.0);
    EXPECT_LT(std::abs(h_inner(nonlinear_B(u, ctx), u)), 1e-9 * norm_v2(u));
  }
}

TEST(NonlinearB, MatchesTrilinearFormOnLowModes) {
  const int lmax = 10;
  OperatorContext ctx(lmax, 1.0, 0.0);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto u = random_stream_field(lmax, seed, 0, 0.0);
    const auto bu = nonlinear_B(u, ctx);
    double worst = 0.0;
    for (int l = 1; l <= 5; ++l)
      for (int m = -l; m <= l; ++m) {
        const auto w = unit_mode(lmax, l, m);
        worst = std::max(worst, std::abs(h_inner(bu, w) - trilinear_b(u, u, w, ctx)));
      }
    EXPECT_LT(worst, 1e-8);
  }
}

TEST(NonlinearB, WorkerCountDoesNotChangeBits) {
  OperatorContext serial(14, 1.0, 0.0, {.workers = 1});
  OperatorContext threaded(14, 1.0, 0.0, {.workers = 3});
  const auto u = random_stream_field(14, 11);
  EXPECT_EQ(nonlinear_B(u, serial), nonlinear_B(u, threaded));
  EXPECT_EQ(trilinear_b(u, u, stokes_apply(u, 1.0), serial), trilinear_b(u, u, stokes_apply(u, 1.0), threaded));
}

TEST(L4Norm, ConstantSpeedOracle) {
  // Z_{1,0} has speed sqrt(3/(8 pi)) sin(theta) and |Z|^4 integrates to
  // (3/(8 pi))^2 * 2 pi * 16/15.
  OperatorContext ctx(3, 1.0, 0.0);
  const double q = std::pow(3.0 / (8.0 * std::numbers::pi), 2) * 2.0 * std::numbers::pi * 16.0 / 15.0;
  EXPECT_NEAR(l4_norm(unit_mode(3, 1, 0), ctx), std::pow(q, 0.25), 1e-13);
}
