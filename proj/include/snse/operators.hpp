#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>

#include "snse/error.hpp"
#include "snse/grid.hpp"
#include "snse/harmonics.hpp"
#include "snse/spectral_field.hpp"

namespace snse {

/// Which eigenvalues the Stokes operator uses.
///
/// `paper` uses lambda_l = l(l+1). `ricci_shifted` uses l(l+1) - 2, the
/// spectrum of -P(Delta + 2 Ric) on Curl Y_{l,m}, which has a zero mode at l = 1.
enum class Spectrum : std::uint8_t { paper = 0, ricci_shifted = 1 };

inline double stokes_eigenvalue(int l, Spectrum spectrum = Spectrum::paper) {
  const double lam = geometric_eigenvalue(l);
  return spectrum == Spectrum::paper ? lam : lam - 2.0;
}

struct OperatorOptions {
  bool dealias = true;
  Spectrum spectrum = Spectrum::paper;
  int n_lat = 0;  // 0: smallest grid allowed by `dealias`
  int n_lon = 0;
  int workers = 1;
};

/// Band limit, physical constants, and the transform used for grid products.
class OperatorContext {
 public:
  OperatorContext(int lmax, double nu, double omega, OperatorOptions options = {})
      : lmax_(lmax), nu_(nu), omega_(omega), options_(options) {
    if (lmax < 1) throw DomainError("OperatorContext: lmax must be >= 1");
    if (!(nu > 0.0)) throw DomainError("OperatorContext: viscosity must be positive");
    QuadratureGrid grid;
    if (options.n_lat > 0 || options.n_lon > 0) {
      const QuadratureGrid fallback = options.dealias ? dealiased_grid(lmax) : gauss_legendre_grid(lmax + 1, 2 * lmax + 1);
      grid = gauss_legendre_grid(options.n_lat > 0 ? options.n_lat : fallback.n_lat(),
                                 options.n_lon > 0 ? options.n_lon : fallback.n_lon());
    } else {
      grid = options.dealias ? dealiased_grid(lmax) : gauss_legendre_grid(lmax + 1, 2 * lmax + 1);
    }
    if (options.dealias && !grid.resolves_products(lmax, 3))
      throw ResolutionError("dealiased products need n_lat >= " + std::to_string((3 * lmax + 2) / 2) +
                            " and n_lon >= " + std::to_string(3 * lmax + 1));
    transform_ = std::make_shared<const SphericalTransform>(lmax, std::move(grid), options.workers);
  }

  int lmax() const { return lmax_; }
  double nu() const { return nu_; }
  double omega() const { return omega_; }
  Spectrum spectrum() const { return options_.spectrum; }
  bool dealias() const { return options_.dealias; }
  int workers() const { return options_.workers; }
  const SphericalTransform& transform() const { return *transform_; }
  const QuadratureGrid& grid() const { return transform_->grid(); }

 private:
  int lmax_;
  double nu_;
  double omega_;
  OperatorOptions options_;
  std::shared_ptr<const SphericalTransform> transform_;
};

/// A^s u: coefficientwise multiplication by lambda_l^s.
inline SpectralField stokes_apply(const SpectralField& u, double s, Spectrum spectrum = Spectrum::paper) {
  SpectralField out = u;
  for (int l = 1; l <= u.lmax(); ++l) {
    const double lam = stokes_eigenvalue(l, spectrum);
    if (lam == 0.0 && s < 0.0) throw DomainError("stokes_apply: negative power of a zero eigenvalue");
    const double factor = s == 0.0 ? 1.0 : std::pow(lam, s);
    for (int m = 0; m <= l; ++m) out(l, m) *= factor;
  }
  return out;
}

/// Vorticity zeta = curl Curl psi = l(l+1) psi as a scalar field.
inline SpectralField curl_scalar(const SpectralField& u) {
  SpectralField zeta = SpectralField::scalar(u.lmax());
  for (int l = 1; l <= u.lmax(); ++l)
    for (int m = 0; m <= l; ++m) zeta(l, m) = geometric_eigenvalue(l) * u(l, m);
  return zeta;
}

/// Stream coefficient multiplier of C = P(2 Omega cos(theta) x^ cross .).
///
/// x^ cross Curl psi = grad psi, and curl(f grad psi) = Curl psi . grad f =
/// -2 Omega d_phi psi for f = 2 Omega cos(theta); dividing by l(l+1) gives
/// -2 i Omega m / l(l+1).
inline Complex coriolis_multiplier(int l, int m, double omega) {
  return {0.0, -2.0 * omega * m / geometric_eigenvalue(l)};
}

enum class CoriolisPath { spectral, grid };

inline SpectralField coriolis_apply(const SpectralField& u, const OperatorContext& ctx,
                                    CoriolisPath path = CoriolisPath::spectral) {
  if (path == CoriolisPath::spectral) {
    SpectralField out = SpectralField::stream(u.lmax());
    for (int l = 1; l <= u.lmax(); ++l)
      for (int m = 0; m <= l; ++m) out(l, m) = coriolis_multiplier(l, m, ctx.omega()) * u(l, m);
    return out;
  }
  const auto& tr = ctx.transform();
  const GridVector vel = tr.vector_synthesis(u);
  GridVector rotated(tr.grid());
  for (int i = 0; i < tr.grid().n_lat(); ++i) {
    const double f = 2.0 * ctx.omega() * tr.grid().ring(i).mu;
    for (int k = 0; k < tr.grid().n_lon(); ++k) {
      // x^ cross (a e_theta + b e_phi) = a e_phi - b e_theta
      rotated.theta(i, k) = -f * vel.phi(i, k);
      rotated.phi(i, k) = f * vel.theta(i, k);
    }
  }
  return tr.vector_analysis(rotated);
}

/// Ricci tensor acting on a tangent field given in orthonormal frame components.
///
/// The coordinate matrix diag(1, sin^2 theta) lowers the index of the
/// coordinate components (u_theta, u_phi / sin theta); converting the result
/// back to the orthonormal frame divides the phi entry by sin theta.
inline GridVector ricci_apply(const GridVector& u, const QuadratureGrid& grid) {
  check_shape(grid, u.theta);
  check_shape(grid, u.phi);
  GridVector out(grid);
  for (int i = 0; i < grid.n_lat(); ++i) {
    const double s = grid.ring(i).sin_theta;
    for (int k = 0; k < grid.n_lon(); ++k) {
      const double coord_theta = u.theta(i, k);
      const double coord_phi = u.phi(i, k) / s;
      const double lowered_theta = 1.0 * coord_theta;
      const double lowered_phi = s * s * coord_phi;
      out.theta(i, k) = lowered_theta;
      out.phi(i, k) = lowered_phi / s;
    }
  }
  return out;
}

/// Velocity u = Curl psi and its first derivatives on the grid.
struct VelocityGradient {
  GridVector u;
  GridScalar dtheta_u_theta, dphi_u_theta, dtheta_u_phi, dphi_u_phi;
};

inline VelocityGradient velocity_gradient(const SpectralField& psi, const SphericalTransform& tr) {
  using Table = SphericalTransform::Table;
  const auto& grid = tr.grid();
  const GridScalar psi_t = tr.synthesize(psi, Table::dtheta);
  const GridScalar psi_p = tr.synthesize(psi, Table::value, 1);
  const GridScalar psi_tp = tr.synthesize(psi, Table::dtheta, 1);
  const GridScalar psi_pp = tr.synthesize(psi, Table::value, 2);
  SpectralField lap = psi;
  for (int l = 0; l <= psi.lmax(); ++l)
    for (int m = 0; m <= l; ++m) lap(l, m) *= -geometric_eigenvalue(l);
  const GridScalar lap_psi = tr.synthesize(lap);

  VelocityGradient g{GridVector(grid), GridScalar(grid), GridScalar(grid), GridScalar(grid), GridScalar(grid)};
  for (int i = 0; i < grid.n_lat(); ++i) {
    const double s = grid.ring(i).sin_theta;
    const double c = grid.ring(i).mu;
    for (int k = 0; k < grid.n_lon(); ++k) {
      // Laplace-Beltrami: psi_tt = lap - cot psi_t - psi_pp / sin^2
      const double psi_tt = lap_psi(i, k) - (c / s) * psi_t(i, k) - psi_pp(i, k) / (s * s);
      g.u.theta(i, k) = psi_p(i, k) / s;
      g.u.phi(i, k) = -psi_t(i, k);
      g.dtheta_u_theta(i, k) = psi_tp(i, k) / s - c * psi_p(i, k) / (s * s);
      g.dphi_u_theta(i, k) = psi_pp(i, k) / s;
      g.dtheta_u_phi(i, k) = -psi_tt;
      g.dphi_u_phi(i, k) = -psi_tp(i, k);
    }
  }
  return g;
}

namespace detail {

inline void require_product_grid(const OperatorContext& ctx, const char* what) {
  if (!ctx.grid().resolves_products(ctx.lmax(), 3))
    throw ResolutionError(std::string(what) + ": grid does not resolve triple products at lmax " +
                          std::to_string(ctx.lmax()));
}

}  // namespace detail

/// b(v, w, z) = integral of (nabla_v w) . z, evaluated by quadrature of the
/// covariant derivative in the orthonormal frame:
///   (nabla_v w)_theta = v.grad w_theta - cot v_phi w_phi
///   (nabla_v w)_phi   = v.grad w_phi   + cot v_phi w_theta
inline double trilinear_b(const SpectralField& v, const SpectralField& w, const SpectralField& z,
                          const OperatorContext& ctx) {
  detail::require_product_grid(ctx, "trilinear_b");
  const auto& tr = ctx.transform();
  const auto& grid = tr.grid();
  const GridVector vv = tr.vector_synthesis(v);
  const VelocityGradient wg = velocity_gradient(w, tr);
  const GridVector zz = tr.vector_synthesis(z);

  double total = 0.0;
  for (int i = 0; i < grid.n_lat(); ++i) {
    const double s = grid.ring(i).sin_theta;
    const double cot = grid.ring(i).mu / s;
    double ring_sum = 0.0;
    for (int k = 0; k < grid.n_lon(); ++k) {
      const double vt = vv.theta(i, k);
      const double vp = vv.phi(i, k);
      const double adv_t = vt * wg.dtheta_u_theta(i, k) + (vp / s) * wg.dphi_u_theta(i, k) - cot * vp * wg.u.phi(i, k);
      const double adv_p = vt * wg.dtheta_u_phi(i, k) + (vp / s) * wg.dphi_u_phi(i, k) + cot * vp * wg.u.theta(i, k);
      ring_sum += adv_t * zz.theta(i, k) + adv_p * zz.phi(i, k);
    }
    total += grid.area_weight(i) * ring_sum;
  }
  return total;
}

/// B(u) = P(nabla_u u) as stream coefficients, computed in vorticity form:
/// curl(nabla_u u) = u . grad zeta, so B_{l,m} = (u . grad zeta)_{l,m} / l(l+1).
/// On a dealiased grid (B(u), w)_H = b(u, u, w) holds for every band-limited w.
inline SpectralField nonlinear_B(const SpectralField& u, const OperatorContext& ctx) {
  if (ctx.dealias()) detail::require_product_grid(ctx, "nonlinear_B");
  const auto& tr = ctx.transform();
  const auto& grid = tr.grid();
  const GridVector vel = tr.vector_synthesis(u);
  const GridVector grad_zeta = tr.gradient_synthesis(curl_scalar(u));
  GridScalar advection(grid);
  for (std::size_t n = 0; n < advection.values.size(); ++n)
    advection.values[n] = vel.theta.values[n] * grad_zeta.theta.values[n] + vel.phi.values[n] * grad_zeta.phi.values[n];
  const SpectralField g = tr.scalar_analysis(advection);
  SpectralField out = SpectralField::stream(u.lmax());
  for (int l = 1; l <= u.lmax(); ++l)
    for (int m = 0; m <= l; ++m) out(l, m) = g(l, m) / geometric_eigenvalue(l);
  return out;
}

/// |u|_{L^4} by grid quadrature of |u|^4.
inline double l4_norm(const SpectralField& u, const OperatorContext& ctx) {
  const auto& tr = ctx.transform();
  const GridVector vel = tr.vector_synthesis(u);
  GridScalar q(tr.grid());
  for (std::size_t n = 0; n < q.values.size(); ++n) {
    const double mag2 = vel.theta.values[n] * vel.theta.values[n] + vel.phi.values[n] * vel.phi.values[n];
    q.values[n] = mag2 * mag2;
  }
  return std::pow(std::max(integrate(tr.grid(), q), 0.0), 0.25);
}

/// Integral of |nabla u|^2 (covariant derivative, all four frame entries).
inline double covariant_gradient_norm2(const SpectralField& u, const OperatorContext& ctx) {
  const auto& tr = ctx.transform();
  const auto& grid = tr.grid();
  const VelocityGradient g = velocity_gradient(u, tr);
  double total = 0.0;
  for (int i = 0; i < grid.n_lat(); ++i) {
    const double s = grid.ring(i).sin_theta;
    const double c = grid.ring(i).mu;
    double ring_sum = 0.0;
    for (int k = 0; k < grid.n_lon(); ++k) {
      const double a = g.dtheta_u_theta(i, k);
      const double b = g.dtheta_u_phi(i, k);
      const double e = (g.dphi_u_theta(i, k) - c * g.u.phi(i, k)) / s;
      const double d = (g.dphi_u_phi(i, k) + c * g.u.theta(i, k)) / s;
      ring_sum += a * a + b * b + e * e + d * d;
    }
    total += grid.area_weight(i) * ring_sum;
  }
  return total;
}

/// (-L u, u) with L = Delta + 2 Ric written through the rough Laplacian
/// (Weitzenboeck: -Delta_dR = nabla^* nabla + Ric), i.e. |nabla u|^2 - (Ric u, u).
inline double stress_form_rough(const SpectralField& u, const OperatorContext& ctx) {
  const auto& tr = ctx.transform();
  const GridVector vel = tr.vector_synthesis(u);
  return covariant_gradient_norm2(u, ctx) - inner(tr.grid(), ricci_apply(vel, tr.grid()), vel);
}

/// (-L u, u) in the curl form a(u, u) = |curl u|^2 - 2 (Ric u, u).
inline double stress_form_curl(const SpectralField& u, const OperatorContext& ctx) {
  const auto& tr = ctx.transform();
  const GridVector vel = tr.vector_synthesis(u);
  const GridScalar zeta = tr.synthesize(curl_scalar(u));
  GridScalar zeta2(tr.grid());
  for (std::size_t n = 0; n < zeta2.values.size(); ++n) zeta2.values[n] = zeta.values[n] * zeta.values[n];
  return integrate(tr.grid(), zeta2) - 2.0 * inner(tr.grid(), ricci_apply(vel, tr.grid()), vel);
}

}  // namespace snse
