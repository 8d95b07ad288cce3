#pragma once

#include <complex>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "snse/error.hpp"
#include "snse/grid.hpp"
#include "snse/legendre.hpp"
#include "snse/parallel.hpp"
#include "snse/spectral_field.hpp"

namespace snse {

/// Direct (O(L^3)) spherical-harmonic transforms on a Gauss-Legendre grid.
///
/// Conventions: Y_{l,m} orthonormal with Condon-Shortley phase, tangent
/// fields in orthonormal frame components (u_theta, u_phi), and
/// Curl psi = -x^ cross grad psi, i.e. u_theta = (1/sin) d_phi psi,
/// u_phi = -d_theta psi.
///
/// All transforms are pure. Work is split over latitude rings (synthesis and
/// the Fourier stage of analysis) and over orders m (Legendre stage of
/// analysis); every output slot is summed in a fixed order, so results are
/// bitwise independent of `workers`.
class SphericalTransform {
 public:
  enum class Table { value, dtheta };

  SphericalTransform(int lmax, QuadratureGrid grid, int workers = 1)
      : lmax_(lmax), grid_(std::move(grid)), workers_(workers) {
    if (lmax < 0) throw DomainError("SphericalTransform: lmax must be >= 0");
    if (grid_.n_lat() < lmax + 1 || grid_.n_lon() < 2 * lmax + 1)
      throw ResolutionError("grid " + std::to_string(grid_.n_lat()) + "x" + std::to_string(grid_.n_lon()) +
                            " does not resolve band limit " + std::to_string(lmax) +
                            " (needs n_lat >= lmax+1, n_lon >= 2 lmax+1)");
    columns_.reserve(static_cast<std::size_t>(grid_.n_lat()));
    for (const auto& ring : grid_.rings()) columns_.emplace_back(lmax, ring.theta);

    const int n_lon = grid_.n_lon();
    cos_.resize(static_cast<std::size_t>((lmax + 1) * n_lon));
    sin_.resize(cos_.size());
    for (int m = 0; m <= lmax; ++m) {
      for (int k = 0; k < n_lon; ++k) {
        // exact integer reduction keeps the table symmetric to round-off
        const double angle = 2.0 * std::numbers::pi * static_cast<double>((m * k) % n_lon) / n_lon;
        cos_[static_cast<std::size_t>(m * n_lon + k)] = std::cos(angle);
        sin_[static_cast<std::size_t>(m * n_lon + k)] = std::sin(angle);
      }
    }
  }

  int lmax() const { return lmax_; }
  const QuadratureGrid& grid() const { return grid_; }
  int workers() const { return workers_; }
  void set_workers(int workers) { workers_ = workers; }

  /// Grid values of sum_{l,m} c_{l,m} (i m)^dphi_order T_{l,m}(theta) e^{i m phi},
  /// divided by sin(theta) when requested. T is P or dP/dtheta.
  GridScalar synthesize(const SpectralField& f, Table table = Table::value, int dphi_order = 0,
                        bool divide_by_sin = false) const {
    check_band(f);
    GridScalar out(grid_);
    const int n_lon = grid_.n_lon();
    parallel_for(static_cast<std::size_t>(grid_.n_lat()), workers_, [&](std::size_t ring) {
      const auto& col = columns_[ring];
      const auto& t = table == Table::value ? col.values() : col.dthetas();
      std::vector<Complex> fourier(static_cast<std::size_t>(lmax_ + 1));
      for (int m = 0; m <= lmax_; ++m) {
        Complex acc = 0.0;
        for (int l = m; l <= lmax_; ++l) acc += f(l, m) * t[triangular_index(l, m)];
        fourier[static_cast<std::size_t>(m)] = acc * phi_derivative_factor(m, dphi_order);
      }
      const double scale = divide_by_sin ? 1.0 / grid_.ring(static_cast<int>(ring)).sin_theta : 1.0;
      for (int k = 0; k < n_lon; ++k) {
        double v = fourier[0].real();
        for (int m = 1; m <= lmax_; ++m) {
          const std::size_t idx = static_cast<std::size_t>(m * n_lon + k);
          const Complex& a = fourier[static_cast<std::size_t>(m)];
          v += 2.0 * (a.real() * cos_[idx] - a.imag() * sin_[idx]);
        }
        out.values[ring * static_cast<std::size_t>(n_lon) + static_cast<std::size_t>(k)] = scale * v;
      }
    });
    return out;
  }

  GridScalar scalar_synthesis(const SpectralField& f) const { return synthesize(f); }

  /// Quadrature projection onto Y_{l,m}, l <= lmax. Exact for band-limited inputs.
  SpectralField scalar_analysis(const GridScalar& f) const {
    check_shape(grid_, f);
    const auto fourier = ring_fourier(f);
    SpectralField out = SpectralField::scalar(lmax_);
    parallel_for(static_cast<std::size_t>(lmax_ + 1), workers_, [&](std::size_t mu) {
      const int m = static_cast<int>(mu);
      for (int l = m; l <= lmax_; ++l) {
        Complex acc = 0.0;
        for (int i = 0; i < grid_.n_lat(); ++i)
          acc += grid_.ring(i).weight * columns_[static_cast<std::size_t>(i)].value(l, m) * fourier_at(fourier, i, m);
        out(l, m) = acc;
      }
    });
    return out;
  }

  /// u = Curl psi on the grid.
  GridVector vector_synthesis(const SpectralField& psi) const {
    GridVector u;
    u.theta = synthesize(psi, Table::value, 1, true);
    u.phi = synthesize(psi, Table::dtheta);
    for (auto& x : u.phi.values) x = -x;
    return u;
  }

  /// grad f on the grid.
  GridVector gradient_synthesis(const SpectralField& f) const {
    GridVector g;
    g.theta = synthesize(f, Table::dtheta);
    g.phi = synthesize(f, Table::value, 1, true);
    return g;
  }

  /// Coefficients of the scalar curl w (= -div(x^ cross w)) via (curl w, Y) = (w, Curl Y).
  SpectralField curl_analysis(const GridVector& w) const {
    return project_tangent(w, [](double p_over_sin, double dp, Complex wt, Complex wp, int m) {
      return Complex(0.0, -m) * p_over_sin * wt - dp * wp;
    });
  }

  /// Coefficients of div w via (div w, Y) = -(w, grad Y).
  SpectralField divergence_analysis(const GridVector& w) const {
    return project_tangent(w, [](double p_over_sin, double dp, Complex wt, Complex wp, int m) {
      return -(dp * wt + Complex(0.0, -m) * p_over_sin * wp);
    });
  }

  /// Stream function of the divergence-free part P w: psi_{l,m} = (curl w)_{l,m} / l(l+1).
  /// Gradient components are annihilated.
  SpectralField vector_analysis(const GridVector& w) const {
    const SpectralField curl = curl_analysis(w);
    SpectralField psi = SpectralField::stream(lmax_);
    for (int l = 1; l <= lmax_; ++l)
      for (int m = 0; m <= l; ++m) psi(l, m) = curl(l, m) / geometric_eigenvalue(l);
    return psi;
  }

 private:
  static Complex phi_derivative_factor(int m, int order) {
    Complex f = 1.0;
    for (int k = 0; k < order; ++k) f *= Complex(0.0, m);
    return f;
  }

  void check_band(const SpectralField& f) const {
    if (f.lmax() != lmax_)
      throw DomainError("SphericalTransform: field band limit " + std::to_string(f.lmax()) +
                        " differs from transform band limit " + std::to_string(lmax_));
  }

  // dphi * sum_k f(i,k) e^{-i m phi_k} for every ring i and order m <= lmax.
  std::vector<Complex> ring_fourier(const GridScalar& f) const {
    const int n_lon = grid_.n_lon();
    std::vector<Complex> out(static_cast<std::size_t>(grid_.n_lat() * (lmax_ + 1)));
    parallel_for(static_cast<std::size_t>(grid_.n_lat()), workers_, [&](std::size_t ring) {
      for (int m = 0; m <= lmax_; ++m) {
        double re = 0.0;
        double im = 0.0;
        for (int k = 0; k < n_lon; ++k) {
          const double v = f.values[ring * static_cast<std::size_t>(n_lon) + static_cast<std::size_t>(k)];
          const std::size_t idx = static_cast<std::size_t>(m * n_lon + k);
          re += v * cos_[idx];
          im -= v * sin_[idx];
        }
        out[ring * static_cast<std::size_t>(lmax_ + 1) + static_cast<std::size_t>(m)] =
            Complex(re, im) * grid_.dphi();
      }
    });
    return out;
  }

  Complex fourier_at(const std::vector<Complex>& fourier, int ring, int m) const {
    return fourier[static_cast<std::size_t>(ring * (lmax_ + 1) + m)];
  }

  // sum_i w_i kernel(P/sin, dP, W_theta,m(i), W_phi,m(i), m) for each (l, m).
  template <class Kernel>
  SpectralField project_tangent(const GridVector& w, Kernel kernel) const {
    check_shape(grid_, w.theta);
    check_shape(grid_, w.phi);
    const auto ft = ring_fourier(w.theta);
    const auto fp = ring_fourier(w.phi);
    SpectralField out = SpectralField::scalar(lmax_);
    parallel_for(static_cast<std::size_t>(lmax_ + 1), workers_, [&](std::size_t mu) {
      const int m = static_cast<int>(mu);
      for (int l = m; l <= lmax_; ++l) {
        Complex acc = 0.0;
        for (int i = 0; i < grid_.n_lat(); ++i) {
          const auto& col = columns_[static_cast<std::size_t>(i)];
          const auto& ring = grid_.ring(i);
          acc += ring.weight * kernel(col.value(l, m) / ring.sin_theta, col.dtheta(l, m), fourier_at(ft, i, m),
                                      fourier_at(fp, i, m), m);
        }
        out(l, m) = acc;
      }
    });
    return out;
  }

  int lmax_;
  QuadratureGrid grid_;
  int workers_;
  std::vector<LegendreColumn> columns_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

}  // namespace snse
