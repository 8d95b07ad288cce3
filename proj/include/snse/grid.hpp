#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "snse/error.hpp"

namespace snse {

/// Gauss-Legendre nodes in colatitude times a uniform longitude ring.
///
/// Rings are ordered north to south (theta increasing, mu = cos(theta)
/// decreasing). No node ever sits on a pole.
class QuadratureGrid {
 public:
  struct Ring {
    double mu;      // cos(theta)
    double weight;  // Gauss-Legendre weight in mu
    double theta;
    double sin_theta;
  };

  QuadratureGrid() = default;
  QuadratureGrid(std::vector<Ring> rings, int n_lon) : rings_(std::move(rings)), n_lon_(n_lon) {
    longitudes_.resize(static_cast<std::size_t>(n_lon));
    for (int k = 0; k < n_lon; ++k)
      longitudes_[static_cast<std::size_t>(k)] = 2.0 * std::numbers::pi * k / n_lon;
  }

  int n_lat() const { return static_cast<int>(rings_.size()); }
  int n_lon() const { return n_lon_; }
  std::size_t size() const { return rings_.size() * static_cast<std::size_t>(n_lon_); }
  const Ring& ring(int i) const { return rings_[static_cast<std::size_t>(i)]; }
  std::span<const Ring> rings() const { return rings_; }
  std::span<const double> longitudes() const { return longitudes_; }
  double dphi() const { return 2.0 * std::numbers::pi / n_lon_; }

  /// Surface weight of one node: w_i * 2pi / n_lon.
  double area_weight(int i) const { return ring(i).weight * dphi(); }

  /// Highest band limit whose products of `factors` fields are integrated
  /// exactly; used for the 2/3-rule check.
  bool resolves_products(int lmax, int factors) const {
    return 2 * n_lat() - 1 >= factors * lmax && n_lon_ >= factors * lmax + 1;
  }

 private:
  std::vector<Ring> rings_;
  std::vector<double> longitudes_;
  int n_lon_ = 0;
};

namespace detail {

// Returns (P_n(x), P_n'(x)) by the three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(int n, double x) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  const double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

}  // namespace detail

/// Roots of P_{n_lat} with their Gauss weights, plus n_lon uniform longitudes.
inline QuadratureGrid gauss_legendre_grid(int n_lat, int n_lon) {
  if (n_lat < 1 || n_lon < 1) throw DomainError("gauss_legendre_grid: n_lat and n_lon must be >= 1");

  std::vector<QuadratureGrid::Ring> rings(static_cast<std::size_t>(n_lat));
  const int half = (n_lat + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n_lat + 0.5));
    double step = 1.0;
    for (int iter = 0; iter < 100 && std::abs(step) > 1e-16; ++iter) {
      auto [p, d] = detail::legendre_with_derivative(n_lat, x);
      step = p / d;
      x -= step;
    }
    // Newton can settle into a 1-ulp cycle for large n; accept tiny steps.
    if (std::abs(step) > 1e-14) throw InternalError("gauss_legendre_grid: Newton iteration failed");
    const double dp = detail::legendre_with_derivative(n_lat, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto north = static_cast<std::size_t>(i);
    const auto south = static_cast<std::size_t>(n_lat - 1 - i);
    rings[north] = {x, w, std::acos(x), std::sqrt(1.0 - x * x)};
    rings[south] = {-x, w, std::acos(-x), std::sqrt(1.0 - x * x)};
  }
  if (n_lat % 2 == 1) {
    auto& mid = rings[static_cast<std::size_t>(n_lat / 2)];
    mid.mu = 0.0;
    mid.theta = std::numbers::pi / 2;
    mid.sin_theta = 1.0;
  }
  return QuadratureGrid(std::move(rings), n_lon);
}

/// Smallest grid on which quadratic products of band limit `lmax` fields are
/// alias free (2/3 rule): n_lat >= (3 lmax + 1)/2, n_lon >= 3 lmax + 1.
inline QuadratureGrid dealiased_grid(int lmax) {
  return gauss_legendre_grid((3 * lmax + 2) / 2, 3 * lmax + 1);
}

/// Real values on the grid, ring-major (index = i * n_lon + k).
struct GridScalar {
  int n_lat = 0;
  int n_lon = 0;
  std::vector<double> values;

  GridScalar() = default;
  explicit GridScalar(const QuadratureGrid& g)
      : n_lat(g.n_lat()), n_lon(g.n_lon()), values(g.size(), 0.0) {}

  double& operator()(int i, int k) { return values[static_cast<std::size_t>(i * n_lon + k)]; }
  double operator()(int i, int k) const { return values[static_cast<std::size_t>(i * n_lon + k)]; }
};

/// Tangent field in orthonormal frame components (u_theta, u_phi).
struct GridVector {
  GridScalar theta;
  GridScalar phi;

  GridVector() = default;
  explicit GridVector(const QuadratureGrid& g) : theta(g), phi(g) {}
};

inline void check_shape(const QuadratureGrid& g, const GridScalar& f) {
  if (f.n_lat != g.n_lat() || f.n_lon != g.n_lon() || f.values.size() != g.size())
    throw DomainError("grid field shape does not match quadrature grid");
}

/// Surface integral of a scalar field by quadrature, ring order fixed.
inline double integrate(const QuadratureGrid& g, const GridScalar& f) {
  check_shape(g, f);
  double total = 0.0;
  for (int i = 0; i < g.n_lat(); ++i) {
    double ring_sum = 0.0;
    for (int k = 0; k < g.n_lon(); ++k) ring_sum += f(i, k);
    total += g.area_weight(i) * ring_sum;
  }
  return total;
}

/// L2 inner product of two tangent fields, sum of u.v over the sphere.
inline double inner(const QuadratureGrid& g, const GridVector& a, const GridVector& b) {
  check_shape(g, a.theta);
  check_shape(g, b.theta);
  double total = 0.0;
  for (int i = 0; i < g.n_lat(); ++i) {
    double ring_sum = 0.0;
    for (int k = 0; k < g.n_lon(); ++k) ring_sum += a.theta(i, k) * b.theta(i, k) + a.phi(i, k) * b.phi(i, k);
    total += g.area_weight(i) * ring_sum;
  }
  return total;
}

}  // namespace snse
