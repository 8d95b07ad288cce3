#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "snse/error.hpp"

namespace snse {

/// Position of (l, m), m >= 0, in l-major / m-minor triangular storage.
constexpr std::size_t triangular_index(int l, int m) {
  return static_cast<std::size_t>(l) * static_cast<std::size_t>(l + 1) / 2 + static_cast<std::size_t>(m);
}

constexpr std::size_t triangular_size(int lmax) {
  return static_cast<std::size_t>(lmax + 1) * static_cast<std::size_t>(lmax + 2) / 2;
}

/// Orthonormalized associated Legendre functions at one colatitude.
///
/// value(l, m) is the theta part of Y_{l,m} (Condon-Shortley phase included),
/// so Y_{l,m}(theta, phi) = value(l, m) * exp(i m phi). Built with the
/// l-increasing recurrence on the normalized functions; raw factorials never
/// appear, so there is no overflow at high degree.
class LegendreColumn {
 public:
  LegendreColumn(int lmax, double theta)
      : lmax_(lmax), p_(triangular_size(lmax), 0.0), dp_(triangular_size(lmax), 0.0) {
    const double mu = std::cos(theta);
    const double s = std::sin(theta);

    double pmm = 1.0 / std::sqrt(4.0 * std::numbers::pi);
    for (int m = 0; m <= lmax; ++m) {
      if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
      p_[triangular_index(m, m)] = pmm;
      if (m + 1 <= lmax) p_[triangular_index(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * mu * pmm;
      for (int l = m + 2; l <= lmax; ++l) {
        const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
        const double b = std::sqrt(((l - 1.0) * (l - 1.0) - static_cast<double>(m) * m) /
                                   (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
        p_[triangular_index(l, m)] = a * (mu * p_[triangular_index(l - 1, m)] - b * p_[triangular_index(l - 2, m)]);
      }
    }

    // dP/dtheta = (l mu P_l^m - c_lm P_{l-1}^m) / sin(theta); only used off the poles.
    if (s > 0.0) {
      for (int m = 0; m <= lmax; ++m) {
        for (int l = m; l <= lmax; ++l) {
          const double lower = l > m ? p_[triangular_index(l - 1, m)] : 0.0;
          const double c = std::sqrt((2.0 * l + 1.0) * (static_cast<double>(l) * l - static_cast<double>(m) * m) /
                                     (2.0 * l - 1.0));
          dp_[triangular_index(l, m)] = (l * mu * p_[triangular_index(l, m)] - c * lower) / s;
        }
      }
    }
  }

  int lmax() const { return lmax_; }
  double value(int l, int m) const { return p_[triangular_index(l, m)]; }
  double dtheta(int l, int m) const { return dp_[triangular_index(l, m)]; }
  const std::vector<double>& values() const { return p_; }
  const std::vector<double>& dthetas() const { return dp_; }

 private:
  int lmax_;
  std::vector<double> p_;
  std::vector<double> dp_;
};

/// Orthonormal spherical harmonic Y_{l,m}(theta, phi) for -l <= m <= l.
inline std::complex<double> eval_ylm(int l, int m, double theta, double phi) {
  if (l < 0 || std::abs(m) > l) throw DomainError("eval_ylm: requires 0 <= |m| <= l");
  const int am = std::abs(m);
  const double p = LegendreColumn(l, theta).value(l, am);
  const std::complex<double> y = p * std::polar(1.0, am * phi);
  if (m >= 0) return y;
  return (am % 2 == 0 ? 1.0 : -1.0) * std::conj(y);
}

}  // namespace snse
