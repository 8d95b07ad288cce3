#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "snse/error.hpp"
#include "snse/legendre.hpp"
#include "snse/rng.hpp"

namespace snse {

using Complex = std::complex<double>;

/// Eigenvalue of -Laplace-Beltrami on degree l: l(l+1).
constexpr double geometric_eigenvalue(int l) { return static_cast<double>(l) * (l + 1.0); }

/// Number of real fields represented by coefficient (l, m): 1 for m = 0, 2 otherwise.
constexpr double conjugate_multiplicity(int m) { return m == 0 ? 1.0 : 2.0; }

enum class FieldKind : std::uint8_t {
  stream,  // u = Curl psi; degree 0 carries no field
  scalar,
};

/// Spectral coefficients of a real field, stored for m >= 0 in l-major order.
///
/// Negative orders are implied by psi_{l,-m} = (-1)^m conj(psi_{l,m}). The l = 0
/// slot exists for both kinds so the index map is shared; for stream fields it
/// is kept at zero.
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(int lmax, FieldKind kind) : lmax_(lmax), kind_(kind), coeffs_(triangular_size(lmax)) {
    if (lmax < 0) throw DomainError("SpectralField: lmax must be >= 0");
  }

  static SpectralField stream(int lmax) { return {lmax, FieldKind::stream}; }
  static SpectralField scalar(int lmax) { return {lmax, FieldKind::scalar}; }

  int lmax() const { return lmax_; }
  FieldKind kind() const { return kind_; }
  int lmin() const { return kind_ == FieldKind::stream ? 1 : 0; }

  Complex& operator()(int l, int m) { return coeffs_[triangular_index(l, m)]; }
  const Complex& operator()(int l, int m) const { return coeffs_[triangular_index(l, m)]; }

  /// Coefficient for any -l <= m <= l, negative orders by conjugate symmetry.
  Complex coeff(int l, int m) const {
    if (m >= 0) return (*this)(l, m);
    return ((-m) % 2 == 0 ? 1.0 : -1.0) * std::conj((*this)(l, -m));
  }

  std::span<Complex> coeffs() { return coeffs_; }
  std::span<const Complex> coeffs() const { return coeffs_; }

  bool all_finite() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(),
                       [](const Complex& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
  }

  /// Same field on a different band limit (truncated or zero padded).
  SpectralField resized(int lmax) const {
    SpectralField out(lmax, kind_);
    for (int l = 0; l <= std::min(lmax, lmax_); ++l)
      for (int m = 0; m <= l; ++m) out(l, m) = (*this)(l, m);
    return out;
  }

  SpectralField& operator+=(const SpectralField& other) {
    check_compatible(other);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& other) {
    check_compatible(other);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
    return *this;
  }
  SpectralField& operator*=(double s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
  }

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
  friend SpectralField operator*(SpectralField a, double s) { return a *= s; }

  friend bool operator==(const SpectralField&, const SpectralField&) = default;

  void check_compatible(const SpectralField& other) const {
    if (other.lmax_ != lmax_ || other.kind_ != kind_)
      throw DomainError("SpectralField: band limit or kind mismatch");
  }

 private:
  int lmax_ = 0;
  FieldKind kind_ = FieldKind::stream;
  std::vector<Complex> coeffs_;
};

/// Sum over all modes (both signs of m) of weight(l) * Re(a_{l,m} conj(b_{l,m})).
template <class Weight>
double weighted_mode_sum(const SpectralField& a, const SpectralField& b, Weight&& weight) {
  a.check_compatible(b);
  double total = 0.0;
  for (int l = a.lmin(); l <= a.lmax(); ++l) {
    double degree_sum = 0.0;
    for (int m = 0; m <= l; ++m) {
      const Complex x = a(l, m);
      const Complex y = b(l, m);
      degree_sum += conjugate_multiplicity(m) * (x.real() * y.real() + x.imag() * y.imag());
    }
    total += weight(l) * degree_sum;
  }
  return total;
}

/// L2(S^2) inner product of two scalar fields.
inline double l2_inner(const SpectralField& a, const SpectralField& b) {
  return weighted_mode_sum(a, b, [](int) { return 1.0; });
}

/// H inner product (Curl a, Curl b) of two stream fields: sum lambda_l Re(a conj b).
inline double h_inner(const SpectralField& a, const SpectralField& b) {
  return weighted_mode_sum(a, b, geometric_eigenvalue);
}

/// Real orthonormal basis element of H built from Z_{l,m} = lambda^{-1/2} Curl Y_{l,m}.
///
/// m = 0 gives Z_{l,0}; m > 0 gives sqrt(2) Re Z_{l,m}; m < 0 gives
/// sqrt(2) Im Z_{l,|m|}.
inline SpectralField unit_mode(int lmax, int l, int m) {
  if (l < 1 || l > lmax || std::abs(m) > l) throw DomainError("unit_mode: requires 1 <= l <= lmax, |m| <= l");
  SpectralField f = SpectralField::stream(lmax);
  const double lam = geometric_eigenvalue(l);
  if (m == 0)
    f(l, 0) = 1.0 / std::sqrt(lam);
  else if (m > 0)
    f(l, m) = 1.0 / std::sqrt(2.0 * lam);
  else
    f(l, -m) = Complex(0.0, -1.0 / std::sqrt(2.0 * lam));
  return f;
}

/// Coordinates (a, b) of coefficient (l, m) in the real orthonormal basis of
/// unit_mode, packed as a + i b (b = 0 for m = 0). Inverse of from_real_coordinates.
inline Complex real_coordinates(const SpectralField& f, int l, int m) {
  const double lam = geometric_eigenvalue(l);
  const Complex c = f(l, m);
  if (m == 0) return {std::sqrt(lam) * c.real(), 0.0};
  const double s = std::sqrt(2.0 * lam);
  return {s * c.real(), -s * c.imag()};
}

inline Complex from_real_coordinates(Complex coords, int l, int m) {
  const double lam = geometric_eigenvalue(l);
  if (m == 0) return {coords.real() / std::sqrt(lam), 0.0};
  const double s = std::sqrt(2.0 * lam);
  return {coords.real() / s, -coords.imag() / s};
}

/// Random real stream field with H-spectrum decaying like l^{-slope};
/// deterministic in (seed, stream). Normalized to |u|_H = 1.
inline SpectralField random_stream_field(int lmax, std::uint64_t seed, std::uint64_t stream = 0,
                                         double slope = 1.0) {
  const CounterRng rng(seed, stream);
  SpectralField f = SpectralField::stream(lmax);
  for (int l = 1; l <= lmax; ++l) {
    const double amp = std::pow(static_cast<double>(l), -slope);
    for (int m = 0; m <= l; ++m) {
      const auto [a, b] = rng.normals(Purpose::field, 0, static_cast<std::uint32_t>(triangular_index(l, m)));
      f(l, m) = from_real_coordinates(Complex(amp * a, m == 0 ? 0.0 : amp * b), l, m);
    }
  }
  const double norm = std::sqrt(h_inner(f, f));
  if (norm > 0.0) f *= 1.0 / norm;
  return f;
}

}  // namespace snse
