#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "snse/error.hpp"
#include "snse/grid.hpp"
#include "snse/operators.hpp"
#include "snse/spectral_field.hpp"

namespace snse {

inline double norm_h2(const SpectralField& u) { return h_inner(u, u); }

/// |u|_V^2 = (A u, u)_H.
inline double norm_v2(const SpectralField& u, Spectrum spectrum = Spectrum::paper) {
  return weighted_mode_sum(u, u, [&](int l) { return geometric_eigenvalue(l) * stokes_eigenvalue(l, spectrum); });
}

/// |A u|_H^2.
inline double norm_da2(const SpectralField& u, Spectrum spectrum = Spectrum::paper) {
  return weighted_mode_sum(u, u, [&](int l) {
    const double s = stokes_eigenvalue(l, spectrum);
    return geometric_eigenvalue(l) * s * s;
  });
}

struct Norms {
  double H = 0.0;
  double V = 0.0;
  double DA = 0.0;
  double L4 = 0.0;
};

inline Norms norms(const SpectralField& u, const OperatorContext& ctx) {
  return {std::sqrt(norm_h2(u)), std::sqrt(norm_v2(u, ctx.spectrum())), std::sqrt(norm_da2(u, ctx.spectrum())),
          l4_norm(u, ctx)};
}

// ---------------------------------------------------------------------------
// Inequality monitors

struct InequalityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // worst lhs / rhs over the samples
  std::size_t input_id = 0;
};

struct InequalityReport {
  std::vector<InequalityCheck> checks;

  const InequalityCheck& at(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw DomainError("inequality report has no check '" + name + "'");
  }
};

/// Evaluates both sides of the Poincare, Ladyzhenskaya and trilinear
/// estimates on every sample (triples are taken cyclically) and keeps the
/// worst ratio per check. The b estimates use
///   b1: |u|^1/2 |u|_V^1/2 |v|^1/2 |v|_V^1/2 |w|_V
///   b2: |u|^1/2 |u|_V^1/2 |v|_V^1/2 |A v|^1/2 |w|
///   b5: |u|_L4 |v|_V |w|_L4
/// coriolis_zero and b_antisym hold quantities that vanish identically,
/// scaled by the matching norm product.
inline InequalityReport inequality_report(const std::vector<SpectralField>& samples, const OperatorContext& ctx) {
  if (samples.empty()) throw DomainError("inequality_report: no samples");
  const Spectrum sp = ctx.spectrum();
  const double lambda1 = stokes_eigenvalue(1, sp);
  const std::size_t n = samples.size();

  struct Cached {
    double h, v, da, l4;
  };
  std::vector<Cached> c(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nm = norms(samples[i], ctx);
    c[i] = {nm.H, nm.V, nm.DA, nm.L4};
  }
  const double omega = ctx.omega() != 0.0 ? ctx.omega() : 1.0;
  const OperatorContext rotating(ctx.lmax(), ctx.nu(), omega,
                                 {.dealias = ctx.dealias(), .spectrum = sp, .n_lat = ctx.grid().n_lat(),
                                  .n_lon = ctx.grid().n_lon(), .workers = ctx.workers()});

  InequalityReport report;
  for (const char* name : {"poincare", "ladyzhenskaya", "b1", "b2", "b5", "coriolis_zero", "b_antisym"})
    report.checks.push_back({name, 0.0, 0.0, -std::numeric_limits<double>::infinity(), 0});
  auto update = [&](std::size_t k, double lhs, double rhs, std::size_t id) {
    auto& chk = report.checks[k];
    const double ratio = rhs > 0.0 ? lhs / rhs : (lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (ratio > chk.ratio) chk = {chk.name, lhs, rhs, ratio, id};
  };

  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = samples[i];
    const auto& v = samples[(i + 1) % n];
    const auto& w = samples[(i + 2) % n];
    const auto& cu = c[i];
    const auto& cv = c[(i + 1) % n];
    const auto& cw = c[(i + 2) % n];

    update(0, lambda1 * cu.h * cu.h, cu.v * cu.v, i);
    update(1, cu.l4, std::sqrt(cu.h * cu.v), i);
    const double buvw = trilinear_b(u, v, w, ctx);
    update(2, std::abs(buvw), std::sqrt(cu.h * cu.v * cv.h * cv.v) * cw.v, i);
    update(3, std::abs(buvw), std::sqrt(cu.h * cu.v * cv.v * cv.da) * cw.h, i);
    update(4, std::abs(buvw), cu.l4 * cv.v * cw.l4, i);

    const auto coriolis = coriolis_apply(u, rotating, CoriolisPath::grid);
    const double skew = std::max(std::abs(h_inner(coriolis, u)) / std::max(cu.h * cu.h, 1e-300),
                                 std::abs(h_inner(coriolis, stokes_apply(u, 1.0, sp))) / std::max(cu.v * cu.v, 1e-300));
    update(5, skew * std::abs(omega), std::abs(omega), i);

    const double self = std::abs(trilinear_b(u, v, v, ctx));
    const double swap = std::abs(buvw + trilinear_b(u, w, v, ctx));
    update(6, std::max(self, swap), std::sqrt(cu.h * cu.v * cv.h * cv.v) * cw.v, i);
  }
  return report;
}

inline void write_inequality_csv(std::ostream& os, const InequalityReport& report) {
  os << "check,lhs,rhs,ratio,input_id\n";
  char buf[256];
  for (const auto& c : report.checks) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%zu\n", c.name.c_str(), c.lhs, c.rhs, c.ratio, c.input_id);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Energy ledger

/// Instantaneous quantities recorded at each step time.
struct LedgerSample {
  double t = 0.0;
  double v_h2 = 0.0;   // |v|^2
  double v_v2 = 0.0;   // |v|_V^2
  double v_da2 = 0.0;  // |A v|^2
  double bvvz = 0.0;   // b(v, v, z)
  double Fv = 0.0;     // (F, v)
  double F_h2 = 0.0;   // |F|^2
  double z_h2 = 0.0;   // |z|^2
  double z_v2 = 0.0;   // |z|_V^2
  double b_ratio = 0.0;      // |b(v,v,z)| / (|v| |v|_V |z|_V)
  double enstrophy_ratio = 0.0;  // worst ratio of the three b(., ., Av) estimates
};

/// Integrals over one step of |v|^2, |v|_V^2 and |A v|^2 along
/// v(s) = e^{-L s} v_n + (1 - e^{-L s}) / L * N, the exact solution of
/// dv/ds = -L v + N with constant N fitted so that v(dt) = v_{n+1}.
struct StepIntegrals {
  double h2 = 0.0;
  double v2 = 0.0;
  double da2 = 0.0;
};

namespace detail {

/// phi_1(z) = (e^z - 1) / z.
inline Complex phi1(Complex z) {
  if (std::abs(z) < 0.5) {
    Complex term = 1.0, sum = 1.0;
    for (int k = 2; k <= 20; ++k) {
      term *= z / static_cast<double>(k);
      sum += term;
    }
    return sum;
  }
  return (std::exp(z) - 1.0) / z;
}

/// Integral over [0, dt] of |a e^{-L s} + (1 - e^{-L s}) / L * n|^2.
inline double interpolant_square_integral(Complex a, Complex n, Complex L, double dt) {
  const Complex x = L * dt;
  if (std::abs(x) <= 0.5) {
    // 10-point Gauss-Legendre; the integrand is entire and slowly varying here.
    static const QuadratureGrid rule = gauss_legendre_grid(10, 1);
    double acc = 0.0;
    for (const auto& node : rule.rings()) {
      const double s = 0.5 * dt * (1.0 + node.mu);
      const Complex v = a * std::exp(-L * s) + s * phi1(-L * s) * n;
      acc += node.weight * std::norm(v);
    }
    return 0.5 * dt * acc;
  }
  // v(s) = A e^{-L s} + B with B = n / L and A = a - B.
  const Complex B = n / L;
  const Complex A = a - B;
  const double r = L.real();
  const double decay2 = r != 0.0 ? -std::expm1(-2.0 * r * dt) / (2.0 * r) : dt;
  const Complex cross = (1.0 - std::exp(-x)) / L;
  return std::norm(A) * decay2 + 2.0 * (A * std::conj(B) * cross).real() + std::norm(B) * dt;
}

}  // namespace detail

/// `rates` holds the diagonal linear operator per (l, m) in triangular order.
inline StepIntegrals step_norm_integrals(const SpectralField& v0, const SpectralField& v1,
                                         const std::vector<Complex>& rates, double dt, Spectrum spectrum) {
  v0.check_compatible(v1);
  StepIntegrals out;
  for (int l = 1; l <= v0.lmax(); ++l) {
    const double lam = geometric_eigenvalue(l);
    const double s = stokes_eigenvalue(l, spectrum);
    double degree = 0.0;
    for (int m = 0; m <= l; ++m) {
      const Complex L = rates[triangular_index(l, m)];
      const Complex a = v0(l, m);
      // constant forcing that maps v0 to v1 in time dt
      const Complex n = (v1(l, m) - std::exp(-L * dt) * a) / (dt * detail::phi1(-L * dt));
      degree += conjugate_multiplicity(m) * detail::interpolant_square_integral(a, n, L, dt);
    }
    out.h2 += lam * degree;
    out.v2 += lam * s * degree;
    out.da2 += lam * s * s * degree;
  }
  return out;
}

/// Running integrals behind the energy identity
///   |v(T)|^2 - |v(0)|^2 + 2 nu int |v|_V^2 - 2 int b(v,v,z) - 2 int (F,v) = 0.
/// The three norm integrals come from step_norm_integrals; the others use
/// the trapezoidal rule on the recorded samples.
class EnergyLedger {
 public:
  struct Running {
    double int_v_v2 = 0.0;
    double int_bvvz = 0.0;
    double int_Fv = 0.0;
  };

  void start(const LedgerSample& s) {
    samples_.assign(1, s);
    running_.assign(1, Running{});
    totals_ = Totals{};
  }

  void add_step(const LedgerSample& next, const StepIntegrals& exact) {
    if (samples_.empty()) throw InternalError("EnergyLedger: add_step before start");
    const LedgerSample& prev = samples_.back();
    const double dt = next.t - prev.t;
    auto trap = [&](double a, double b) { return 0.5 * dt * (a + b); };
    totals_.int_v_h2 += exact.h2;
    totals_.int_v_v2 += exact.v2;
    totals_.int_v_da2 += exact.da2;
    totals_.int_bvvz += trap(prev.bvvz, next.bvvz);
    totals_.int_Fv += trap(prev.Fv, next.Fv);
    totals_.int_F_h2 += trap(prev.F_h2, next.F_h2);
    totals_.int_z_v2 += trap(prev.z_v2, next.z_v2);
    totals_.int_vh2_zv2 += trap(prev.v_h2 * prev.z_v2, next.v_h2 * next.z_v2);
    samples_.push_back(next);
    running_.push_back({totals_.int_v_v2, totals_.int_bvvz, totals_.int_Fv});
  }

  struct Totals {
    double int_v_h2 = 0.0;
    double int_v_v2 = 0.0;
    double int_v_da2 = 0.0;
    double int_bvvz = 0.0;
    double int_Fv = 0.0;
    double int_F_h2 = 0.0;
    double int_z_v2 = 0.0;
    double int_vh2_zv2 = 0.0;  // int |v|^2 |z|_V^2
  };

  const Totals& totals() const { return totals_; }
  const std::vector<LedgerSample>& samples() const { return samples_; }
  const std::vector<Running>& running() const { return running_; }
  bool empty() const { return samples_.empty(); }

  const LedgerSample& first() const { return samples_.front(); }
  const LedgerSample& last() const { return samples_.back(); }

  template <class Get>
  double sup(Get&& get) const {
    double s = 0.0;
    for (const auto& x : samples_) s = std::max(s, get(x));
    return s;
  }

 private:
  std::vector<LedgerSample> samples_;
  std::vector<Running> running_;
  Totals totals_;
};

inline double energy_residual(const EnergyLedger& ledger, double nu) {
  if (ledger.empty()) return 0.0;
  const auto& t = ledger.totals();
  return ledger.last().v_h2 - ledger.first().v_h2 + 2.0 * nu * t.int_v_v2 - 2.0 * t.int_bvvz - 2.0 * t.int_Fv;
}

// ---------------------------------------------------------------------------
// A-priori bounds

struct GronwallReport {
  double eps_h = 0.0;   // Young parameter in the H-level bounds K1, K2
  double eps_v = 0.0;   // Young parameter in the V-level bounds K3, K4
  double c_b = 0.0;     // measured constant of |b(v,v,z)| <= c |v||v|_V|z|_V
  double c_a = 0.0;     // measured constant of the b(., ., Av) estimates
  double C_eps = 0.0;   // 27 c_a^4 / (256 eps_v^3)
  double K1 = 0.0, K2 = 0.0, K3 = 0.0, K4 = 0.0;
  double int_v_v2 = 0.0;   // compared with K1
  double sup_v_h2 = 0.0;   // compared with K2
  double sup_v_v2 = 0.0;   // compared with K3
  double int_Av2 = 0.0;    // compared with K4
  bool k1_ok = true, k2_ok = true, k3_ok = true, k4_ok = true;

  bool all_ok() const { return k1_ok && k2_ok && k3_ok && k4_ok; }
};

/// Evaluates K1..K4 from the recorded run. eps_h = nu; eps_v = nu / 2 keeps
/// the |A v|^2 coefficient 2 nu - 13 eps / 4 positive.
inline GronwallReport gronwall_bound_report(const EnergyLedger& ledger, double nu) {
  GronwallReport r;
  if (ledger.empty()) return r;
  const auto& tot = ledger.totals();
  const auto& first = ledger.first();
  const double T = ledger.last().t - first.t;
  r.eps_h = nu;
  r.eps_v = nu / 2.0;
  r.c_b = ledger.sup([](const LedgerSample& s) { return s.b_ratio; });
  r.c_a = ledger.sup([](const LedgerSample& s) { return s.enstrophy_ratio; });
  r.C_eps = 27.0 * std::pow(r.c_a, 4) / (256.0 * std::pow(r.eps_v, 3));

  const double e = r.eps_h;
  r.K1 = (first.v_h2 + 2.0 * r.c_b * r.c_b / e * tot.int_vh2_zv2 + 2.0 / e * tot.int_F_h2 + e / 2.0 * tot.int_v_h2) /
         (2.0 * nu - e / 2.0);
  r.K2 = (2.0 * nu - e / 2.0) * r.K1;

  const double C1 = ledger.sup([](const LedgerSample& s) { return s.z_v2; });
  const double C2 = ledger.sup([](const LedgerSample& s) { return s.z_h2; });
  const double ev = r.eps_v;
  const double exponent = r.C_eps * (r.K2 * r.K1 + r.K2 * tot.int_z_v2 + C2 * tot.int_z_v2);
  r.K3 = (first.v_v2 + tot.int_F_h2 / nu) * std::exp(exponent);
  r.K4 = (first.v_v2 + r.C_eps * T * (r.K2 * r.K3 * r.K3 + r.K2 * r.K3 * C1 + C2 * C1 * r.K3) + tot.int_F_h2 / ev) /
         (2.0 * nu - 3.25 * ev);

  r.int_v_v2 = tot.int_v_v2;
  r.sup_v_h2 = ledger.sup([](const LedgerSample& s) { return s.v_h2; });
  r.sup_v_v2 = ledger.sup([](const LedgerSample& s) { return s.v_v2; });
  r.int_Av2 = tot.int_v_da2;
  // A relative slack of 1e-12 absorbs round-off when a bound is attained.
  auto below = [](double x, double bound) { return x <= bound * (1.0 + 1e-12) + 1e-300; };
  r.k1_ok = below(r.int_v_v2, r.K1);
  r.k2_ok = below(r.sup_v_h2, r.K2);
  r.k3_ok = below(r.sup_v_v2, r.K3);
  r.k4_ok = below(r.int_Av2, r.K4);
  return r;
}

}  // namespace snse
