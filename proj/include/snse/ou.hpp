#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include "snse/error.hpp"
#include "snse/noise.hpp"
#include "snse/operators.hpp"
#include "snse/parallel.hpp"
#include "snse/spectral_field.hpp"

namespace snse {

struct OUParams {
  double nu = 1.0;
  double omega = 0.0;
  double alpha = 0.0;
  Spectrum spectrum = Spectrum::paper;
  bool include_coriolis = true;
};

/// Stochastic convolution z solving dz + (nu A + C + alpha) z dt = G dL.
struct OUState {
  double t = 0.0;
  SpectralField z;
  double alpha = 0.0;
  std::vector<Complex> kappa;  // decay rate per (l, m), triangular index
  double clock = 0.0;          // subordinator X(t)
  std::uint64_t noise_index = 0;  // fine noise increments consumed so far
  CounterRng rng;

  Complex kappa_at(int l, int m) const { return kappa[triangular_index(l, m)]; }
};

/// kappa_{l,m} = nu lambda_l + alpha - 2 i Omega m / l(l+1) (Coriolis term optional).
inline std::vector<Complex> ou_decay_rates(int lmax, const OUParams& p) {
  std::vector<Complex> kappa(triangular_size(lmax), Complex{});
  for (int l = 1; l <= lmax; ++l)
    for (int m = 0; m <= l; ++m) {
      Complex k = p.nu * stokes_eigenvalue(l, p.spectrum) + p.alpha;
      if (p.include_coriolis) k += coriolis_multiplier(l, m, p.omega);
      if (!(k.real() > 0.0))
        throw DomainError("OU decay rate must be positive for every mode (use alpha > 0 with the ricci_shifted spectrum)");
      kappa[triangular_index(l, m)] = k;
    }
  return kappa;
}

/// Fresh state at t = 0 for Monte-Carlo path `path` of the noise seed.
inline OUState make_ou_state(int lmax, const OUParams& params, const NoiseSpec& spec, std::uint64_t path = 0) {
  if (!(params.alpha >= 0.0)) throw DomainError("OU shift alpha must be >= 0");
  spec.validate();
  OUState s;
  s.z = SpectralField::stream(lmax);
  s.alpha = params.alpha;
  s.kappa = ou_decay_rates(lmax, params);
  s.rng = CounterRng(spec.seed, path);
  return s;
}

/// Advances z by dt: exact decay plus the left-endpoint sum of n_substeps
/// noise increments, each weighted by exp(-kappa (dt - s_j)).
inline void ou_advance(OUState& s, double dt, const NoiseSpec& spec, int workers = 1) {
  if (!(dt > 0.0)) throw DomainError("ou_step: dt must be positive");
  spec.validate();
  const int lmax = s.z.lmax();
  const int n = spec.n_substeps;
  const double sub = dt / n;
  const double fine = spec.noise_dt > 0.0 ? spec.noise_dt : sub;
  const auto per_sub = static_cast<std::uint64_t>(std::llround(sub / fine));
  if (per_sub < 1 || std::abs(static_cast<double>(per_sub) * fine - sub) > 1e-9 * sub)
    throw DomainError("ou_step: sub-step dt/n_substeps must be a multiple of noise_dt");

  SpectralField next = s.z;
  for (int l = 1; l <= lmax; ++l)
    for (int m = 0; m <= l; ++m) next(l, m) *= std::exp(-s.kappa_at(l, m) * dt);

  if (!spec.sigma.is_zero()) {
    for (int j = 0; j < n; ++j) {
      const auto block = levy_increment_block(spec, lmax, fine, s.rng, s.noise_index + static_cast<std::uint64_t>(j) * per_sub,
                                              per_sub, workers);
      s.clock += block.dX;
      const double lag = dt - j * sub;
      for (int l = 1; l <= lmax; ++l) {
        const double sigma = spec.sigma(l);
        if (sigma == 0.0) continue;
        for (int m = 0; m <= l; ++m)
          next(l, m) += std::exp(-s.kappa_at(l, m) * lag) * from_real_coordinates(sigma * block(l, m), l, m);
      }
    }
  } else {
    for (int j = 0; j < n; ++j)
      for (std::uint64_t k = 0; k < per_sub; ++k)
        s.clock += sample_positive_stable(spec.beta / 2.0, fine, s.rng, s.noise_index + j * per_sub + k);
  }
  s.noise_index += static_cast<std::uint64_t>(n) * per_sub;
  s.z = std::move(next);
  s.t += dt;
}

inline OUState ou_step(OUState s, double dt, const NoiseSpec& spec, int workers = 1) {
  ou_advance(s, dt, spec, workers);
  return s;
}

/// The moment-bound scale expression
///   ( sum over real modes |sigma_l|^beta (1 - exp(-beta r_l t)) / (beta r_l) )^{p/beta},
/// r_l = nu lambda_l + alpha, truncated at lmax. `bound()` multiplies by the
/// single-mode constant c_p, which makes it exact for one real mode.
struct ZlpBound {
  double expression = 0.0;
  double scale_sum = 0.0;  // the inner sum before the power p/beta
  double tail_sum = 0.0;   // upper bound for the inner-sum terms above lmax
  double c_p = 0.0;
  double bound() const { return c_p * expression; }
};

inline ZlpBound zlp_bound(double t, double p, const NoiseSpec& spec, double alpha, int lmax, double nu = 1.0,
                          Spectrum spectrum = Spectrum::paper) {
  const double beta = spec.beta;
  if (!(p > 0.0) || (beta < 2.0 && !(p < beta))) throw DomainError("zlp_bound: 0 < p < beta required");
  if (!(t >= 0.0)) throw DomainError("zlp_bound: t must be >= 0");
  auto term = [&](long l) {
    const double sigma = spec.sigma(static_cast<int>(l));
    if (sigma == 0.0) return 0.0;
    const double r = nu * stokes_eigenvalue(static_cast<int>(l), spectrum) + alpha;
    const double window = r > 0.0 ? -std::expm1(-beta * r * t) / (beta * r) : t;
    return static_cast<double>(2 * l + 1) * std::pow(std::abs(sigma), beta) * window;
  };
  ZlpBound out;
  out.c_p = stable_moment_constant(beta, p);
  for (long l = 1; l <= lmax; ++l) out.scale_sum += term(l);
  out.expression = std::pow(out.scale_sum, p / beta);

  const long support = spec.sigma.support_end();
  const long direct_end = support >= 0 ? support : 100000;
  for (long l = direct_end; l > lmax; --l) out.tail_sum += term(l);
  if (support < 0 && t > 0.0) {
    // term_l <= 3 l s^beta l^{-gamma beta} / (beta nu l^2) beyond the direct range
    const double gamma = spec.sigma.kind() == SigmaRule::Kind::power ? spec.sigma.gamma() : 0.0;
    const double e = gamma * beta;
    out.tail_sum += e > 0.0 ? 3.0 * std::pow(std::abs(spec.sigma.scale()), beta) / (beta * nu) *
                                  std::pow(static_cast<double>(direct_end), -e) / e
                            : std::numeric_limits<double>::infinity();
  }
  return out;
}

/// Per-path observations of |A^delta z_t|_H at the recording times.
struct OUPathRecord {
  std::vector<double> norm;      // at each recording time
  std::vector<double> sup_norm;  // running sup over step times up to it
};

/// Simulates n_paths OU paths from z = 0 with step dt and records
/// |A^delta z| at each time in t_list (multiples of dt).
inline std::vector<OUPathRecord> ou_sample_paths(const NoiseSpec& spec, const OUParams& params, int lmax, double dt,
                                                 std::vector<double> t_list, int n_paths, double delta = 0.0,
                                                 int workers = 1) {
  if (n_paths < 1) throw DomainError("ou_sample_paths: n_paths must be >= 1");
  std::sort(t_list.begin(), t_list.end());
  std::vector<long> record_step;
  for (double t : t_list) {
    const long k = std::lround(t / dt);
    if (k < 1 || std::abs(static_cast<double>(k) * dt - t) > 1e-9 * t)
      throw DomainError("ou_sample_paths: recording times must be positive multiples of dt");
    record_step.push_back(k);
  }
  auto weighted_norm = [&](const SpectralField& z) {
    return std::sqrt(weighted_mode_sum(z, z, [&](int l) {
      const double lam = geometric_eigenvalue(l);
      return lam * std::pow(stokes_eigenvalue(l, params.spectrum), 2.0 * delta);
    }));
  };

  std::vector<OUPathRecord> out(static_cast<std::size_t>(n_paths));
  parallel_for(out.size(), workers, [&](std::size_t path) {
    OUState s = make_ou_state(lmax, params, spec, path);
    OUPathRecord rec;
    double sup = 0.0;
    std::size_t next = 0;
    for (long step = 1; next < record_step.size(); ++step) {
      ou_advance(s, dt, spec);
      const double v = weighted_norm(s.z);
      sup = std::max(sup, v);
      while (next < record_step.size() && record_step[next] == step) {
        rec.norm.push_back(v);
        rec.sup_norm.push_back(sup);
        ++next;
      }
    }
    out[path] = std::move(rec);
  });
  return out;
}

struct OUMomentCheck {
  double t = 0.0;
  double empirical = 0.0;  // Monte-Carlo E|z_t|^p
  double median = 0.0;     // median of |z_t|^p
  double expression = 0.0;
  double c_p = 0.0;
  double bound = 0.0;      // c_p * expression
  double ratio = 0.0;      // empirical / bound
};

/// Monte-Carlo E|z_t|_H^p against c_p times the scale expression.
inline std::vector<OUMomentCheck> ou_moment_check(const NoiseSpec& spec, const OUParams& params, int lmax, double p,
                                                  const std::vector<double>& t_list, int n_paths, double dt,
                                                  int workers = 1) {
  if (!(p > 0.0) || (spec.beta < 2.0 && !(p < spec.beta))) throw DomainError("ou_moment_check: 0 < p < beta required");
  const auto paths = ou_sample_paths(spec, params, lmax, dt, t_list, n_paths, 0.0, workers);
  std::vector<double> times = t_list;
  std::sort(times.begin(), times.end());
  std::vector<OUMomentCheck> out;
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> v;
    v.reserve(paths.size());
    for (const auto& rec : paths) v.push_back(std::pow(rec.norm[k], p));
    OUMomentCheck c;
    c.t = times[k];
    for (double x : v) c.empirical += x;
    c.empirical /= static_cast<double>(v.size());
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    c.median = *mid;
    const auto zb = zlp_bound(c.t, p, spec, params.alpha, lmax, params.nu, params.spectrum);
    c.expression = zb.expression;
    c.c_p = zb.c_p;
    c.bound = zb.bound();
    c.ratio = c.bound > 0.0 ? c.empirical / c.bound : (c.empirical == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    out.push_back(c);
  }
  return out;
}

struct SupGrowth {
  std::vector<double> T;
  std::vector<double> estimate;  // E sup_{t <= T} |A^delta z_t|^p
  double slope = 0.0;            // log-log slope; 0 when every estimate is 0
};

inline SupGrowth sup_norm_growth(const NoiseSpec& spec, const OUParams& params, int lmax, double delta, double p,
                                 const std::vector<double>& T_list, int n_paths, double dt, int workers = 1) {
  if (!(p > 0.0) || (spec.beta < 2.0 && !(p < spec.beta))) throw DomainError("sup_norm_growth: 0 < p < beta required");
  const auto paths = ou_sample_paths(spec, params, lmax, dt, T_list, n_paths, delta, workers);
  SupGrowth g;
  g.T = T_list;
  std::sort(g.T.begin(), g.T.end());
  for (std::size_t k = 0; k < g.T.size(); ++k) {
    double mean = 0.0;
    for (const auto& rec : paths) mean += std::pow(rec.sup_norm[k], p);
    g.estimate.push_back(mean / static_cast<double>(paths.size()));
  }
  const bool all_positive = std::all_of(g.estimate.begin(), g.estimate.end(), [](double v) { return v > 0.0; });
  if (all_positive && g.T.size() >= 2) g.slope = log_log_slope(g.T, g.estimate);
  return g;
}

}  // namespace snse
