#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "snse/diagnostics.hpp"
#include "snse/error.hpp"
#include "snse/noise.hpp"
#include "snse/operators.hpp"
#include "snse/ou.hpp"
#include "snse/spectral_field.hpp"

namespace snse {

enum class Scheme { imex_euler, imex_heun, picard };

inline std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::imex_euler: return "imex_euler";
    case Scheme::imex_heun: return "imex_heun";
    case Scheme::picard: return "picard";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  if (name == "imex_euler") return Scheme::imex_euler;
  if (name == "imex_heun") return Scheme::imex_heun;
  if (name == "picard") return Scheme::picard;
  throw DomainError("unknown scheme '" + std::string(name) + "'");
}

struct SolverConfig {
  int lmax = 8;
  double dt = 0.01;
  double t_end = 1.0;
  double nu = 1.0;
  double omega = 0.0;
  double alpha = 0.0;
  Scheme scheme = Scheme::imex_euler;
  double picard_tol = 1e-10;
  int picard_max_iter = 50;
  SpectralField f;   // constant forcing; empty means zero
  SpectralField v0;  // empty means zero
  Spectrum spectrum = Spectrum::paper;
  bool dealias = true;
  int n_lat = 0;
  int n_lon = 0;
  bool include_coriolis_in_ou = true;
  bool freeze_nonlinear = false;  // drop B everywhere (linear problem)
  bool track_enstrophy_constants = true;  // measure the b(., ., Av) constants each step
  int workers = 1;

  long n_steps() const { return std::lround(t_end / dt); }

  void validate() const {
    if (lmax < 1) throw DomainError("solver: lmax must be >= 1");
    if (!(dt > 0.0)) throw DomainError("solver: dt must be positive");
    if (!(t_end >= dt)) throw DomainError("solver: t_end must be >= dt");
    if (std::abs(static_cast<double>(n_steps()) * dt - t_end) > 1e-9 * t_end)
      throw DomainError("solver: t_end must be an integer multiple of dt");
    if (!(nu > 0.0)) throw DomainError("solver: nu must be positive");
    if (!(alpha >= 0.0)) throw DomainError("solver: alpha must be >= 0");
    if (!(picard_tol > 0.0)) throw DomainError("solver: picard_tol must be positive");
    if (picard_max_iter < 1) throw DomainError("solver: picard_max_iter must be >= 1");
    for (const SpectralField* g : {&f, &v0})
      if (g->lmax() > 0 && (g->kind() != FieldKind::stream || g->lmax() != lmax))
        throw DomainError("solver: f and v0 must be stream fields at lmax");
  }
};

struct SimState {
  double t = 0.0;
  long step = 0;
  SpectralField v;
  OUState ou;
  EnergyLedger ledger;
};

/// u = v + z.
inline SpectralField recombine(const SimState& s) { return s.v + s.ou.z; }

/// F = -B(z) + alpha z + f.
inline SpectralField effective_force(const SpectralField& z, const SpectralField& f, double alpha,
                                     const OperatorContext& ctx) {
  z.check_compatible(f);
  SpectralField out = f;
  out += alpha * z;
  out -= nonlinear_B(z, ctx);
  return out;
}

struct PicardInfo {
  int iterations = 0;
  std::vector<double> diffs;  // |v^{k} - v^{k-1}|_V per application of the map
};

namespace detail {

/// phi_2(z) = (e^z - 1 - z) / z^2.
inline Complex phi2(Complex z) {
  if (std::abs(z) < 0.5) {
    Complex term = 0.5, sum = 0.5;
    for (int k = 3; k <= 22; ++k) {
      term *= z / static_cast<double>(k);
      sum += term;
    }
    return sum;
  }
  return (std::exp(z) - 1.0 - z) / (z * z);
}

}  // namespace detail

/// Time integrator for dv/dt + (nu A + C) v = N(v, z), N = -B(v + z) + alpha z + f,
/// coupled to the OU process z. The linear part is integrated exactly per mode:
///   imex_euler  v+ = E v + dt phi1 N(v, z)
///   imex_heun   a  = E v + dt phi1 N(v, z);  v+ = a + dt phi2 (N(a, z+) - N(v, z))
///   picard      v+ = E v + dt ((phi1 - phi2) N(v, z) + phi2 N(v+, z+)), by fixed-point iteration
/// with E = exp(-L dt), phi_k = phi_k(-L dt), L = nu lambda_l + C_{l,m}.
class Solver {
 public:
  Solver(SolverConfig cfg, NoiseSpec noise, std::uint64_t path = 0)
      : cfg_(std::move(cfg)),
        noise_(std::move(noise)),
        path_(path),
        ctx_(cfg_.lmax, cfg_.nu, cfg_.omega,
             {.dealias = cfg_.dealias, .spectrum = cfg_.spectrum, .n_lat = cfg_.n_lat, .n_lon = cfg_.n_lon,
              .workers = cfg_.workers}) {
    cfg_.validate();
    noise_.validate();
    if (cfg_.f.lmax() == 0) cfg_.f = SpectralField::stream(cfg_.lmax);
    if (cfg_.v0.lmax() == 0) cfg_.v0 = SpectralField::stream(cfg_.lmax);
    const auto n = triangular_size(cfg_.lmax);
    rates_.assign(n, Complex{});
    decay_.assign(n, Complex{});
    phi1_.assign(n, Complex{});
    phi2_.assign(n, Complex{});
    for (int l = 1; l <= cfg_.lmax; ++l)
      for (int m = 0; m <= l; ++m) {
        const auto i = triangular_index(l, m);
        rates_[i] = cfg_.nu * stokes_eigenvalue(l, cfg_.spectrum) + coriolis_multiplier(l, m, cfg_.omega);
        const Complex x = -rates_[i] * cfg_.dt;
        decay_[i] = std::exp(x);
        phi1_[i] = detail::phi1(x);
        phi2_[i] = detail::phi2(x);
      }
  }

  const SolverConfig& config() const { return cfg_; }
  const NoiseSpec& noise() const { return noise_; }
  const OperatorContext& context() const { return ctx_; }
  const std::vector<Complex>& rates() const { return rates_; }
  bool stochastic() const { return !noise_.sigma.is_zero(); }

  OUParams ou_params() const {
    return {cfg_.nu, cfg_.omega, cfg_.alpha, cfg_.spectrum, cfg_.include_coriolis_in_ou};
  }

  SimState initial_state() const {
    SimState s;
    s.v = cfg_.v0;
    if (stochastic()) {
      s.ou = make_ou_state(cfg_.lmax, ou_params(), noise_, path_);
    } else {
      s.ou.z = SpectralField::stream(cfg_.lmax);
      s.ou.alpha = cfg_.alpha;
      s.ou.rng = CounterRng(noise_.seed, path_);
    }
    if (!s.v.all_finite()) throw DomainError("solver: initial data is not finite");
    s.ledger.start(sample(0.0, s.v, s.ou.z));
    return s;
  }

  SpectralField B(const SpectralField& u) const {
    if (cfg_.freeze_nonlinear) return SpectralField::stream(cfg_.lmax);
    return nonlinear_B(u, ctx_);
  }

  /// N(v, z) = -B(v + z) + alpha z + f.
  SpectralField nonlinear(const SpectralField& v, const SpectralField& z) const {
    SpectralField out = cfg_.f;
    out += cfg_.alpha * z;
    out -= B(v + z);
    return out;
  }

  SpectralField force(const SpectralField& z) const {
    if (cfg_.freeze_nonlinear) return cfg_.f + cfg_.alpha * z;
    return effective_force(z, cfg_.f, cfg_.alpha, ctx_);
  }

  LedgerSample sample(double t, const SpectralField& v, const SpectralField& z) const {
    const Spectrum sp = cfg_.spectrum;
    LedgerSample s;
    s.t = t;
    s.v_h2 = norm_h2(v);
    s.v_v2 = norm_v2(v, sp);
    s.v_da2 = norm_da2(v, sp);
    s.z_h2 = norm_h2(z);
    s.z_v2 = norm_v2(z, sp);
    const SpectralField Bv = B(v);
    s.bvvz = h_inner(Bv, z);
    const SpectralField F = force(z);
    s.Fv = h_inner(F, v);
    s.F_h2 = norm_h2(F);

    const double vh = std::sqrt(s.v_h2), vv = std::sqrt(s.v_v2), va = std::sqrt(s.v_da2);
    const double zh = std::sqrt(s.z_h2), zv = std::sqrt(s.z_v2);
    auto ratio = [](double lhs, double rhs) { return rhs > 0.0 ? std::abs(lhs) / rhs : 0.0; };
    s.b_ratio = ratio(s.bvvz, vh * vv * zv);
    if (cfg_.track_enstrophy_constants && !cfg_.freeze_nonlinear && va > 0.0) {
      const SpectralField Av = stokes_apply(v, 1.0, sp);
      const double r1 = ratio(h_inner(Bv, Av), std::sqrt(vh) * vv * std::pow(va, 1.5));
      double r2 = 0.0, r3 = 0.0;
      if (zv > 0.0) {
        r2 = ratio(trilinear_b(v, z, Av, ctx_), std::sqrt(vh * vv * zv) * std::pow(va, 1.5));
        r3 = ratio(trilinear_b(z, v, Av, ctx_), std::sqrt(zh * zv * vv) * std::pow(va, 1.5));
      }
      s.enstrophy_ratio = std::max({r1, r2, r3});
    }
    return s;
  }

  /// Advances z over one step; with zero noise z stays zero.
  void advance_noise(OUState& ou) const {
    if (stochastic())
      ou_advance(ou, cfg_.dt, noise_, cfg_.workers);
    else
      ou.t += cfg_.dt;
  }

  /// One step of the configured scheme, including the ledger update.
  void step(SimState& s, PicardInfo* info = nullptr) const {
    const SpectralField v_prev = s.v;
    const SpectralField z_prev = s.ou.z;
    const SpectralField N0 = nonlinear(v_prev, z_prev);
    advance_noise(s.ou);
    const SpectralField& z_next = s.ou.z;

    SpectralField predictor = linear_combo(v_prev, N0, phi1_);
    switch (cfg_.scheme) {
      case Scheme::imex_euler: s.v = std::move(predictor); break;
      case Scheme::imex_heun: {
        SpectralField diff = nonlinear(predictor, z_next);
        diff -= N0;
        s.v = std::move(predictor);
        add_weighted(s.v, diff, phi2_);
        break;
      }
      case Scheme::picard: s.v = picard_solve(v_prev, N0, z_next, std::move(predictor), s.t, info); break;
    }
    s.t = static_cast<double>(s.step + 1) * cfg_.dt;
    s.ou.t = s.t;
    ++s.step;
    if (!s.v.all_finite() || !s.ou.z.all_finite()) throw BlowUpError("non-finite coefficients", s.t);
    const LedgerSample next = sample(s.t, s.v, s.ou.z);
    if (!std::isfinite(next.v_v2) || !std::isfinite(next.bvvz) || !std::isfinite(next.Fv))
      throw BlowUpError("non-finite ledger terms", s.t);
    s.ledger.add_step(next, step_norm_integrals(v_prev, s.v, rates_, cfg_.dt, cfg_.spectrum));
  }

 private:
  /// E v + dt w(l,m) N.
  SpectralField linear_combo(const SpectralField& v, const SpectralField& N, const std::vector<Complex>& w) const {
    SpectralField out = SpectralField::stream(cfg_.lmax);
    for (int l = 1; l <= cfg_.lmax; ++l)
      for (int m = 0; m <= l; ++m) {
        const auto i = triangular_index(l, m);
        out(l, m) = decay_[i] * v(l, m) + cfg_.dt * w[i] * N(l, m);
      }
    return out;
  }

  void add_weighted(SpectralField& out, const SpectralField& N, const std::vector<Complex>& w) const {
    for (int l = 1; l <= cfg_.lmax; ++l)
      for (int m = 0; m <= l; ++m) out(l, m) += cfg_.dt * w[triangular_index(l, m)] * N(l, m);
  }

  SpectralField picard_solve(const SpectralField& v_prev, const SpectralField& N0, const SpectralField& z_next,
                             SpectralField guess, double t, PicardInfo* info) const {
    std::vector<Complex> w0(phi1_.size());
    for (std::size_t i = 0; i < w0.size(); ++i) w0[i] = phi1_[i] - phi2_[i];
    const SpectralField base = linear_combo(v_prev, N0, w0);
    PicardInfo local;
    for (int k = 1;; ++k) {
      SpectralField next = base;
      add_weighted(next, nonlinear(guess, z_next), phi2_);
      const double d = std::sqrt(norm_v2(next - guess, cfg_.spectrum));
      local.diffs.push_back(d);
      guess = std::move(next);
      if (!std::isfinite(d)) throw BlowUpError("Picard iterate not finite", t + cfg_.dt);
      if (d < cfg_.picard_tol) {
        local.iterations = std::max(1, k - 1);
        break;
      }
      if (k > cfg_.picard_max_iter)
        throw ContractionError("Picard iteration did not contract within " + std::to_string(cfg_.picard_max_iter) +
                               " iterations at t=" + std::to_string(t) + "; try a smaller dt");
    }
    if (info) *info = std::move(local);
    return guess;
  }

  SolverConfig cfg_;
  NoiseSpec noise_;
  std::uint64_t path_;
  OperatorContext ctx_;
  std::vector<Complex> rates_, decay_, phi1_, phi2_;
};

inline SimState step_imex(SimState s, const Solver& solver) {
  if (solver.config().scheme == Scheme::picard) throw DomainError("step_imex: solver is configured for picard");
  solver.step(s);
  return s;
}

inline SimState step_picard(SimState s, const Solver& solver, PicardInfo* info = nullptr) {
  if (solver.config().scheme != Scheme::picard) throw DomainError("step_picard: solver is not configured for picard");
  solver.step(s, info);
  return s;
}

/// One row of diagnostics.csv.
struct DiagnosticRow {
  double t = 0.0;
  double norm_H = 0.0;
  double norm_V = 0.0;
  double norm_DA = 0.0;
  double norm_L4_u = 0.0;
  double int_V2 = 0.0;
  double int_bvvz = 0.0;
  double int_Fv = 0.0;
};

struct Trajectory {
  std::vector<DiagnosticRow> rows;
  SimState final;
  int picard_max_iterations = 0;
  long picard_total_iterations = 0;
};

struct RunOptions {
  long snapshot_every = 0;  // steps; 0 disables
  std::function<void(const SimState&)> on_snapshot;
  std::function<void(const SimState&, const PicardInfo&)> on_picard;
  std::function<void(const SimState&)> on_step;  // after every accepted step
};

inline DiagnosticRow diagnostic_row(const SimState& s, const Solver& solver) {
  const auto& sample = s.ledger.last();
  const auto& running = s.ledger.running().back();
  return {s.t,
          std::sqrt(sample.v_h2),
          std::sqrt(sample.v_v2),
          std::sqrt(sample.v_da2),
          l4_norm(recombine(s), solver.context()),
          running.int_v_v2,
          running.int_bvvz,
          running.int_Fv};
}

/// Integrates to t_end. On blow-up the last good state is handed to the
/// snapshot callback before the error propagates.
inline Trajectory run(const Solver& solver, const RunOptions& options = {}) {
  Trajectory traj;
  SimState state = solver.initial_state();
  traj.rows.push_back(diagnostic_row(state, solver));
  const long n = solver.config().n_steps();
  const bool snapshots = options.snapshot_every > 0 && options.on_snapshot;
  if (snapshots) options.on_snapshot(state);
  for (long k = 0; k < n; ++k) {
    SimState next = state;
    PicardInfo info;
    try {
      solver.step(next, &info);
    } catch (const BlowUpError&) {
      if (options.on_snapshot) options.on_snapshot(state);
      throw;
    }
    if (solver.config().scheme == Scheme::picard) {
      traj.picard_max_iterations = std::max(traj.picard_max_iterations, info.iterations);
      traj.picard_total_iterations += info.iterations;
      if (options.on_picard) options.on_picard(next, info);
    }
    state = std::move(next);
    traj.rows.push_back(diagnostic_row(state, solver));
    if (options.on_step) options.on_step(state);
    if (snapshots && state.step % options.snapshot_every == 0) options.on_snapshot(state);
  }
  traj.final = std::move(state);
  return traj;
}

inline Trajectory run(const SolverConfig& cfg, NoiseSpec spec, std::uint64_t seed, const RunOptions& options = {}) {
  spec.seed = seed;
  return run(Solver(cfg, spec), options);
}

}  // namespace snse
