#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "snse/config.hpp"
#include "snse/diagnostics.hpp"
#include "snse/error.hpp"
#include "snse/noise.hpp"
#include "snse/ou.hpp"
#include "snse/parallel.hpp"
#include "snse/snapshot.hpp"
#include "snse/solver.hpp"

namespace snse {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int verification_failed = 1;
inline constexpr int usage = 2;    // bad config or arguments
inline constexpr int runtime = 3;  // blow-up, contraction failure, I/O
}  // namespace exit_code

inline std::string format_number(double x, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

/// Named pass/fail checks with the measured value and the limit it was held to.
class VerifyReport {
 public:
  struct Check {
    std::string name;
    double value = 0.0;
    std::string relation;
    double limit = 0.0;
    bool pass = false;
  };

  void le(std::string name, double value, double limit) {
    checks_.push_back({std::move(name), value, "<=", limit, value <= limit});
  }
  void ge(std::string name, double value, double limit) {
    checks_.push_back({std::move(name), value, ">=", limit, value >= limit});
  }
  void note(std::string text) { notes_.push_back(std::move(text)); }
  void append(const VerifyReport& other, const std::string& prefix) {
    for (auto c : other.checks_) {
      c.name = prefix + c.name;
      checks_.push_back(std::move(c));
    }
    for (const auto& n : other.notes_) notes_.push_back(prefix + n);
  }

  bool passed() const {
    return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.pass; });
  }
  const std::vector<Check>& checks() const { return checks_; }
  const std::vector<std::string>& notes() const { return notes_; }
  const Check& at(const std::string& name) const {
    for (const auto& c : checks_)
      if (c.name == name) return c;
    throw DomainError("VerifyReport: no check named '" + name + "'");
  }

  void write(std::ostream& os) const {
    for (const auto& c : checks_) {
      char line[256];
      std::snprintf(line, sizeof line, "%-34s %14.6e %s %-14.6e %s\n", c.name.c_str(), c.value, c.relation.c_str(),
                    c.limit, c.pass ? "PASS" : "FAIL");
      os << line;
    }
    for (const auto& n : notes_) os << "# " << n << '\n';
    os << (passed() ? "verification: PASS\n" : "verification: FAIL\n");
  }

 private:
  std::vector<Check> checks_;
  std::vector<std::string> notes_;
};

inline void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticRow>& rows) {
  os << "t,norm_H,norm_V,norm_DA,norm_L4_u,int_V2,int_bvvz,int_Fv\n";
  for (const auto& r : rows)
    os << format_number(r.t) << ',' << format_number(r.norm_H) << ',' << format_number(r.norm_V) << ','
       << format_number(r.norm_DA) << ',' << format_number(r.norm_L4_u) << ',' << format_number(r.int_V2) << ','
       << format_number(r.int_bvvz) << ',' << format_number(r.int_Fv) << '\n';
}

namespace detail {

inline double max_abs_diff(const SpectralField& a, const SpectralField& b) {
  const auto x = a.coeffs();
  const auto y = b.coeffs();
  if (x.size() != y.size()) throw InternalError("max_abs_diff: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  return worst;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline void write_config_echo(std::ostream& os, const ExperimentConfig& cfg) {
  const auto& s = cfg.solver;
  const auto& n = cfg.noise;
  os << "mode " << mode_name(cfg.mode) << '\n'
     << "seed " << cfg.seed << '\n'
     << "lmax " << s.lmax << '\n'
     << "dt " << format_number(s.dt) << '\n'
     << "t_end " << format_number(s.t_end) << '\n'
     << "nu " << format_number(s.nu) << '\n'
     << "omega " << format_number(s.omega) << '\n'
     << "alpha " << format_number(s.alpha) << '\n'
     << "scheme " << scheme_name(s.scheme) << '\n'
     << "spectrum " << (s.spectrum == Spectrum::paper ? "paper" : "ricci_shifted") << '\n'
     << "beta " << format_number(n.beta) << '\n'
     << "sigma " << n.sigma.to_string() << '\n'
     << "delta " << format_number(n.delta) << '\n'
     << "n_substeps " << n.n_substeps << '\n'
     << "noise_dt " << format_number(n.noise_dt) << '\n'
     << "v0 " << cfg.v0 << '\n'
     << "f " << cfg.f << '\n';
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operator and basis suite.

struct OperatorSuiteOptions {
  int lmax = 15;
  int n_fields = 100;
  std::uint64_t seed = 0;
  double omega = 1.0;  // 0 is replaced by 1 so the Coriolis checks are not vacuous
  Spectrum spectrum = Spectrum::paper;
  int workers = 1;
  int oracle_lmax = 5;    // B against trilinear_b for every test mode up to this degree
  int oracle_fields = 3;
};

namespace detail {

inline OperatorContext suite_context(const OperatorSuiteOptions& o) {
  return OperatorContext(o.lmax, 1.0, o.omega != 0.0 ? o.omega : 1.0, {.spectrum = o.spectrum, .workers = o.workers});
}

inline std::vector<SpectralField> suite_fields(const OperatorSuiteOptions& o) {
  if (o.n_fields < 3) throw DomainError("operator suite: need at least 3 fields");
  std::vector<SpectralField> fields;
  for (int i = 0; i < o.n_fields; ++i)
    fields.push_back(random_stream_field(o.lmax, o.seed, static_cast<std::uint64_t>(i)));
  return fields;
}

}  // namespace detail

/// Antisymmetry of b, skewness of C against 1 and A, and the Poincare inequality
/// on random fields.
inline VerifyReport verify_identities(const OperatorSuiteOptions& o) {
  const auto ctx = detail::suite_context(o);
  const auto fields = detail::suite_fields(o);
  const std::size_t n = fields.size();
  double b_vww = 0.0, b_swap = 0.0, c_uu = 0.0, c_uau = 0.0, poincare = 0.0;
  const double lambda1 = stokes_eigenvalue(1, o.spectrum);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = fields[i];
    const auto& w = fields[(i + 1) % n];
    const auto& z = fields[(i + 2) % n];
    b_vww = std::max(b_vww, std::abs(trilinear_b(v, w, w, ctx)));
    b_swap = std::max(b_swap, std::abs(trilinear_b(v, z, w, ctx) + trilinear_b(v, w, z, ctx)));

    const auto cu = coriolis_apply(v, ctx, CoriolisPath::grid);
    c_uu = std::max(c_uu, std::abs(h_inner(cu, v)));
    c_uau = std::max(c_uau, std::abs(h_inner(cu, stokes_apply(v, 1.0, o.spectrum))));

    const double v2 = norm_v2(v, o.spectrum);
    if (v2 > 0.0) poincare = std::max(poincare, lambda1 * norm_h2(v) / v2);
  }
  VerifyReport r;
  r.le("b(v,w,w)", b_vww, 1e-9);
  r.le("b(v,z,w)+b(v,w,z)", b_swap, 1e-9);
  r.le("(Cu,u)", c_uu, 1e-10);
  r.le("(Cu,Au)", c_uau, 1e-10);
  r.le("poincare_ratio", poincare, 1.0 + 1e-12);
  r.note("lmax " + std::to_string(o.lmax) + ", " + std::to_string(n) + " unit-norm random fields, Omega " +
         format_number(ctx.omega(), "%g"));
  return r;
}

/// Eigenpairs of A through the grid, unit norms of the basis, transform round trips.
inline VerifyReport verify_basis(const OperatorSuiteOptions& o) {
  const auto ctx = detail::suite_context(o);
  const auto& tr = ctx.transform();
  double vec_rt = 0.0, sca_rt = 0.0;
  for (const auto& v : detail::suite_fields(o)) {
    vec_rt = std::max(vec_rt, detail::max_abs_diff(tr.vector_analysis(tr.vector_synthesis(v)), v));
    const auto zeta = curl_scalar(v);
    sca_rt = std::max(sca_rt, detail::max_abs_diff(tr.scalar_analysis(tr.scalar_synthesis(zeta)), zeta));
  }
  // A Z taken through the grid: curl of the synthesized velocity, minus twice
  // the Ricci term for the shifted spectrum.
  double eigen = 0.0, unit = 0.0;
  for (int l = 1; l <= o.lmax; ++l)
    for (int m = -l; m <= l; ++m) {
      const auto Z = unit_mode(o.lmax, l, m);
      const auto u = tr.vector_synthesis(Z);
      const auto curl = tr.curl_analysis(u);
      SpectralField AZ = SpectralField::stream(o.lmax);
      for (int l2 = 1; l2 <= o.lmax; ++l2)
        for (int m2 = 0; m2 <= l2; ++m2) AZ(l2, m2) = curl(l2, m2);
      if (o.spectrum == Spectrum::ricci_shifted) AZ -= 2.0 * tr.vector_analysis(ricci_apply(u, tr.grid()));
      eigen = std::max(eigen, detail::max_abs_diff(AZ, stokes_eigenvalue(l, o.spectrum) * Z));
      unit = std::max(unit, std::abs(std::sqrt(inner(tr.grid(), u, u)) - 1.0));
    }
  VerifyReport r;
  r.le("AZ-lambda*Z", eigen, 1e-10);
  r.le("|Z|_H-1", unit, 1e-9);
  r.le("vector_round_trip", vec_rt, 1e-10);
  r.le("scalar_round_trip", sca_rt, 1e-10);
  r.note("every Z_{l,m} with l <= " + std::to_string(o.lmax) + ", round trips on " + std::to_string(o.n_fields) +
         " random fields");
  return r;
}

/// (B(u), w)_H from nonlinear_B against quadrature of b(u, u, w) for every
/// test mode w with l <= oracle_lmax.
inline VerifyReport verify_b_oracle(const OperatorSuiteOptions& o) {
  const auto ctx = detail::suite_context(o);
  double oracle = 0.0;
  const int ol = std::min(o.oracle_lmax, o.lmax);
  for (int i = 0; i < o.oracle_fields; ++i) {
    const auto u = random_stream_field(o.lmax, o.seed, static_cast<std::uint64_t>(i));
    const auto bu = nonlinear_B(u, ctx);
    for (int l = 1; l <= ol; ++l)
      for (int m = -l; m <= l; ++m) {
        const auto w = unit_mode(o.lmax, l, m);
        oracle = std::max(oracle, std::abs(h_inner(bu, w) - trilinear_b(u, u, w, ctx)));
      }
  }
  VerifyReport r;
  r.le("(B(u),w)-b(u,u,w)", oracle, 1e-8);
  r.note("lmax " + std::to_string(o.lmax) + ", " + std::to_string(o.oracle_fields) + " fields, test modes l <= " +
         std::to_string(ol));
  return r;
}

inline VerifyReport verify_operators(const OperatorSuiteOptions& o, InequalityReport* inequalities = nullptr) {
  VerifyReport r;
  r.append(verify_identities(o), "");
  r.append(verify_basis(o), "");
  r.append(verify_b_oracle(o), "");
  if (inequalities) *inequalities = inequality_report(detail::suite_fields(o), detail::suite_context(o));
  return r;
}

// ---------------------------------------------------------------------------
// Subordinator law, moment scaling, summability.

struct LaplaceOptions {
  double beta = 1.5;
  double dt = 0.1;
  int n_samples = 100000;
  std::uint64_t seed = 0;
  std::vector<double> r{0.5, 1.0, 2.0};
};

/// Monte-Carlo E exp(-r dX) against exp(-dt r^{beta/2}); for beta = 2 every
/// increment must equal dt exactly.
inline VerifyReport verify_subordinator(const LaplaceOptions& o) {
  VerifyReport rep;
  const CounterRng rng(o.seed, 0);
  std::vector<double> x(static_cast<std::size_t>(o.n_samples));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = sample_positive_stable(o.beta / 2.0, o.dt, rng, i);
  const std::string tag = "beta=" + format_number(o.beta, "%g");
  if (o.beta == 2.0) {
    double worst = 0.0;
    for (double v : x) worst = std::max(worst, std::abs(v - o.dt));
    rep.le("laplace " + tag + " |dX-dt|", worst, 0.0);
    return rep;
  }
  for (double r : o.r) {
    double mean = 0.0;
    for (double v : x) mean += std::exp(-r * v);
    mean /= static_cast<double>(x.size());
    const double exact = std::exp(-o.dt * std::pow(r, o.beta / 2.0));
    rep.le("laplace " + tag + " r=" + format_number(r, "%g") + " rel_err", std::abs(mean / exact - 1.0), 0.01);
  }
  return rep;
}

/// log-log slope of the moment of |A^delta G L(t)| against p / beta. Means are
/// used for beta > 1 and medians otherwise (heavy tails make sample means
/// unreliable there).
inline VerifyReport verify_moment_scaling(const NoiseSpec& spec, double p, const std::vector<double>& times,
                                          int n_paths, int lmax, int workers = 1) {
  const auto est = moment_scaling_estimate(spec, spec.delta, p, times, n_paths, lmax, workers);
  std::vector<double> t, y;
  const bool use_mean = spec.beta > 1.0;
  for (const auto& e : est) {
    t.push_back(e.t);
    y.push_back(use_mean ? e.mean : e.median);
  }
  VerifyReport rep;
  const double slope = log_log_slope(t, y);
  rep.le("moment_slope_error", std::abs(slope - p / spec.beta), 0.05);
  rep.note("slope " + format_number(slope, "%.6f") + " of the " + (use_mean ? "mean" : "median") + " vs p/beta " +
           format_number(p / spec.beta, "%.6f") + " over " + std::to_string(n_paths) + " paths");
  return rep;
}

inline VerifyReport verify_summability(const SigmaRule& sigma, double beta, double delta) {
  const auto s = check_summability(sigma, beta, delta);
  VerifyReport rep;
  rep.ge("summable", s.converged ? 1.0 : 0.0, 1.0);
  rep.note("sum |sigma_l|^beta lambda_l^(beta delta) = " + format_number(s.value, "%.10g") + ", tail <= " +
           format_number(s.tail_bound, "%.3g") + ", terms ~ l^" + format_number(s.growth_exponent, "%g"));
  return rep;
}

inline VerifyReport verify_noise(const ExperimentConfig& cfg) {
  VerifyReport rep;
  rep.append(verify_subordinator({.beta = cfg.noise.beta, .dt = cfg.solver.dt, .seed = cfg.seed}), "");
  rep.append(verify_moment_scaling(cfg.noise, cfg.p, cfg.times, cfg.n_paths, cfg.solver.lmax, cfg.workers), "");
  if (!cfg.noise.sigma.is_zero()) rep.append(verify_summability(cfg.noise.sigma, cfg.noise.beta, cfg.noise.delta), "");
  return rep;
}

// ---------------------------------------------------------------------------
// OU moments.

/// Gaussian noise with p = 2: every |ratio - 1| <= 3%. Otherwise the
/// empirical moment may not exceed c_p times the scale expression. In both
/// cases the expression must decrease strictly as alpha grows.
inline VerifyReport verify_ou_moments(const NoiseSpec& spec, const OUParams& params, int lmax, double p,
                                      const std::vector<double>& times, int n_paths, double dt, int workers = 1) {
  VerifyReport rep;
  const bool gaussian = spec.beta == 2.0 && p == 2.0;
  const auto res = ou_moment_check(spec, params, lmax, p, times, n_paths, dt, workers);
  for (const auto& c : res) {
    const std::string tag = "t=" + format_number(c.t, "%g");
    if (gaussian)
      rep.le("ou_gaussian " + tag + " |ratio-1|", std::abs(c.ratio - 1.0), 0.03);
    else
      rep.le("ou_moment " + tag + " ratio", c.ratio, 1.0);
    rep.note(tag + ": E|z|^p " + format_number(c.empirical, "%.6e") + ", c_p " + format_number(c.c_p, "%.6f") +
             ", expression " + format_number(c.expression, "%.6e"));
  }
  const double t = *std::max_element(times.begin(), times.end());
  double previous = std::numeric_limits<double>::infinity();
  double worst_step = -std::numeric_limits<double>::infinity();
  double last = 0.0;
  for (double extra : {0.0, 1.0, 4.0, 16.0, 64.0, 256.0, 1024.0}) {
    last = zlp_bound(t, p, spec, params.alpha + extra, lmax, params.nu, params.spectrum).expression;
    if (std::isfinite(previous)) worst_step = std::max(worst_step, last - previous);
    previous = last;
  }
  rep.le("expression_increase_in_alpha", worst_step, 0.0);
  const double first = zlp_bound(t, p, spec, params.alpha, lmax, params.nu, params.spectrum).expression;
  rep.note("expression at alpha+1024 is " + format_number(first > 0.0 ? last / first : 0.0, "%.3e") +
           " of its value at alpha");
  return rep;
}

inline VerifyReport verify_ou(const ExperimentConfig& cfg) {
  const Solver probe(cfg.solver, cfg.noise);
  return verify_ou_moments(cfg.noise, probe.ou_params(), cfg.solver.lmax, cfg.p, cfg.times, cfg.n_paths,
                           cfg.solver.dt, cfg.workers);
}

// ---------------------------------------------------------------------------
// Energy identity under step halving.

struct EnergyHalvingResult {
  std::vector<double> dt;
  std::vector<double> residual;  // |energy residual| at t_end
  std::vector<double> ratio;     // residual[k] / residual[k + 1]
  GronwallReport deterministic;  // sigma = 0 run at the base step
  GronwallReport stochastic;     // finest stochastic run
};

/// Runs cfg at dt, dt/2, ..., dt/2^halvings on one noise path. The noise is
/// generated on the finest step so all runs see the same increments.
inline EnergyHalvingResult energy_halving(const SolverConfig& base, NoiseSpec noise, int halvings) {
  if (halvings < 1) throw DomainError("energy_halving: need at least one halving");
  EnergyHalvingResult out;
  const double finest = base.dt / std::ldexp(1.0, halvings);
  const double fine = noise.noise_dt > 0.0 ? noise.noise_dt : finest / noise.n_substeps;
  for (int k = 0; k <= halvings; ++k) {
    SolverConfig cfg = base;
    cfg.dt = base.dt / std::ldexp(1.0, k);
    NoiseSpec spec = noise;
    spec.noise_dt = fine;
    spec.n_substeps = static_cast<int>(std::lround(cfg.dt / fine));
    if (spec.n_substeps < 1 || std::abs(spec.n_substeps * fine - cfg.dt) > 1e-9 * cfg.dt)
      throw DomainError("energy_halving: every halved dt must be a multiple of noise_dt");
    const Solver solver(cfg, spec);
    const auto traj = run(solver);
    out.dt.push_back(cfg.dt);
    out.residual.push_back(std::abs(energy_residual(traj.final.ledger, cfg.nu)));
    if (k == halvings) out.stochastic = gronwall_bound_report(traj.final.ledger, cfg.nu);
  }
  for (int k = 0; k < halvings; ++k) {
    const double a = out.residual[static_cast<std::size_t>(k)], b = out.residual[static_cast<std::size_t>(k) + 1];
    out.ratio.push_back(b > 0.0 ? a / b : (a == 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
  }
  NoiseSpec quiet = noise;
  quiet.sigma = SigmaRule::constant(0.0);
  out.deterministic = gronwall_bound_report(run(Solver(base, quiet)).final.ledger, base.nu);
  return out;
}

inline VerifyReport energy_report(const EnergyHalvingResult& e) {
  VerifyReport rep;
  for (std::size_t k = 0; k < e.ratio.size(); ++k)
    rep.ge("residual_ratio dt=" + format_number(e.dt[k], "%g") + "/" + format_number(e.dt[k + 1], "%g"), e.ratio[k],
           1.7);
  const auto& g = e.deterministic;
  rep.ge("K1_holds(sigma=0)", g.k1_ok ? 1.0 : 0.0, 1.0);
  rep.ge("K2_holds(sigma=0)", g.k2_ok ? 1.0 : 0.0, 1.0);
  for (std::size_t k = 0; k < e.dt.size(); ++k)
    rep.note("dt " + format_number(e.dt[k], "%g") + ": |residual| " + format_number(e.residual[k], "%.6e"));
  auto bounds = [](const GronwallReport& r) {
    return "int|v|_V^2 " + format_number(r.int_v_v2, "%.6e") + " <= K1 " + format_number(r.K1, "%.6e") +
           ", sup|v|^2 " + format_number(r.sup_v_h2, "%.6e") + " <= K2 " + format_number(r.K2, "%.6e") +
           ", sup|v|_V^2 " + format_number(r.sup_v_v2, "%.6e") + " <= K3 " + format_number(r.K3, "%.6e") +
           (r.k3_ok ? "" : " (violated)") + ", int|Av|^2 " + format_number(r.int_Av2, "%.6e") + " <= K4 " +
           format_number(r.K4, "%.6e") + (r.k4_ok ? "" : " (violated)");
  };
  rep.note("sigma=0: " + bounds(e.deterministic));
  rep.note("stochastic, finest dt: " + bounds(e.stochastic));
  return rep;
}

// ---------------------------------------------------------------------------
// Simulation.

namespace detail {

struct PathOutcome {
  bool blew_up = false;
  std::string error;
  Trajectory traj;
};

/// One path: diagnostics.csv, snapshots and (on blow-up) snapshot_last_good.bin in `dir`.
inline PathOutcome simulate_path(const ExperimentConfig& cfg, const SolverConfig& scfg, std::uint64_t path,
                                 const std::filesystem::path& dir, std::vector<SpectralField>* samples) {
  namespace fs = std::filesystem;
  const Solver solver(scfg, cfg.noise, path);
  Snapshot last;
  RunOptions options;
  options.snapshot_every = cfg.snapshot_every;
  options.on_snapshot = [&](const SimState& s) {
    last = {s.t, scfg.spectrum, s.v, s.ou.z};
    if (cfg.snapshot_every > 0 && s.step % cfg.snapshot_every == 0) {
      char name[40];
      std::snprintf(name, sizeof name, "snapshot_%06ld.bin", s.step);
      write_snapshot((dir / name).string(), last);
    }
  };
  const long stride = std::max(1L, scfg.n_steps() / cfg.n_samples);
  if (samples)
    options.on_step = [&](const SimState& s) {
      if (s.step % stride == 0) samples->push_back(recombine(s));
    };

  PathOutcome out;
  try {
    out.traj = run(solver, options);
  } catch (const BlowUpError& e) {
    write_snapshot((dir / "snapshot_last_good.bin").string(), last);
    out.blew_up = true;
    out.error = e.what();
    return out;
  } catch (const ContractionError& e) {
    out.blew_up = true;
    out.error = e.what();
    return out;
  }
  auto csv = open_output(dir / "diagnostics.csv");
  write_diagnostics_csv(csv, out.traj.rows);
  return out;
}

inline void write_run_summary(std::ostream& os, const Trajectory& traj, const SolverConfig& scfg) {
  const auto& last = traj.rows.back();
  const auto g = gronwall_bound_report(traj.final.ledger, scfg.nu);
  os << "steps " << traj.final.step << '\n'
     << "t_final " << format_number(last.t) << '\n'
     << "norm_H " << format_number(last.norm_H) << '\n'
     << "norm_V " << format_number(last.norm_V) << '\n'
     << "norm_DA " << format_number(last.norm_DA) << '\n'
     << "norm_L4_u " << format_number(last.norm_L4_u) << '\n'
     << "energy_residual " << format_number(energy_residual(traj.final.ledger, scfg.nu)) << '\n'
     << "c_b " << format_number(g.c_b) << '\n'
     << "c_a " << format_number(g.c_a) << '\n'
     << "K1 " << format_number(g.K1) << " int|v|_V^2 " << format_number(g.int_v_v2) << (g.k1_ok ? " ok" : " violated")
     << '\n'
     << "K2 " << format_number(g.K2) << " sup|v|^2 " << format_number(g.sup_v_h2) << (g.k2_ok ? " ok" : " violated")
     << '\n'
     << "K3 " << format_number(g.K3) << " sup|v|_V^2 " << format_number(g.sup_v_v2) << (g.k3_ok ? " ok" : " violated")
     << '\n'
     << "K4 " << format_number(g.K4) << " int|Av|^2 " << format_number(g.int_Av2) << (g.k4_ok ? " ok" : " violated")
     << '\n';
  if (scfg.scheme == Scheme::picard)
    os << "picard_max_iterations " << traj.picard_max_iterations << '\n'
       << "picard_total_iterations " << traj.picard_total_iterations << '\n';
}

inline int simulate(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& log) {
  namespace fs = std::filesystem;
  if (cfg.n_paths == 1) {
    std::vector<SpectralField> samples;
    const auto outcome = simulate_path(cfg, cfg.solver, 0, dir, &samples);
    auto report = open_output(dir / "report.txt");
    write_config_echo(report, cfg);
    if (outcome.blew_up) {
      report << "status failed\nerror " << outcome.error << '\n';
      log << "simulate: " << outcome.error << '\n';
      return exit_code::runtime;
    }
    write_run_summary(report, outcome.traj, cfg.solver);
    std::vector<SpectralField> nonzero;
    for (auto& u : samples)
      if (norm_h2(u) > 0.0) nonzero.push_back(std::move(u));
    auto ineq = open_output(dir / "inequalities.csv");
    if (nonzero.empty()) {
      write_inequality_csv(ineq, {});
    } else {
      const Solver probe(cfg.solver, cfg.noise);
      write_inequality_csv(ineq, inequality_report(nonzero, probe.context()));
    }
    report << "status ok\n";
    log << "simulate: " << outcome.traj.final.step << " steps to t=" << format_number(outcome.traj.final.t, "%g")
        << ", |v|_H=" << format_number(outcome.traj.rows.back().norm_H, "%.6e") << '\n';
    return exit_code::ok;
  }

  // Ensemble: paths run in parallel, each single-threaded, each in its own directory.
  SolverConfig scfg = cfg.solver;
  scfg.workers = 1;
  const auto n = static_cast<std::size_t>(cfg.n_paths);
  std::vector<PathOutcome> outcomes(n);
  for (std::size_t p = 0; p < n; ++p) {
    char name[32];
    std::snprintf(name, sizeof name, "path_%04zu", p);
    fs::create_directories(dir / name);
  }
  parallel_for(n, cfg.workers, [&](std::size_t p) {
    char name[32];
    std::snprintf(name, sizeof name, "path_%04zu", p);
    outcomes[p] = simulate_path(cfg, scfg, p, dir / name, nullptr);
  });

  auto summary = open_output(dir / "ensemble.csv");
  summary << "path,status,t,norm_H,norm_V,norm_DA,energy_residual\n";
  int failures = 0;
  double mean_h2 = 0.0, mean_v2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const auto& o = outcomes[p];
    if (o.blew_up) {
      ++failures;
      summary << p << ",failed,,,,,\n";
      continue;
    }
    const auto& r = o.traj.rows.back();
    mean_h2 += r.norm_H * r.norm_H;
    mean_v2 += r.norm_V * r.norm_V;
    summary << p << ",ok," << format_number(r.t) << ',' << format_number(r.norm_H) << ',' << format_number(r.norm_V)
            << ',' << format_number(r.norm_DA) << ','
            << format_number(energy_residual(o.traj.final.ledger, scfg.nu)) << '\n';
  }
  auto report = open_output(dir / "report.txt");
  write_config_echo(report, cfg);
  const int good = cfg.n_paths - failures;
  report << "paths " << cfg.n_paths << '\n' << "failed_paths " << failures << '\n';
  if (good > 0)
    report << "mean_final_|v|_H^2 " << format_number(mean_h2 / good) << '\n'
           << "mean_final_|v|_V^2 " << format_number(mean_v2 / good) << '\n';
  report << (failures ? "status failed\n" : "status ok\n");
  log << "simulate: " << good << " of " << cfg.n_paths << " paths completed\n";
  return failures ? exit_code::runtime : exit_code::ok;
}

inline int finish_verification(const VerifyReport& rep, const ExperimentConfig& cfg,
                               const std::filesystem::path& dir, std::ostream& log) {
  auto report = open_output(dir / "report.txt");
  write_config_echo(report, cfg);
  rep.write(report);
  rep.write(log);
  return rep.passed() ? exit_code::ok : exit_code::verification_failed;
}

}  // namespace detail

/// Runs the configured mode and writes its artifacts under cfg.output_dir.
/// Returns one of the exit_code values; configuration problems surface as
/// exceptions from parse_config before this is reached.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  try {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    switch (cfg.mode) {
      case Mode::simulate:
        return detail::simulate(cfg, dir, log);
      case Mode::verify_operators: {
        InequalityReport ineq;
        const auto rep = verify_operators({.lmax = cfg.solver.lmax,
                                           .n_fields = std::max(3, cfg.n_samples),
                                           .seed = cfg.seed,
                                           .omega = cfg.solver.omega,
                                           .spectrum = cfg.solver.spectrum,
                                           .workers = cfg.workers},
                                          &ineq);
        auto csv = detail::open_output(dir / "inequalities.csv");
        write_inequality_csv(csv, ineq);
        return detail::finish_verification(rep, cfg, dir, log);
      }
      case Mode::verify_noise:
        return detail::finish_verification(verify_noise(cfg), cfg, dir, log);
      case Mode::verify_ou:
        return detail::finish_verification(verify_ou(cfg), cfg, dir, log);
      case Mode::verify_energy: {
        const auto e = energy_halving(cfg.solver, cfg.noise, cfg.halvings);
        auto csv = detail::open_output(dir / "energy_halving.csv");
        csv << "dt,abs_residual\n";
        for (std::size_t k = 0; k < e.dt.size(); ++k)
          csv << format_number(e.dt[k]) << ',' << format_number(e.residual[k]) << '\n';
        return detail::finish_verification(energy_report(e), cfg, dir, log);
      }
    }
  } catch (const DomainError& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const ResolutionError& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::runtime;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code::runtime;
  }
  return exit_code::runtime;
}

}  // namespace snse
