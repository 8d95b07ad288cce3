#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "snse/error.hpp"
#include "snse/grid.hpp"
#include "snse/noise.hpp"
#include "snse/solver.hpp"

namespace snse {

enum class Mode { simulate, verify_operators, verify_noise, verify_ou, verify_energy };

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::simulate: return "simulate";
    case Mode::verify_operators: return "verify-operators";
    case Mode::verify_noise: return "verify-noise";
    case Mode::verify_ou: return "verify-ou";
    case Mode::verify_energy: return "verify-energy";
  }
  return "?";
}

inline bool parse_mode(std::string_view s, Mode& out) {
  for (Mode m : {Mode::simulate, Mode::verify_operators, Mode::verify_noise, Mode::verify_ou, Mode::verify_energy})
    if (mode_name(m) == s) {
      out = m;
      return true;
    }
  return false;
}

struct ExperimentConfig {
  Mode mode = Mode::simulate;
  std::string output_dir = "snse_out";
  std::uint64_t seed = 0;
  int n_paths = 1;
  int workers = 1;
  long snapshot_every = 0;

  SolverConfig solver;
  NoiseSpec noise;
  std::string v0 = "zero";
  std::string f = "zero";

  // verify-noise / verify-ou
  double p = 1.0;
  std::vector<double> times{0.1, 1.0, 10.0};
  // verify-operators
  int n_samples = 20;
  // verify-energy
  int halvings = 3;
};

/// Builds a stream field from "zero", "mode:l=L,m=M[,amp=A]" (real basis
/// element, negative m allowed) or "random:lmax=N,seed=S[,scale=A][,slope=P]".
inline SpectralField field_from_spec(std::string_view text, int lmax) {
  text = detail::trim(text);
  if (text == "zero") return SpectralField::stream(lmax);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw DomainError("field spec '" + std::string(text) + "' not understood");
  const auto kind = text.substr(0, colon);
  std::map<std::string, std::string, std::less<>> args;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto part = detail::trim(rest.substr(0, comma));
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw DomainError("field spec: expected key=value in '" + std::string(part) + "'");
    args[std::string(detail::trim(part.substr(0, eq)))] = std::string(detail::trim(part.substr(eq + 1)));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  auto take = [&](const char* key, auto fallback) {
    using T = decltype(fallback);
    auto it = args.find(key);
    if (it == args.end()) return fallback;
    T v = detail::parse_number<T>(it->second, key);
    args.erase(it);
    return v;
  };
  SpectralField out;
  if (kind == "mode") {
    const int l = take("l", -1);
    const int m = take("m", 0);
    const double amp = take("amp", 1.0);
    out = amp * unit_mode(lmax, l, m);
  } else if (kind == "random") {
    const int n = take("lmax", lmax);
    const auto seed = take("seed", std::uint64_t{0});
    const double scale = take("scale", 1.0);
    const double slope = take("slope", 1.0);
    if (n < 1 || n > lmax) throw DomainError("field spec: random lmax must lie in [1, lmax]");
    out = scale * random_stream_field(n, seed, 0, slope).resized(lmax);
  } else {
    throw DomainError("field spec: unknown kind '" + std::string(kind) + "'");
  }
  if (!args.empty()) throw DomainError("field spec: unexpected key '" + args.begin()->first + "'");
  return out;
}

namespace detail {

struct IniEntry {
  std::string value;
  int line = 0;
};

using IniTable = std::map<std::string, IniEntry>;  // "section.key"

inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (!quoted && (line[i] == '#' || line[i] == ';')) return line.substr(0, i);
  }
  return line;
}

inline IniTable read_ini(std::istream& in) {
  IniTable table;
  std::string section;
  std::string raw;
  for (int lineno = 1; std::getline(in, raw); ++lineno) {
    const std::string line(trim(strip_comment(raw)));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError(ConfigError::Kind::syntax, "malformed section header '" + line + "'", lineno);
      section = std::string(trim(std::string_view(line).substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(ConfigError::Kind::syntax, "expected 'key = value', got '" + line + "'", lineno);
    const std::string key(trim(std::string_view(line).substr(0, eq)));
    std::string value(trim(std::string_view(line).substr(eq + 1)));
    if (key.empty()) throw ConfigError(ConfigError::Kind::syntax, "empty key", lineno);
    if (section.empty()) throw ConfigError(ConfigError::Kind::syntax, "key '" + key + "' outside any section", lineno);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    const std::string full = section + "." + key;
    if (table.count(full))
      throw ConfigError(ConfigError::Kind::syntax, "duplicate key '" + full + "' (first on line " +
                                                       std::to_string(table[full].line) + ")",
                        lineno);
    table[full] = {value, lineno};
  }
  return table;
}

}  // namespace detail

/// Reads an INI-style experiment description. Every key is optional except
/// [solver] lmax, dt and t_end. Errors carry the offending line number.
/// `mode` overrides run.mode before the mode-dependent checks.
inline ExperimentConfig parse_config(std::istream& in, std::optional<Mode> mode = std::nullopt) {
  using Kind = ConfigError::Kind;
  const detail::IniTable table = detail::read_ini(in);
  std::set<std::string> used;
  ExperimentConfig cfg;

  auto line_of = [&](const std::string& key) {
    auto it = table.find(key);
    return it == table.end() ? 0 : it->second.line;
  };
  auto fail = [&](const std::string& key, const std::string& what) -> ConfigError {
    return ConfigError(Kind::constraint, key + ": " + what, line_of(key));
  };
  auto number = [&](const std::string& key, auto& target) -> bool {
    using T = std::remove_reference_t<decltype(target)>;
    auto it = table.find(key);
    if (it == table.end()) return false;
    used.insert(key);
    const std::string& s = it->second.value;
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw ConfigError(Kind::type_mismatch, key + ": cannot read '" + s + "' as a number", it->second.line);
    if constexpr (std::is_floating_point_v<T>)
      if (!std::isfinite(v)) throw ConfigError(Kind::type_mismatch, key + ": value must be finite", it->second.line);
    target = v;
    return true;
  };
  auto boolean = [&](const std::string& key, bool& target) {
    auto it = table.find(key);
    if (it == table.end()) return;
    used.insert(key);
    if (it->second.value == "true")
      target = true;
    else if (it->second.value == "false")
      target = false;
    else
      throw ConfigError(Kind::type_mismatch, key + ": expected true or false", it->second.line);
  };
  auto text = [&](const std::string& key, std::string& target) {
    auto it = table.find(key);
    if (it == table.end()) return false;
    used.insert(key);
    target = it->second.value;
    return true;
  };
  auto require = [&](const std::string& key, auto& target) {
    if (!number(key, target)) throw ConfigError(Kind::missing_key, "missing required key '" + key + "'");
  };

  // [run]
  std::string s;
  if (text("run.mode", s) && !parse_mode(s, cfg.mode))
    throw ConfigError(Kind::type_mismatch, "run.mode: unknown mode '" + s + "'", line_of("run.mode"));
  if (mode) cfg.mode = *mode;
  text("run.output_dir", cfg.output_dir);
  number("run.seed", cfg.seed);
  number("run.n_paths", cfg.n_paths);
  number("run.workers", cfg.workers);
  number("run.snapshot_every", cfg.snapshot_every);

  // [solver]
  auto& sv = cfg.solver;
  require("solver.lmax", sv.lmax);
  require("solver.dt", sv.dt);
  require("solver.t_end", sv.t_end);
  number("solver.nu", sv.nu);
  number("solver.omega", sv.omega);
  number("solver.alpha", sv.alpha);
  if (text("solver.scheme", s)) {
    try {
      sv.scheme = parse_scheme(s);
    } catch (const DomainError& e) {
      throw ConfigError(Kind::type_mismatch, std::string("solver.scheme: ") + e.what(), line_of("solver.scheme"));
    }
  }
  number("solver.picard_tol", sv.picard_tol);
  number("solver.picard_max_iter", sv.picard_max_iter);
  if (text("solver.spectrum", s)) {
    if (s == "paper")
      sv.spectrum = Spectrum::paper;
    else if (s == "ricci_shifted")
      sv.spectrum = Spectrum::ricci_shifted;
    else
      throw ConfigError(Kind::type_mismatch, "solver.spectrum: expected paper or ricci_shifted",
                        line_of("solver.spectrum"));
  }
  boolean("solver.dealias", sv.dealias);
  number("solver.n_lat", sv.n_lat);
  number("solver.n_lon", sv.n_lon);
  boolean("solver.include_coriolis_in_ou", sv.include_coriolis_in_ou);
  boolean("solver.track_enstrophy_constants", sv.track_enstrophy_constants);
  text("solver.v0", cfg.v0);
  text("solver.f", cfg.f);

  // [noise]
  auto& nz = cfg.noise;
  nz.sigma = SigmaRule::constant(0.0);
  number("noise.beta", nz.beta);
  if (text("noise.sigma", s)) {
    try {
      nz.sigma = SigmaRule::parse(s);
    } catch (const DomainError& e) {
      throw ConfigError(Kind::type_mismatch, std::string("noise.sigma: ") + e.what(), line_of("noise.sigma"));
    }
  }
  number("noise.delta", nz.delta);
  number("noise.n_substeps", nz.n_substeps);
  number("noise.noise_dt", nz.noise_dt);

  // [verify]
  number("verify.p", cfg.p);
  if (text("verify.times", s)) {
    cfg.times.clear();
    std::string_view rest = s;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = detail::trim(rest.substr(0, comma));
      double t = 0.0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), t);
      if (ec != std::errc{} || ptr != item.data() + item.size() || item.empty())
        throw ConfigError(Kind::type_mismatch, "verify.times: cannot read '" + std::string(item) + "'",
                          line_of("verify.times"));
      cfg.times.push_back(t);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }
  number("verify.n_samples", cfg.n_samples);
  number("verify.halvings", cfg.halvings);

  for (const auto& [key, entry] : table)
    if (!used.count(key)) throw ConfigError(Kind::unknown_key, "unknown key '" + key + "'", entry.line);

  // Cross-field constraints.
  if (sv.lmax < 1) throw fail("solver.lmax", "must be >= 1");
  if (!(sv.dt > 0.0)) throw fail("solver.dt", "must be positive");
  if (!(sv.t_end >= sv.dt)) throw fail("solver.t_end", "must be >= dt");
  if (std::abs(static_cast<double>(sv.n_steps()) * sv.dt - sv.t_end) > 1e-9 * sv.t_end)
    throw fail("solver.t_end", "must be an integer multiple of dt");
  if (!(sv.nu > 0.0)) throw fail("solver.nu", "must be positive");
  if (!(sv.alpha >= 0.0)) throw fail("solver.alpha", "must be >= 0");
  if (!(sv.picard_tol > 0.0)) throw fail("solver.picard_tol", "must be positive");
  if (sv.picard_max_iter < 1) throw fail("solver.picard_max_iter", "must be >= 1");
  if (sv.n_lat < 0 || sv.n_lon < 0) throw fail(sv.n_lat < 0 ? "solver.n_lat" : "solver.n_lon", "must be >= 0");
  if (sv.dealias) {
    const int need_lon = 3 * sv.lmax + 1;
    const int need_lat = (3 * sv.lmax + 2) / 2;
    if (sv.n_lon > 0 && sv.n_lon < need_lon)
      throw fail("solver.n_lon", "dealiasing at lmax " + std::to_string(sv.lmax) + " needs n_lon >= " +
                                     std::to_string(need_lon) + ", got " + std::to_string(sv.n_lon));
    if (sv.n_lat > 0 && sv.n_lat < need_lat)
      throw fail("solver.n_lat", "dealiasing at lmax " + std::to_string(sv.lmax) + " needs n_lat >= " +
                                     std::to_string(need_lat) + ", got " + std::to_string(sv.n_lat));
  }
  if (cfg.n_paths < 1) throw fail("run.n_paths", "must be >= 1");
  if (cfg.workers < 1) throw fail("run.workers", "must be >= 1");
  if (cfg.snapshot_every < 0) throw fail("run.snapshot_every", "must be >= 0");
  if (!(nz.beta > 0.0 && nz.beta <= 2.0)) throw fail("noise.beta", "must lie in (0, 2]");
  if (!(nz.delta >= 0.0)) throw fail("noise.delta", "must be >= 0");
  if (nz.n_substeps < 1) throw fail("noise.n_substeps", "must be >= 1");
  if (!(nz.noise_dt >= 0.0)) throw fail("noise.noise_dt", "must be >= 0");
  if (nz.noise_dt > 0.0) {
    const double sub = sv.dt / nz.n_substeps;
    const double ratio = sub / nz.noise_dt;
    if (ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
      throw fail("noise.noise_dt", "dt / n_substeps must be an integer multiple of noise_dt");
  }
  if (!nz.sigma.is_zero()) {
    const auto report = check_summability(nz.sigma, nz.beta, nz.delta);
    if (!report.converged)
      throw fail("noise.sigma", "sum |sigma_l|^beta lambda_l^(beta delta) does not converge (terms ~ l^" +
                                    std::to_string(report.growth_exponent) + ")");
    if (sv.spectrum == Spectrum::ricci_shifted && !(sv.alpha > 0.0))
      throw fail("solver.alpha", "the ricci_shifted spectrum with noise needs alpha > 0");
  }
  if (cfg.mode == Mode::verify_noise || cfg.mode == Mode::verify_ou) {
    if (!(cfg.p > 0.0)) throw fail("verify.p", "must be positive");
    if (nz.beta < 2.0 && !(cfg.p < nz.beta)) throw fail("verify.p", "p < beta required");
    if (cfg.times.size() < 2) throw fail("verify.times", "needs at least two times");
    for (double t : cfg.times)
      if (!(t > 0.0)) throw fail("verify.times", "times must be positive");
  }
  if (cfg.n_samples < 3) throw fail("verify.n_samples", "must be >= 3");
  if (cfg.halvings < 1) throw fail("verify.halvings", "must be >= 1");

  try {
    sv.v0 = field_from_spec(cfg.v0, sv.lmax);
  } catch (const DomainError& e) {
    throw ConfigError(Kind::type_mismatch, std::string("solver.v0: ") + e.what(), line_of("solver.v0"));
  }
  try {
    sv.f = field_from_spec(cfg.f, sv.lmax);
  } catch (const DomainError& e) {
    throw ConfigError(Kind::type_mismatch, std::string("solver.f: ") + e.what(), line_of("solver.f"));
  }
  sv.workers = cfg.workers;
  nz.seed = cfg.seed;
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path, std::optional<Mode> mode = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  return parse_config(in, mode);
}

}  // namespace snse
