#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "snse/error.hpp"
#include "snse/legendre.hpp"
#include "snse/parallel.hpp"
#include "snse/rng.hpp"
#include "snse/spectral_field.hpp"

namespace snse {

/// Noise amplitude per degree, sigma_l for l >= 1 (independent of m).
class SigmaRule {
 public:
  enum class Kind { power, band, constant };

  SigmaRule() = default;

  /// sigma_l = scale * l^{-gamma}
  static SigmaRule power(double gamma, double scale = 1.0) { return {Kind::power, gamma, scale, 0}; }
  /// sigma_l = value for l <= l_cut, 0 beyond.
  static SigmaRule band(int l_cut, double value) { return {Kind::band, 0.0, value, l_cut}; }
  static SigmaRule constant(double value) { return {Kind::constant, 0.0, value, 0}; }

  /// Parses "power:gamma=2.0[,scale=s]", "band:l<=8,value=0.1" or "const:0.05".
  static SigmaRule parse(std::string_view text);

  double operator()(int l) const {
    switch (kind_) {
      case Kind::power: return scale_ * std::pow(static_cast<double>(l), -gamma_);
      case Kind::band: return l <= l_cut_ ? scale_ : 0.0;
      case Kind::constant: return scale_;
    }
    return 0.0;
  }

  Kind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  double scale() const { return scale_; }
  int band_limit() const { return l_cut_; }
  bool is_zero() const { return scale_ == 0.0 || (kind_ == Kind::band && l_cut_ < 1); }

  /// Last degree with nonzero sigma, or -1 when the support is unbounded.
  long support_end() const {
    if (is_zero()) return 0;
    return kind_ == Kind::band ? l_cut_ : -1;
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
      case Kind::power:
        os << "power:gamma=" << gamma_;
        if (scale_ != 1.0) os << ",scale=" << scale_;
        break;
      case Kind::band: os << "band:l<=" << l_cut_ << ",value=" << scale_; break;
      case Kind::constant: os << "const:" << scale_; break;
    }
    return os.str();
  }

  friend bool operator==(const SigmaRule&, const SigmaRule&) = default;

 private:
  SigmaRule(Kind kind, double gamma, double scale, int l_cut)
      : kind_(kind), gamma_(gamma), scale_(scale), l_cut_(l_cut) {}

  Kind kind_ = Kind::constant;
  double gamma_ = 0.0;
  double scale_ = 0.0;
  int l_cut_ = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view s, const char* what) {
  s = trim(s);
  T value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty())
    throw DomainError(std::string("sigma rule: cannot read ") + what + " from '" + std::string(s) + "'");
  return value;
}

}  // namespace detail

inline SigmaRule SigmaRule::parse(std::string_view text) {
  text = detail::trim(text);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw DomainError("sigma rule '" + std::string(text) + "' needs the form name:arguments");
  const auto name = detail::trim(text.substr(0, colon));
  const auto args = text.substr(colon + 1);

  std::vector<std::string_view> parts;
  for (std::size_t start = 0; start <= args.size();) {
    const auto comma = args.find(',', start);
    const auto stop = comma == std::string_view::npos ? args.size() : comma;
    parts.push_back(detail::trim(args.substr(start, stop - start)));
    start = stop + 1;
  }

  auto value_after = [](std::string_view part, std::string_view key) -> std::string_view {
    if (part.substr(0, key.size()) != key) return {};
    return part.substr(key.size());
  };

  SigmaRule rule;
  if (name == "const") {
    if (parts.size() != 1) throw DomainError("sigma rule const takes one value");
    rule = constant(detail::parse_number<double>(parts[0], "const value"));
  } else if (name == "power") {
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double scale = 1.0;
    for (auto part : parts) {
      if (auto v = value_after(part, "gamma="); !v.empty())
        gamma = detail::parse_number<double>(v, "gamma");
      else if (auto w = value_after(part, "scale="); !w.empty())
        scale = detail::parse_number<double>(w, "scale");
      else
        throw DomainError("sigma rule power: unexpected argument '" + std::string(part) + "'");
    }
    if (std::isnan(gamma)) throw DomainError("sigma rule power needs gamma=");
    rule = power(gamma, scale);
  } else if (name == "band") {
    int l_cut = -1;
    double value = std::numeric_limits<double>::quiet_NaN();
    for (auto part : parts) {
      if (auto v = value_after(part, "l<="); !v.empty())
        l_cut = detail::parse_number<int>(v, "band limit");
      else if (auto w = value_after(part, "value="); !w.empty())
        value = detail::parse_number<double>(w, "band value");
      else
        throw DomainError("sigma rule band: unexpected argument '" + std::string(part) + "'");
    }
    if (l_cut < 0 || std::isnan(value)) throw DomainError("sigma rule band needs l<=N and value=");
    rule = band(l_cut, value);
  } else {
    throw DomainError("unknown sigma rule '" + std::string(name) + "'");
  }
  if (!std::isfinite(rule.scale_) || !std::isfinite(rule.gamma_)) throw DomainError("sigma rule: non-finite parameter");
  return rule;
}

struct NoiseSpec {
  double beta = 2.0;
  SigmaRule sigma;
  double delta = 0.0;
  std::uint64_t seed = 0;
  int n_substeps = 1;
  // Length of the finest noise increment; 0 means one increment per sub-step.
  // Sub-steps that are multiples of it sum fine increments, which couples runs
  // with different step sizes to one noise path.
  double noise_dt = 0.0;

  void validate() const {
    if (!(beta > 0.0 && beta <= 2.0)) throw DomainError("noise: beta must lie in (0, 2]");
    if (!(delta >= 0.0)) throw DomainError("noise: delta must be >= 0");
    if (n_substeps < 1) throw DomainError("noise: n_substeps must be >= 1");
    if (!(noise_dt >= 0.0)) throw DomainError("noise: noise_dt must be >= 0");
  }
};

/// Positive stable variate with E exp(-r X) = exp(-scale_t r^index), from
/// one uniform u in (0,1) and one standard exponential e (Kanter's form of
/// the Chambers-Mallows-Stuck method).
inline double sample_positive_stable(double index, double scale_t, double u, double e) {
  if (!(index > 0.0 && index <= 1.0)) throw DomainError("sample_positive_stable: index must lie in (0, 1]");
  if (!(scale_t >= 0.0)) throw DomainError("sample_positive_stable: negative time");
  if (index == 1.0 || scale_t == 0.0) return scale_t;
  const double a = index;
  const double angle = std::numbers::pi * u;
  const double zolotarev = std::sin(a * angle) / std::pow(std::sin(angle), 1.0 / a) *
                           std::pow(std::sin((1.0 - a) * angle) / e, (1.0 - a) / a);
  return std::pow(scale_t, 1.0 / a) * zolotarev;
}

/// Same, drawing (u, e) from the subordinator stream at `index_counter`.
inline double sample_positive_stable(double index, double scale_t, const CounterRng& rng,
                                     std::uint64_t index_counter) {
  const auto [u, w] = rng.uniforms(Purpose::subordinator, index_counter, 0);
  return sample_positive_stable(index, scale_t, u, -std::log(w));
}

/// Increments of L = W(X) over one or more consecutive noise sub-steps.
///
/// `dL` holds real-basis coordinates per mode, packed like SpectralField:
/// entry (l, m) is a + i b where a drives unit_mode(l, m) and b drives
/// unit_mode(l, -m) (b = 0 for m = 0).
struct LevyIncrementBlock {
  double dt = 0.0;
  double dX = 0.0;
  int lmax = 0;
  std::vector<Complex> dL;

  Complex operator()(int l, int m) const { return dL[triangular_index(l, m)]; }
};

/// Increment over sub-steps [first, first + count) of length h each, for modes
/// l = 1..lmax. Sub-step j always uses the same random numbers, so coarse
/// blocks are exact sums of fine ones and runs at different resolutions are
/// driven by one noise path.
inline LevyIncrementBlock levy_increment_block(const NoiseSpec& spec, int lmax, double h, const CounterRng& rng,
                                               std::uint64_t first, std::uint64_t count = 1, int workers = 1) {
  spec.validate();
  if (!(h > 0.0)) throw DomainError("levy_increment_block: step must be positive");
  LevyIncrementBlock block;
  block.dt = h * static_cast<double>(count);
  block.lmax = lmax;
  block.dL.assign(triangular_size(lmax), Complex{});

  std::vector<double> root_dx(count);
  for (std::uint64_t j = 0; j < count; ++j) {
    const double dx = sample_positive_stable(spec.beta / 2.0, h, rng, first + j);
    block.dX += dx;
    root_dx[j] = std::sqrt(dx);
  }
  parallel_for(static_cast<std::size_t>(lmax), workers, [&](std::size_t i) {
    const int l = static_cast<int>(i) + 1;
    for (int m = 0; m <= l; ++m) {
      const auto slot = triangular_index(l, m);
      double a = 0.0;
      double b = 0.0;
      for (std::uint64_t j = 0; j < count; ++j) {
        const auto [xa, xb] = rng.normals(Purpose::gaussian, first + j, static_cast<std::uint32_t>(slot));
        a += root_dx[j] * xa;
        b += root_dx[j] * xb;
      }
      block.dL[slot] = Complex(a, m == 0 ? 0.0 : b);
    }
  });
  return block;
}

struct SummabilityOptions {
  long l_star = 1'000'000;  // partial sums run to this degree
  double rel_tol = 1e-2;    // tail bound must be below rel_tol * value
};

struct SummabilityReport {
  double value = 0.0;             // sum_{l <= L*} |sigma_l|^beta lambda_l^{beta delta}
  double tail_bound = 0.0;        // integral-test bound on the rest
  bool converged = true;
  double growth_exponent = 0.0;   // term ~ l^growth_exponent; series converges iff < -1
  double value_with_multiplicity = 0.0;  // same with weight 2l+1
  double tail_bound_with_multiplicity = 0.0;
  bool converged_with_multiplicity = true;
  long terms = 0;
};

/// Partial sum of |sigma_l|^beta lambda_l^{beta delta} with an integral-test
/// tail. The multiplicity-weighted sum over all (l, m) is reported alongside.
inline SummabilityReport check_summability(const SigmaRule& sigma, double beta, double delta,
                                           SummabilityOptions options = {}) {
  if (!(beta > 0.0 && beta <= 2.0)) throw DomainError("check_summability: beta must lie in (0, 2]");
  if (!(delta >= 0.0)) throw DomainError("check_summability: delta must be >= 0");
  SummabilityReport r;
  const long support = sigma.support_end();
  const long last = support >= 0 ? std::min(support, options.l_star) : options.l_star;
  r.terms = last;
  for (long l = last; l >= 1; --l) {  // small terms first
    const double lam = geometric_eigenvalue(static_cast<int>(l));
    const double term = std::pow(std::abs(sigma(static_cast<int>(l))), beta) * std::pow(lam, beta * delta);
    r.value += term;
    r.value_with_multiplicity += static_cast<double>(2 * l + 1) * term;
  }

  if (support >= 0) {
    r.growth_exponent = -std::numeric_limits<double>::infinity();
    return r;
  }
  // Unbounded support: power law (constant is gamma = 0). With
  // lambda_l <= 2 l^2 the terms are bounded by C l^e and 2l+1 <= 3l.
  const double gamma = sigma.kind() == SigmaRule::Kind::power ? sigma.gamma() : 0.0;
  const double c = std::pow(std::abs(sigma.scale()), beta) * std::pow(2.0, beta * delta);
  const double e = 2.0 * beta * delta - gamma * beta;
  const double x = static_cast<double>(options.l_star);
  auto tail = [&](double exponent, double coeff) {
    if (exponent >= -1.0) return std::numeric_limits<double>::infinity();
    return coeff * std::pow(x, exponent + 1.0) / (-exponent - 1.0);
  };
  r.growth_exponent = e;
  r.tail_bound = tail(e, c);
  r.tail_bound_with_multiplicity = tail(e + 1.0, 3.0 * c);
  r.converged = r.tail_bound <= options.rel_tol * r.value;
  r.converged_with_multiplicity = r.tail_bound_with_multiplicity <= options.rel_tol * r.value_with_multiplicity;
  return r;
}

// Closed-form moments of the stable laws involved.

/// E X_t^q for the positive index-a stable subordinator, q < a.
inline double positive_stable_moment(double a, double q, double t) {
  if (a == 1.0) return std::pow(t, q);
  if (!(q < a)) return std::numeric_limits<double>::infinity();
  return std::pow(t, q / a) * std::tgamma(1.0 - q / a) / std::tgamma(1.0 - q);
}

/// E|xi|^p for a standard normal xi.
inline double normal_abs_moment(double p) {
  return std::pow(2.0, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
}

/// E|L_1(1)|^p for one coordinate of L = W(X); the constant c_p that turns
/// the scale expressions of the moment bounds into exact single-mode moments.
inline double stable_moment_constant(double beta, double p) {
  if (!(p > 0.0) || (beta < 2.0 && !(p < beta))) throw DomainError("stable moments need 0 < p < beta");
  return positive_stable_moment(beta / 2.0, p / 2.0, 1.0) * normal_abs_moment(p);
}

struct MomentEstimate {
  double t = 0.0;
  double mean = 0.0;    // Monte-Carlo E|A^delta G L(t)|^p
  double median = 0.0;  // median of |A^delta G L(t)|^p, meaningful for every beta
  double std_error = 0.0;
};

/// Monte-Carlo estimate of E|A^delta G L(t)|^p at each t in `t_list`, with
/// G L = sum sigma_l L_{l,m} Z_{l,m} truncated at lmax. Each path is built
/// from independent increments between consecutive sorted times.
inline std::vector<MomentEstimate> moment_scaling_estimate(const NoiseSpec& spec, double delta, double p,
                                                           std::vector<double> t_list, int n_paths, int lmax,
                                                           int workers = 1) {
  spec.validate();
  if (!(p > 0.0 && p < spec.beta)) throw DomainError("moment_scaling_estimate: p < beta required");
  if (n_paths < 1 || lmax < 1) throw DomainError("moment_scaling_estimate: need n_paths >= 1 and lmax >= 1");
  std::sort(t_list.begin(), t_list.end());
  if (t_list.empty() || !(t_list.front() > 0.0)) throw DomainError("moment_scaling_estimate: times must be positive");

  std::vector<double> weight(static_cast<std::size_t>(lmax) + 1, 0.0);
  for (int l = 1; l <= lmax; ++l)
    weight[static_cast<std::size_t>(l)] = spec.sigma(l) * spec.sigma(l) * std::pow(geometric_eigenvalue(l), 2.0 * delta);

  const std::size_t nt = t_list.size();
  std::vector<double> samples(nt * static_cast<std::size_t>(n_paths));
  parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t path) {
    const CounterRng rng(spec.seed, path);
    std::vector<Complex> level(triangular_size(lmax), Complex{});
    double prev = 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
      const auto inc = levy_increment_block(spec, lmax, t_list[k] - prev, rng, k);
      prev = t_list[k];
      double norm2 = 0.0;
      for (int l = 1; l <= lmax; ++l) {
        double degree = 0.0;
        for (int m = 0; m <= l; ++m) {
          auto& x = level[triangular_index(l, m)];
          x += inc(l, m);
          degree += std::norm(x);
        }
        norm2 += weight[static_cast<std::size_t>(l)] * degree;
      }
      samples[k * static_cast<std::size_t>(n_paths) + path] = std::pow(norm2, p / 2.0);
    }
  });

  std::vector<MomentEstimate> out;
  for (std::size_t k = 0; k < nt; ++k) {
    std::vector<double> s(samples.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(n_paths)),
                          samples.begin() + static_cast<std::ptrdiff_t>((k + 1) * static_cast<std::size_t>(n_paths)));
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= n_paths;
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    const double se = n_paths > 1 ? std::sqrt(var / (n_paths - 1) / n_paths) : 0.0;
    auto mid = s.begin() + n_paths / 2;
    std::nth_element(s.begin(), mid, s.end());
    out.push_back({t_list[k], mean, *mid, se});
  }
  return out;
}

/// Least-squares slope of log(y) against log(x).
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("log_log_slope: need two or more points");
  double mx = 0.0, my = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace snse
