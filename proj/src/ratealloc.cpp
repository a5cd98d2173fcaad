#include "prismquant/ratealloc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prismquant/errors.hpp"

namespace prismquant {

namespace {

double positive_half_log2(double lambda, double level) {
  return lambda > level ? 0.5 * std::log2(lambda / level) : 0.0;
}

// Shared bisection driver: f must be monotone in log(level).
template <typename F>
double bisect_level(double lo, double hi, double target, double tol, bool absolute_tol, F f) {
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  // f is non-increasing for rate targets and handled pre-inverted for
  // distortion, so f(lo) >= target >= f(hi) on entry.
  double best = hi;
  double best_err = std::abs(f_hi - target);
  if (std::abs(f_lo - target) < best_err) {
    best = lo;
    best_err = std::abs(f_lo - target);
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = std::sqrt(lo) * std::sqrt(hi);  // geometric mid: levels span decades
    const double val = f(mid);
    const double err = std::abs(val - target);
    if (err < best_err) {
      best = mid;
      best_err = err;
    }
    const double threshold = absolute_tol ? tol : tol * std::max(std::abs(target), 1e-300);
    if (err <= threshold) return mid;
    if (val > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi <= lo || (hi - lo) <= 1e-18 * hi) break;
  }
  return best;
}

}  // namespace

PooledSpectrum pooled_spectrum(const MixtureDictionary& dict) {
  PooledSpectrum s;
  s.k = dict.k;
  s.n = dict.n;
  s.modes.reserve(dict.k * dict.n);
  const double inv_n = 1.0 / static_cast<double>(dict.n);
  for (std::size_t c = 0; c < dict.k; ++c) {
    for (std::size_t i = 0; i < dict.n; ++i) {
      const double lambda = dict.eigenvalue(c, i);
      if (!(lambda > 0.0)) {
        throw DefinitenessError("pooled_spectrum: non-positive eigenvalue at component " +
                                    std::to_string(c) + ", mode " + std::to_string(i),
                                i);
      }
      s.modes.push_back({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(i), lambda,
                         dict.priors[c] * inv_n});
      s.max_eigenvalue = std::max(s.max_eigenvalue, lambda);
      s.total_distortion += dict.priors[c] * inv_n * lambda;
    }
  }
  return s;
}

RdEval evaluate(const PooledSpectrum& spectrum, double level) {
  if (!(level > 0.0)) throw DomainError("evaluate: water level must be positive");
  RdEval out{0.0, 0.0};
  for (const auto& mode : spectrum.modes) {
    out.rate += mode.weight * positive_half_log2(mode.eigenvalue, level);
    out.distortion += mode.weight * std::min(mode.eigenvalue, level);
  }
  return out;
}

double solve_level_for_rate(const PooledSpectrum& spectrum, double rate_target) {
  if (rate_target < 0.0) throw DomainError("solve_level_for_rate: negative rate target");
  if (rate_target == 0.0) return spectrum.max_eigenvalue;

  double lo = 1e-15 * spectrum.max_eigenvalue;
  const double hi = spectrum.max_eigenvalue;
  auto rate_at = [&](double mu) { return evaluate(spectrum, mu).rate; };
  // Extremely large targets fall outside the standard bracket; extend down.
  while (rate_at(lo) < rate_target && lo > 1e-290) lo *= 1e-3;
  return bisect_level(lo, hi, rate_target, 1e-10, /*absolute_tol=*/true, rate_at);
}

double solve_level_for_distortion(const PooledSpectrum& spectrum, double distortion_target) {
  const double d_max = spectrum.total_distortion;
  if (!(distortion_target > 0.0) || distortion_target > d_max * (1.0 + 1e-12)) {
    throw DomainError("solve_level_for_distortion: target " + std::to_string(distortion_target) +
                      " outside attainable (0, " + std::to_string(d_max) + "]");
  }
  if (distortion_target >= d_max) return spectrum.max_eigenvalue;

  const double lo = 1e-18 * spectrum.max_eigenvalue;
  const double hi = spectrum.max_eigenvalue;
  // Distortion increases with the level; negate to reuse the decreasing driver.
  auto neg_distortion = [&](double mu) { return -evaluate(spectrum, mu).distortion; };
  return bisect_level(lo, hi, -distortion_target, 1e-12, /*absolute_tol=*/false, neg_distortion);
}

WaterAllocation allocation(const PooledSpectrum& spectrum, double level) {
  if (!(level > 0.0)) throw DomainError("allocation: water level must be positive");
  WaterAllocation out;
  out.level = level;
  const std::size_t count = spectrum.modes.size();
  out.rates.resize(count);
  out.distortions.resize(count);
  out.active.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    const auto& mode = spectrum.modes[s];
    const bool active = mode.eigenvalue > level;
    out.active[s] = active;
    out.rates[s] = active ? 0.5 * std::log2(mode.eigenvalue / level) : 0.0;
    out.distortions[s] = active ? level : mode.eigenvalue;
    out.total_rate += mode.weight * out.rates[s];
    out.total_distortion += mode.weight * out.distortions[s];
  }
  return out;
}

SandwichBounds sandwich(const MixtureDictionary& dict, double level) {
  const PooledSpectrum spectrum = pooled_spectrum(dict);
  const double r_cond = evaluate(spectrum, level).rate;
  const double label_rate = entropy_bits(dict.priors) / static_cast<double>(dict.n);
  SandwichBounds out;
  out.conditional_rate = r_cond;
  out.label_rate = label_rate;
  out.upper_rate = r_cond + label_rate;
  out.log2k_over_n = std::log2(static_cast<double>(dict.k)) / static_cast<double>(dict.n);
  return out;
}

EntropyTerms entropy_terms(const MixtureDictionary& dict) {
  constexpr double kLog2TwoPiE = 4.0941911703612822;  // log2(2*pi*e)
  constexpr double kLn2 = 0.6931471805599453;
  double h_cond = 0.0;
  for (std::size_t c = 0; c < dict.k; ++c) {
    h_cond += dict.priors[c] * 0.5 *
              (static_cast<double>(dict.n) * kLog2TwoPiE + dict.log_dets[c] / kLn2);
  }
  EntropyTerms out;
  out.conditional_bits = h_cond;
  out.label_bits = entropy_bits(dict.priors);
  out.lower = h_cond;
  out.upper = h_cond + out.label_bits;
  return out;
}

WutcAllocation wutc_allocation(const MixtureDictionary& dict, double per_class_rate) {
  if (per_class_rate < 0.0) throw DomainError("wutc_allocation: negative rate budget");
  WutcAllocation out;
  out.class_levels.resize(dict.k);
  out.rates.assign(dict.k * dict.n, 0.0);
  out.rate = per_class_rate;
  out.distortion = 0.0;
  const double inv_n = 1.0 / static_cast<double>(dict.n);
  for (std::size_t c = 0; c < dict.k; ++c) {
    // Single-class spectrum: every mode carries weight 1/n.
    PooledSpectrum cls;
    cls.k = 1;
    cls.n = dict.n;
    for (std::size_t i = 0; i < dict.n; ++i) {
      const double lambda = dict.eigenvalue(c, i);
      cls.modes.push_back({0, static_cast<std::uint32_t>(i), lambda, inv_n});
      cls.max_eigenvalue = std::max(cls.max_eigenvalue, lambda);
      cls.total_distortion += inv_n * lambda;
    }
    const double mu_c = solve_level_for_rate(cls, per_class_rate);
    out.class_levels[c] = mu_c;
    double d_c = 0.0;
    for (std::size_t i = 0; i < dict.n; ++i) {
      const double lambda = dict.eigenvalue(c, i);
      out.rates[c * dict.n + i] = positive_half_log2(lambda, mu_c);
      d_c += inv_n * std::min(lambda, mu_c);
    }
    out.distortion += dict.priors[c] * d_c;
  }
  return out;
}

}  // namespace prismquant
