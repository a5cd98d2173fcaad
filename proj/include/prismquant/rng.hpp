#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace prismquant {

/// Deterministic random source. All variate transforms are spelled out here
/// instead of using std:: distributions, whose algorithms are
/// implementation-defined; every draw sequence is reproducible for a fixed
/// seed regardless of standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t index(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % bound;
    }
  }

  /// Standard normal via Box-Muller; caches the second variate of each pair.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  /// Exponential with unit mean.
  double exponential() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -std::log(u);
  }

  /// Derive an independent child seed (for restarts, per-stage streams).
  std::uint64_t fork_seed() { return engine_() ^ 0x9E3779B97F4A7C15ull; }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace prismquant
