#pragma once

#include <cstdint>
#include <vector>

#include "prismquant/gmm.hpp"

namespace prismquant {

/// One transform mode (c, i): eigenvalue lambda_{c,i} with weight pi_c / n.
struct SpectrumMode {
  std::uint32_t component;
  std::uint32_t index;
  double eigenvalue;
  double weight;
};

/// All K*n eigenmodes pooled across components, the object a single global
/// water level operates on.
struct PooledSpectrum {
  std::size_t k = 0;
  std::size_t n = 0;
  std::vector<SpectrumMode> modes;  // component-major, eigen index ascending
  double max_eigenvalue = 0.0;
  double total_distortion = 0.0;  // sum weight * lambda, the rate-0 distortion

  std::size_t mode_slot(std::size_t c, std::size_t i) const { return c * n + i; }
};

struct RdEval {
  double rate;        // bits per source dimension
  double distortion;  // per-dimension MSE
};

/// Per-mode rates/distortions induced by one water level.
struct WaterAllocation {
  double level = 0.0;
  std::vector<double> rates;        // bits per mode, pooled order
  std::vector<double> distortions;  // per mode
  std::vector<bool> active;         // lambda > level
  double total_rate = 0.0;          // bits/dim
  double total_distortion = 0.0;    // per-dim MSE
};

/// Genie-aided bound pair at one water level.
struct SandwichBounds {
  double conditional_rate;  // bits/dim, the converse
  double label_rate;        // H(C)/n bits/dim
  double upper_rate;        // conditional_rate + label_rate
  double log2k_over_n;
};

struct EntropyTerms {
  double conditional_bits;  // h(X|C) in bits
  double label_bits;        // H(C) in bits
  double lower;             // = conditional_bits
  double upper;             // conditional_bits + label_bits
};

/// Per-class water levels under an equal per-class rate budget.
struct WutcAllocation {
  std::vector<double> class_levels;
  std::vector<double> rates;  // bits per mode, pooled order
  double rate;                // bits/dim (the shared per-class budget)
  double distortion;          // per-dim MSE, prior-weighted
};

PooledSpectrum pooled_spectrum(const MixtureDictionary& dict);

/// (R, D) at water level mu: R = sum w * 1/2 [log2(lambda/mu)]_+,
/// D = sum w * min(lambda, mu).
RdEval evaluate(const PooledSpectrum& spectrum, double level);

/// Bisection for the level hitting a target rate within 1e-10 bits/dim.
/// rate_target = 0 returns max eigenvalue.
double solve_level_for_rate(const PooledSpectrum& spectrum, double rate_target);

/// Bisection for the level hitting a target distortion within 1e-12 relative.
double solve_level_for_distortion(const PooledSpectrum& spectrum, double distortion_target);

WaterAllocation allocation(const PooledSpectrum& spectrum, double level);

SandwichBounds sandwich(const MixtureDictionary& dict, double level);

EntropyTerms entropy_terms(const MixtureDictionary& dict);

/// Independent per-class reverse waterfilling at per-class rate budget
/// per_class_rate (bits/dim); the baseline the single global level dominates.
WutcAllocation wutc_allocation(const MixtureDictionary& dict, double per_class_rate);

}  // namespace prismquant
