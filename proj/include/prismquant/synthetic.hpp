#pragma once

#include <cstdint>

#include "prismquant/gmm.hpp"

namespace prismquant {

/// Synthetic mixture-generation protocol: priors uniform on the simplex,
/// eigenvalues drawn from [variance_min, variance_max], zero means, bases
/// from QR factors of seeded Gaussian matrices.
struct SynthSpec {
  std::size_t k = 1;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  double variance_min = 0.1;
  double variance_max = 10.0;
  bool log_uniform_eigenvalues = false;  // uniform draw by default
  std::size_t sample_count = 100000;
};

struct SynthResult {
  MixtureDictionary dictionary;
  LabeledSamples samples;
};

SynthResult synth_mixture(const SynthSpec& spec);

/// Dictionary only (no sample draw), same parameter stream as synth_mixture.
MixtureDictionary synth_dictionary(const SynthSpec& spec);

}  // namespace prismquant
