#include "prismquant/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prismquant/errors.hpp"
#include "prismquant/rng.hpp"

namespace prismquant {

namespace {

MixtureDictionary draw_dictionary(const SynthSpec& spec, Rng& rng) {
  if (spec.k < 1 || spec.n < 1) throw DomainError("synth: k and n must be >= 1");
  if (!(spec.variance_min > 0.0) || spec.variance_max < spec.variance_min) {
    throw DomainError("synth: variance range must be positive and ordered");
  }

  // Normalized exponentials: uniform on the probability simplex.
  std::vector<double> priors(spec.k);
  double total = 0.0;
  for (double& p : priors) {
    p = rng.exponential();
    total += p;
  }
  for (double& p : priors) p /= total;

  std::vector<Vec> means(spec.k, Vec(spec.n, 0.0));
  std::vector<EigenDecomposition> eigs(spec.k);
  const double log_lo = std::log(spec.variance_min);
  const double log_hi = std::log(spec.variance_max);
  for (std::size_t c = 0; c < spec.k; ++c) {
    Vec eigenvalues(spec.n);
    for (double& v : eigenvalues) {
      const double u = rng.uniform();
      v = spec.log_uniform_eigenvalues
              ? std::exp(log_lo + u * (log_hi - log_lo))
              : spec.variance_min + u * (spec.variance_max - spec.variance_min);
    }
    std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<double>());

    Matrix gaussian(spec.n, spec.n);
    for (std::size_t i = 0; i < spec.n; ++i)
      for (std::size_t j = 0; j < spec.n; ++j) gaussian(i, j) = rng.gaussian();
    Matrix basis = qr_orthonormal(gaussian);

    // Same sign convention as sym_eig so serialized dictionaries are
    // reproducible regardless of how they were built.
    for (std::size_t col = 0; col < spec.n; ++col) {
      std::size_t arg = 0;
      double best = -1.0;
      for (std::size_t row = 0; row < spec.n; ++row) {
        const double mag = std::abs(basis(row, col));
        if (mag > best) {
          best = mag;
          arg = row;
        }
      }
      if (basis(arg, col) < 0.0) {
        for (std::size_t row = 0; row < spec.n; ++row) basis(row, col) = -basis(row, col);
      }
    }
    eigs[c].eigenvalues = std::move(eigenvalues);
    eigs[c].basis = std::move(basis);
  }
  return make_dictionary_from_eigs(std::move(priors), std::move(means), std::move(eigs));
}

}  // namespace

MixtureDictionary synth_dictionary(const SynthSpec& spec) {
  Rng rng(spec.seed);
  return draw_dictionary(spec, rng);
}

SynthResult synth_mixture(const SynthSpec& spec) {
  Rng rng(spec.seed);
  SynthResult out;
  out.dictionary = draw_dictionary(spec, rng);
  out.samples = sample(out.dictionary, spec.sample_count, rng.fork_seed());
  return out;
}

}  // namespace prismquant
