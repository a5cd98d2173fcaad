#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prismquant/linalg.hpp"

namespace prismquant {

/// Training / evaluation vectors, row-major m x n. Oracle component labels
/// (0-based) are present only for synthetically generated data.
struct LabeledSamples {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> values;          // count * dim
  std::vector<std::uint32_t> labels;   // empty when unavailable

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
  bool has_labels() const { return !labels.empty(); }
};

/// The shared probabilistic dictionary: priors, means, covariances and the
/// cached spectral decompositions and Cholesky factors every consumer needs.
struct MixtureDictionary {
  std::size_t k = 0;
  std::size_t n = 0;
  std::vector<double> priors;
  std::vector<Vec> means;
  std::vector<SymMatrix> covariances;
  std::vector<EigenDecomposition> eigs;
  std::vector<CholeskyFactor> chols;
  std::vector<double> log_dets;  // ln det R_c

  double eigenvalue(std::size_t c, std::size_t i) const { return eigs[c].eigenvalues[i]; }
};

/// Validates invariants (priors sum to 1, PD covariances), computes caches.
MixtureDictionary make_dictionary(std::vector<double> priors, std::vector<Vec> means,
                                  std::vector<SymMatrix> covariances);

/// Same but reuses an eigendecomposition already in hand (e.g. a dictionary
/// constructed directly from a spectrum) instead of re-running sym_eig.
MixtureDictionary make_dictionary_from_eigs(std::vector<double> priors, std::vector<Vec> means,
                                            std::vector<EigenDecomposition> eigs);

struct EmConfig {
  std::size_t max_iters = 200;
  double loglik_rel_tol = 1e-6;
  double tikhonov_scale = 1e-4;
  double prune_prior_threshold = 1e-4;
  std::uint64_t seed = 0;
  std::size_t restarts = 3;
};

/// Diagnostics from the winning restart.
struct EmReport {
  std::vector<double> loglik_history;    // average log-likelihood (nats) per iteration
  std::vector<std::size_t> prune_events; // iteration indices where a component was reseeded
  std::size_t iterations = 0;
  std::size_t best_restart = 0;
  double final_loglik = 0.0;
};

/// Posterior responsibilities P(C=c | x), computed in the log domain.
std::vector<double> responsibilities(std::span<const double> x, const MixtureDictionary& dict);

/// EM fit with k-means++ seeding, Tikhonov-regularized M-steps and
/// degenerate-component reseeding. Returns the best of cfg.restarts runs.
MixtureDictionary fit_em(const LabeledSamples& samples, std::size_t k, const EmConfig& cfg,
                         EmReport* report = nullptr);

/// MAP component label (0-based); ties break toward the smallest index.
std::uint32_t map_label(std::span<const double> x, const MixtureDictionary& dict);

/// Draws labeled samples: label from the priors, then x = mu_c + L_c z.
LabeledSamples sample(const MixtureDictionary& dict, std::size_t count, std::uint64_t seed);

/// Pairwise Bhattacharyya distance between components c and j (c != j).
double bhattacharyya_distance(const MixtureDictionary& dict, std::size_t c, std::size_t j);

/// Union bound on MAP labeling error, clamped to [0, 1].
double map_error_union_bound(const MixtureDictionary& dict);

/// Shannon entropy of a probability vector, in bits, clamped to [0, log2 K].
double entropy_bits(std::span<const double> probabilities);

// --- dictionary container (PQDICT) ---

std::vector<std::uint8_t> serialize_dictionary(const MixtureDictionary& dict);
MixtureDictionary parse_dictionary(std::span<const std::uint8_t> bytes);
/// Checksum of the serialized content, as embedded in the file trailer and
/// echoed by coded bitstreams.
std::uint64_t dictionary_checksum(const MixtureDictionary& dict);

void save_dictionary(const MixtureDictionary& dict, const std::string& path);
MixtureDictionary load_dictionary(const std::string& path);

/// Lossless JSON view (64-bit floats survive the decimal round-trip).
std::string dictionary_to_json(const MixtureDictionary& dict);

namespace detail {
/// Reseeds every component whose prior fell below the threshold at the
/// largest-prior component's mean plus a perturbation along its top
/// eigenvector; covariance copied, priors renormalized. Returns whether
/// anything changed. Exposed for direct testing.
bool replace_degenerate_components(std::vector<double>& priors, std::vector<Vec>& means,
                                   std::vector<SymMatrix>& covariances, double threshold);
}  // namespace detail

}  // namespace prismquant
