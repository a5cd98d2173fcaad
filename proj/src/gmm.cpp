#include "prismquant/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prismquant/errors.hpp"
#include "prismquant/rng.hpp"
#include "prismquant/serialize.hpp"

#include "json.hpp"

namespace prismquant {

namespace {

constexpr double kLn2Pi = 1.8378770664093454835606594728112353;

void validate_priors(std::span<const double> priors) {
  double sum = 0.0;
  for (double p : priors) {
    if (!(p > 0.0)) throw DomainError("dictionary prior must be positive");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw DomainError("dictionary priors must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

// ln N(x; mu_c, R_c) using the cached Cholesky factor.
double log_density(std::span<const double> x, const MixtureDictionary& dict, std::size_t c) {
  const double maha = mahalanobis_sq(x, dict.means[c], dict.chols[c]);
  return -0.5 * (static_cast<double>(dict.n) * kLn2Pi + dict.log_dets[c] + maha);
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace

MixtureDictionary make_dictionary(std::vector<double> priors, std::vector<Vec> means,
                                  std::vector<SymMatrix> covariances) {
  validate_priors(priors);
  MixtureDictionary d;
  d.k = priors.size();
  d.n = means.at(0).size();
  d.priors = std::move(priors);
  d.means = std::move(means);
  d.covariances = std::move(covariances);
  d.eigs.reserve(d.k);
  d.chols.reserve(d.k);
  d.log_dets.reserve(d.k);
  for (std::size_t c = 0; c < d.k; ++c) {
    if (d.means[c].size() != d.n || d.covariances[c].size() != d.n) {
      throw DomainError("dictionary component dimension mismatch");
    }
    d.eigs.push_back(sym_eig(d.covariances[c]));
    d.chols.push_back(cholesky(d.covariances[c]));
    d.log_dets.push_back(d.chols.back().log_det());
  }
  return d;
}

MixtureDictionary make_dictionary_from_eigs(std::vector<double> priors, std::vector<Vec> means,
                                            std::vector<EigenDecomposition> eigs) {
  validate_priors(priors);
  MixtureDictionary d;
  d.k = priors.size();
  d.n = means.at(0).size();
  d.priors = std::move(priors);
  d.means = std::move(means);
  d.eigs = std::move(eigs);
  d.covariances.reserve(d.k);
  d.chols.reserve(d.k);
  d.log_dets.reserve(d.k);
  for (std::size_t c = 0; c < d.k; ++c) {
    d.covariances.push_back(
        SymMatrix::from_eigensystem(d.eigs[c].basis, d.eigs[c].eigenvalues));
    d.chols.push_back(cholesky(d.covariances[c]));
    d.log_dets.push_back(d.chols.back().log_det());
  }
  return d;
}

std::vector<double> responsibilities(std::span<const double> x, const MixtureDictionary& dict) {
  std::vector<double> log_post(dict.k);
  for (std::size_t c = 0; c < dict.k; ++c) {
    log_post[c] = std::log(dict.priors[c]) + log_density(x, dict, c);
  }
  const double lse = log_sum_exp(log_post);
  std::vector<double> r(dict.k);
  for (std::size_t c = 0; c < dict.k; ++c) r[c] = std::exp(log_post[c] - lse);
  return r;
}

std::uint32_t map_label(std::span<const double> x, const MixtureDictionary& dict) {
  std::uint32_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < dict.k; ++c) {
    // n-dependent constant dropped; strictly greater keeps ties on the
    // smallest index.
    const double score = std::log(dict.priors[c]) - 0.5 * dict.log_dets[c] -
                         0.5 * mahalanobis_sq(x, dict.means[c], dict.chols[c]);
    if (score > best_score) {
      best_score = score;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

LabeledSamples sample(const MixtureDictionary& dict, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  LabeledSamples out;
  out.count = count;
  out.dim = dict.n;
  out.values.resize(count * dict.n);
  out.labels.resize(count);
  Vec z(dict.n);
  for (std::size_t t = 0; t < count; ++t) {
    const double u = rng.uniform();
    double cdf = 0.0;
    std::uint32_t label = static_cast<std::uint32_t>(dict.k - 1);
    for (std::size_t c = 0; c < dict.k; ++c) {
      cdf += dict.priors[c];
      if (u < cdf) {
        label = static_cast<std::uint32_t>(c);
        break;
      }
    }
    out.labels[t] = label;
    for (std::size_t i = 0; i < dict.n; ++i) z[i] = rng.gaussian();
    const Vec lx = dict.chols[label].multiply(z);
    for (std::size_t i = 0; i < dict.n; ++i) {
      out.values[t * dict.n + i] = dict.means[label][i] + lx[i];
    }
  }
  return out;
}

double bhattacharyya_distance(const MixtureDictionary& dict, std::size_t c, std::size_t j) {
  if (c == j) throw DomainError("bhattacharyya_distance: components must differ");
  const std::size_t n = dict.n;
  SymMatrix mid(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b <= a; ++b)
      mid.set(a, b, 0.5 * (dict.covariances[c](a, b) + dict.covariances[j](a, b)));
  const CholeskyFactor mid_chol = cholesky(mid);
  const double maha = mahalanobis_sq(dict.means[c], dict.means[j], mid_chol);
  const double log_det_mid = mid_chol.log_det();
  return 0.125 * maha + 0.5 * (log_det_mid - 0.5 * (dict.log_dets[c] + dict.log_dets[j]));
}

double map_error_union_bound(const MixtureDictionary& dict) {
  double bound = 0.0;
  for (std::size_t c = 0; c < dict.k; ++c) {
    for (std::size_t j = c + 1; j < dict.k; ++j) {
      bound += std::sqrt(dict.priors[c] * dict.priors[j]) *
               std::exp(-bhattacharyya_distance(dict, c, j));
    }
  }
  return std::clamp(bound, 0.0, 1.0);
}

double entropy_bits(std::span<const double> probabilities) {
  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  const double cap = std::log2(static_cast<double>(probabilities.size()));
  return std::clamp(h, 0.0, cap);
}

// --- EM ---

namespace detail {

bool replace_degenerate_components(std::vector<double>& priors, std::vector<Vec>& means,
                                   std::vector<SymMatrix>& covariances, double threshold) {
  const std::size_t k = priors.size();
  bool changed = false;
  for (std::size_t c = 0; c < k; ++c) {
    if (priors[c] >= threshold) continue;
    std::size_t largest = 0;
    for (std::size_t d = 1; d < k; ++d) {
      if (priors[d] > priors[largest]) largest = d;
    }
    if (largest == c) continue;  // nothing healthy to split
    const EigenDecomposition eig = sym_eig(covariances[largest]);
    const double scale = 0.1 * std::sqrt(std::max(eig.eigenvalues[0], 0.0));
    Vec reseeded = means[largest];
    for (std::size_t i = 0; i < reseeded.size(); ++i) {
      reseeded[i] += scale * eig.basis(i, 0);
    }
    means[c] = std::move(reseeded);
    covariances[c] = covariances[largest];
    priors[c] = priors[largest] / 2.0;
    priors[largest] /= 2.0;
    changed = true;
  }
  if (changed) {
    double sum = 0.0;
    for (double p : priors) sum += p;
    for (double& p : priors) p /= sum;
  }
  return changed;
}

}  // namespace detail

namespace {

struct EmState {
  std::vector<double> priors;
  std::vector<Vec> means;
  std::vector<SymMatrix> covariances;
  std::vector<CholeskyFactor> chols;
  std::vector<double> log_dets;
};

void refresh_factors(EmState& st) {
  const std::size_t k = st.priors.size();
  st.chols.resize(k);
  st.log_dets.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    st.chols[c] = cholesky(st.covariances[c]);
    st.log_dets[c] = st.chols[c].log_det();
  }
}

SymMatrix sample_covariance(const LabeledSamples& samples, std::span<const double> mean) {
  const std::size_t n = samples.dim;
  SymMatrix cov(n);
  Vec diff(n);
  for (std::size_t t = 0; t < samples.count; ++t) {
    const auto x = samples.row(t);
    for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - mean[i];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) cov.add(i, j, diff[i] * diff[j]);
  }
  const double inv = 1.0 / static_cast<double>(samples.count);
  SymMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) out.set(i, j, cov(i, j) * inv);
  return out;
}

void add_tikhonov(SymMatrix& cov, double scale) {
  const double lambda = scale * cov.trace() / static_cast<double>(cov.size());
  for (std::size_t i = 0; i < cov.size(); ++i) cov.add(i, i, lambda);
}

// k-means++-style seeding: first mean uniform, subsequent means sampled with
// probability proportional to squared distance from the nearest seed.
std::vector<Vec> seed_means(const LabeledSamples& samples, std::size_t k, Rng& rng) {
  const std::size_t m = samples.count;
  const std::size_t n = samples.dim;
  std::vector<Vec> means;
  means.reserve(k);
  std::vector<double> dist_sq(m, std::numeric_limits<double>::infinity());

  const auto first = samples.row(rng.index(m));
  means.emplace_back(first.begin(), first.end());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      const auto x = samples.row(t);
      const auto& latest = means.back();
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double delta = x[i] - latest[i];
        d += delta * delta;
      }
      dist_sq[t] = std::min(dist_sq[t], d);
      total += dist_sq[t];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = m - 1;
      for (std::size_t t = 0; t < m; ++t) {
        acc += dist_sq[t];
        if (u < acc) {
          pick = t;
          break;
        }
      }
    } else {
      pick = rng.index(m);
    }
    const auto chosen = samples.row(pick);
    means.emplace_back(chosen.begin(), chosen.end());
  }
  return means;
}

struct EmRun {
  EmState state;
  std::vector<double> history;
  std::vector<std::size_t> prune_events;
  double final_loglik = -std::numeric_limits<double>::infinity();
};

EmRun run_em_once(const LabeledSamples& samples, std::size_t k, const EmConfig& cfg,
                  std::uint64_t seed) {
  const std::size_t m = samples.count;
  const std::size_t n = samples.dim;
  Rng rng(seed);

  EmState st;
  st.means = seed_means(samples, k, rng);
  st.priors.assign(k, 1.0 / static_cast<double>(k));
  Vec global_mean(n, 0.0);
  for (std::size_t t = 0; t < m; ++t) {
    const auto x = samples.row(t);
    for (std::size_t i = 0; i < n; ++i) global_mean[i] += x[i];
  }
  for (double& v : global_mean) v /= static_cast<double>(m);
  SymMatrix global_cov = sample_covariance(samples, global_mean);
  add_tikhonov(global_cov, cfg.tikhonov_scale);
  st.covariances.assign(k, global_cov);
  refresh_factors(st);

  EmRun run;
  std::vector<double> log_post(k);
  std::vector<double> resp(m * k);
  std::vector<double> weight(k);
  double prev_loglik = -std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    // E-step and average log-likelihood of the current parameters.
    double loglik = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      const auto x = samples.row(t);
      for (std::size_t c = 0; c < k; ++c) {
        const double maha = mahalanobis_sq(x, st.means[c], st.chols[c]);
        log_post[c] = std::log(st.priors[c]) -
                      0.5 * (static_cast<double>(n) * kLn2Pi + st.log_dets[c] + maha);
      }
      const double lse = log_sum_exp(log_post);
      loglik += lse;
      for (std::size_t c = 0; c < k; ++c) resp[t * k + c] = std::exp(log_post[c] - lse);
    }
    loglik /= static_cast<double>(m);
    run.history.push_back(loglik);

    const bool converged =
        iter > 0 && std::abs(loglik - prev_loglik) <
                        cfg.loglik_rel_tol * std::max(std::abs(prev_loglik), 1e-12);
    prev_loglik = loglik;
    if (converged) break;

    // M-step: weighted moments.
    for (std::size_t c = 0; c < k; ++c) {
      weight[c] = 0.0;
      for (std::size_t t = 0; t < m; ++t) weight[c] += resp[t * k + c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      st.priors[c] = weight[c] / static_cast<double>(m);
      Vec mu(n, 0.0);
      if (weight[c] > 0.0) {
        for (std::size_t t = 0; t < m; ++t) {
          const double r = resp[t * k + c];
          if (r == 0.0) continue;
          const auto x = samples.row(t);
          for (std::size_t i = 0; i < n; ++i) mu[i] += r * x[i];
        }
        for (double& v : mu) v /= weight[c];
        SymMatrix cov(n);
        Vec diff(n);
        for (std::size_t t = 0; t < m; ++t) {
          const double r = resp[t * k + c];
          if (r == 0.0) continue;
          const auto x = samples.row(t);
          for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - mu[i];
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) cov.add(i, j, r * diff[i] * diff[j]);
        }
        SymMatrix scaled(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j <= i; ++j) scaled.set(i, j, cov(i, j) / weight[c]);
        st.means[c] = std::move(mu);
        st.covariances[c] = std::move(scaled);
      }
      add_tikhonov(st.covariances[c], cfg.tikhonov_scale);
    }

    if (detail::replace_degenerate_components(st.priors, st.means, st.covariances,
                                              cfg.prune_prior_threshold)) {
      run.prune_events.push_back(iter);
    }
    refresh_factors(st);
  }

  run.final_loglik = run.history.empty() ? -std::numeric_limits<double>::infinity()
                                         : run.history.back();
  run.state = std::move(st);
  return run;
}

}  // namespace

MixtureDictionary fit_em(const LabeledSamples& samples, std::size_t k, const EmConfig& cfg,
                         EmReport* report) {
  if (k < 1) throw DomainError("fit_em: k must be >= 1");
  if (samples.count < k) {
    throw InsufficientDataError("fit_em: " + std::to_string(samples.count) +
                                " samples for k = " + std::to_string(k));
  }
  for (double v : samples.values) {
    if (!std::isfinite(v)) throw RejectedInputError("fit_em: non-finite sample value");
  }
  if (cfg.restarts < 1) throw DomainError("fit_em: restarts must be >= 1");

  EmRun best;
  std::size_t best_restart = 0;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    EmRun run = run_em_once(samples, k, cfg, cfg.seed + 0x9E3779B97F4A7C15ull * r);
    if (r == 0 || run.final_loglik > best.final_loglik) {
      best = std::move(run);
      best_restart = r;
    }
  }

  if (report) {
    report->loglik_history = best.history;
    report->prune_events = best.prune_events;
    report->iterations = best.history.size();
    report->best_restart = best_restart;
    report->final_loglik = best.final_loglik;
  }
  // Renormalize away accumulated round-off before the strict validity check.
  double sum = 0.0;
  for (double p : best.state.priors) sum += p;
  for (double& p : best.state.priors) p /= sum;
  return make_dictionary(std::move(best.state.priors), std::move(best.state.means),
                         std::move(best.state.covariances));
}

// --- PQDICT container ---

namespace {
constexpr std::uint16_t kDictVersion = 1;
}

std::vector<std::uint8_t> serialize_dictionary(const MixtureDictionary& dict) {
  ByteWriter w;
  w.magic("PQDICT");
  w.u16(kDictVersion);
  w.u32(static_cast<std::uint32_t>(dict.k));
  w.u32(static_cast<std::uint32_t>(dict.n));
  for (double p : dict.priors) w.f64(p);
  for (const auto& mu : dict.means)
    for (double v : mu) w.f64(v);
  for (const auto& cov : dict.covariances)
    for (std::size_t i = 0; i < dict.n; ++i)
      for (std::size_t j = 0; j <= i; ++j) w.f64(cov(i, j));
  for (const auto& eig : dict.eigs)
    for (double v : eig.eigenvalues) w.f64(v);
  for (const auto& eig : dict.eigs)
    for (std::size_t i = 0; i < dict.n; ++i)
      for (std::size_t j = 0; j < dict.n; ++j) w.f64(eig.basis(i, j));
  const std::uint64_t checksum = fnv1a64(w.bytes());
  w.u64(checksum);
  return w.take();
}

MixtureDictionary parse_dictionary(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw CorruptStreamError("dictionary file too short", 0);
  const std::uint64_t stored_checksum =
      fnv1a64(bytes.subspan(0, bytes.size() - 8)) ;
  ByteReader r(bytes);
  r.expect_magic("PQDICT");
  const std::uint16_t version = r.u16();
  if (version != kDictVersion) {
    throw CorruptStreamError("unsupported dictionary version " + std::to_string(version), 6);
  }
  const std::size_t k = r.u32();
  const std::size_t n = r.u32();
  if (k < 1 || n < 1) throw CorruptStreamError("degenerate dictionary dimensions", r.position());
  // Exact payload size is implied by (k, n); reject before allocating.
  const unsigned __int128 doubles =
      static_cast<unsigned __int128>(k) *
      (1 + n + static_cast<unsigned __int128>(n) * (n + 1) / 2 + n +
       static_cast<unsigned __int128>(n) * n);
  if (doubles * 8 + 8 != static_cast<unsigned __int128>(r.remaining())) {
    throw CorruptStreamError("dictionary payload size inconsistent with header", r.position());
  }

  std::vector<double> priors(k);
  for (double& p : priors) p = r.f64();
  std::vector<Vec> means(k, Vec(n));
  for (auto& mu : means)
    for (double& v : mu) v = r.f64();
  std::vector<SymMatrix> covs(k, SymMatrix(n));
  for (auto& cov : covs)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) cov.set(i, j, r.f64());
  std::vector<EigenDecomposition> eigs(k);
  for (auto& eig : eigs) {
    eig.eigenvalues.resize(n);
    for (double& v : eig.eigenvalues) v = r.f64();
  }
  for (auto& eig : eigs) {
    eig.basis = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) eig.basis(i, j) = r.f64();
  }
  const std::uint64_t trailer = r.u64();
  if (trailer != stored_checksum) {
    throw CorruptStreamError("dictionary checksum mismatch", bytes.size() - 8);
  }

  MixtureDictionary d;
  d.k = k;
  d.n = n;
  validate_priors(priors);
  d.priors = std::move(priors);
  d.means = std::move(means);
  d.covariances = std::move(covs);
  d.eigs = std::move(eigs);
  d.chols.reserve(k);
  d.log_dets.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    d.chols.push_back(cholesky(d.covariances[c]));
    d.log_dets.push_back(d.chols.back().log_det());
  }
  return d;
}

std::uint64_t dictionary_checksum(const MixtureDictionary& dict) {
  const auto bytes = serialize_dictionary(dict);
  // Trailer value, i.e. the checksum of everything before it.
  return fnv1a64(std::span<const std::uint8_t>(bytes).subspan(0, bytes.size() - 8));
}

void save_dictionary(const MixtureDictionary& dict, const std::string& path) {
  write_file(path, serialize_dictionary(dict));
}

MixtureDictionary load_dictionary(const std::string& path) {
  return parse_dictionary(read_file(path));
}

std::string dictionary_to_json(const MixtureDictionary& dict) {
  nlohmann::json j;
  j["format"] = "pqdict";
  j["version"] = kDictVersion;
  j["k"] = dict.k;
  j["n"] = dict.n;
  j["priors"] = dict.priors;
  j["means"] = dict.means;
  auto matrix_rows = [&](const auto& get, std::size_t rows, std::size_t cols) {
    std::vector<std::vector<double>> out(rows, std::vector<double>(cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t jj = 0; jj < cols; ++jj) out[i][jj] = get(i, jj);
    return out;
  };
  for (std::size_t c = 0; c < dict.k; ++c) {
    nlohmann::json comp;
    comp["covariance"] = matrix_rows(
        [&](std::size_t i, std::size_t jj) { return dict.covariances[c](i, jj); }, dict.n,
        dict.n);
    comp["eigenvalues"] = dict.eigs[c].eigenvalues;
    comp["basis"] = matrix_rows(
        [&](std::size_t i, std::size_t jj) { return dict.eigs[c].basis(i, jj); }, dict.n,
        dict.n);
    j["components"].push_back(std::move(comp));
  }
  j["checksum"] = dictionary_checksum(dict);
  return j.dump(2);
}

}  // namespace prismquant
