#include "prismquant/quantizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "prismquant/errors.hpp"

namespace prismquant {

namespace {

constexpr double kClipMass = 1e-12;
constexpr double kEntropyTol = 1e-6;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;

// Standard normal pieces.
double std_pdf(double t) {
  return 0.3989422804014326779399460599343819 * std::exp(-0.5 * t * t);
}
double std_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }
double upper_tail(double t) { return 0.5 * std::erfc(t * kInvSqrt2); }

// P(t in [a, b)) for the standard normal, stable far in the tails.
double cell_mass(double a, double b) {
  if (a >= 1.0) return upper_tail(a) - upper_tail(b);
  if (b <= -1.0) return std_cdf(b) - std_cdf(a);
  return std_cdf(b) - std_cdf(a);
}

// Smallest clip index so the mass that would round past it stays < kClipMass.
std::int64_t clip_index_for(double step) {
  std::int64_t index = 1;
  while (2.0 * upper_tail((static_cast<double>(index) + 0.5) * step) >= kClipMass) {
    ++index;
  }
  return index;
}

// Index probabilities of quantizing N(0,1) with step delta; boundary cells
// absorb the clipped tails.
std::vector<double> index_model(double delta, std::int64_t clip) {
  std::vector<double> p(static_cast<std::size_t>(2 * clip + 1), 0.0);
  const auto at = [&](std::int64_t idx) -> double& { return p[static_cast<std::size_t>(idx + clip)]; };
  at(0) = cell_mass(-0.5 * delta, 0.5 * delta);
  for (std::int64_t k = 1; k < clip; ++k) {
    const double mass = cell_mass((static_cast<double>(k) - 0.5) * delta,
                                  (static_cast<double>(k) + 0.5) * delta);
    at(k) = mass;
    at(-k) = mass;
  }
  if (clip >= 1) {
    const double tail = upper_tail((static_cast<double>(clip) - 0.5) * delta);
    at(clip) = tail;
    at(-clip) = tail;
  }
  return p;
}

double model_entropy_bits(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

// Cell centroids and the induced E (T - T_hat)^2 for standard normal T with
// step delta, clamp at +-clip and conditional-mean reconstruction. Closed
// form from the Gaussian cell moments M0, M1, M2; the centroid y = M1/M0
// minimizes the in-cell second moment, which becomes M2 - M1^2/M0.
struct ReconstructionModel {
  std::vector<double> centroids;  // index 0 .. clip
  double distortion;
};

ReconstructionModel reconstruction_model(double delta, std::int64_t clip) {
  ReconstructionModel out;
  out.centroids.assign(static_cast<std::size_t>(clip + 1), 0.0);
  const auto moments = [&](double a, double b, bool unbounded) {
    const double m0 = unbounded ? upper_tail(a) : cell_mass(a, b);
    const double pa = std_pdf(a);
    const double pb = unbounded ? 0.0 : std_pdf(b);
    const double m1 = pa - pb;
    const double m2 = m0 + a * pa - (unbounded ? 0.0 : b * pb);
    return std::array<double, 3>{m0, m1, m2};
  };

  // Center cell: centroid 0 by symmetry, residual energy M2(-b, b).
  {
    const double b = 0.5 * delta;
    out.distortion = cell_mass(-b, b) - 2.0 * b * std_pdf(b);
  }
  for (std::int64_t k = 1; k <= clip; ++k) {
    const double a = (static_cast<double>(k) - 0.5) * delta;
    const double b = (static_cast<double>(k) + 0.5) * delta;
    const auto [m0, m1, m2] = moments(a, b, k == clip);
    const double centroid = m0 > 0.0 ? m1 / m0 : static_cast<double>(k) * delta;
    out.centroids[static_cast<std::size_t>(k)] = centroid;
    out.distortion += 2.0 * (m0 > 0.0 ? m2 - m1 * m1 / m0 : 0.0);
  }
  return out;
}

// Entropy of the normalized (sigma = 1) design at step delta.
double entropy_at(double delta) {
  return model_entropy_bits(index_model(delta, clip_index_for(delta)));
}

}  // namespace

ScalarQuantizer design_ecsq(double variance, double rate) {
  if (!(variance > 0.0)) throw DomainError("design_ecsq: variance must be positive");
  if (rate < 0.0) throw DomainError("design_ecsq: negative rate");

  ScalarQuantizer q;
  q.variance = variance;
  q.target_rate = rate;
  if (rate == 0.0) {
    q.step = 0.0;
    q.clip_index = 0;
    q.model = {1.0};
    q.reconstruction = {0.0};
    q.model_entropy = 0.0;
    q.expected_distortion = variance;
    return q;
  }

  // Bisect the normalized step: entropy decreases from ~infinity to 0.
  double lo = 1.0, hi = 1.0;
  while (entropy_at(lo) < rate) lo *= 0.5;
  while (entropy_at(hi) > rate) hi *= 2.0;
  double delta = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    delta = 0.5 * (lo + hi);
    const double h = entropy_at(delta);
    if (std::abs(h - rate) <= 0.5 * kEntropyTol) break;
    if (h > rate) {
      lo = delta;
    } else {
      hi = delta;
    }
  }

  const std::int64_t clip = clip_index_for(delta);
  const double sigma = std::sqrt(variance);
  q.step = delta * sigma;
  q.clip_index = clip;
  q.model = index_model(delta, clip);
  q.model_entropy = model_entropy_bits(q.model);
  const ReconstructionModel recon = reconstruction_model(delta, clip);
  q.reconstruction.resize(recon.centroids.size());
  for (std::size_t k = 0; k < recon.centroids.size(); ++k) {
    q.reconstruction[k] = recon.centroids[k] * sigma;
  }
  q.expected_distortion = variance * recon.distortion;
  return q;
}

std::int64_t quantize(const ScalarQuantizer& q, double s) {
  if (q.step == 0.0) return 0;
  const double ratio = s / q.step;
  if (ratio >= static_cast<double>(q.clip_index)) return q.clip_index;
  if (ratio <= static_cast<double>(-q.clip_index)) return -q.clip_index;
  return std::llround(ratio);
}

double dequantize(const ScalarQuantizer& q, std::int64_t index) {
  if (index < -q.clip_index || index > q.clip_index) {
    throw CorruptStreamError("dequantize: index " + std::to_string(index) +
                                 " outside [-" + std::to_string(q.clip_index) + ", " +
                                 std::to_string(q.clip_index) + "]",
                             0);
  }
  if (q.step == 0.0) return 0.0;
  const double magnitude = q.reconstruction[static_cast<std::size_t>(std::llabs(index))];
  return index < 0 ? -magnitude : magnitude;
}

const ScalarQuantizer& QuantizerCache::get(double variance, double rate) {
  const std::pair<std::int64_t, std::int64_t> key{
      static_cast<std::int64_t>(std::llround(variance * 1e9)),
      static_cast<std::int64_t>(std::llround(rate * 1e9))};
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    it = entries_.emplace(key, std::make_unique<ScalarQuantizer>(design_ecsq(variance, rate)))
             .first;
  }
  return *it->second;
}

}  // namespace prismquant
