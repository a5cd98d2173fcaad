#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

namespace prismquant {

/// Entropy-matched uniform mid-tread scalar quantizer for one N(0, variance)
/// transform coefficient, with its static index probability model.
/// Reconstruction is at the conditional mean of each cell (closed form from
/// Gaussian cell moments), which keeps the rate-distortion gap near the
/// 0.255-bit shaping bound at low rates as well as high.
struct ScalarQuantizer {
  double variance = 0.0;     // lambda
  double target_rate = 0.0;  // bits
  double step = 0.0;         // 0 for the degenerate rate-0 quantizer
  std::int64_t clip_index = 0;
  std::vector<double> model;          // P(index = -clip_index .. +clip_index)
  std::vector<double> reconstruction; // cell centroids for index 0 .. clip_index
  double model_entropy = 0.0;         // bits
  double expected_distortion = 0.0;   // E (S - S_hat)^2, clipping included

  std::size_t alphabet_size() const { return model.size(); }
};

/// Designs the quantizer: step found by bisection so the index entropy of a
/// quantized N(0, variance) variable matches `rate` within 1e-6 bits; the
/// clip index keeps clipped tail mass below 1e-12. rate = 0 degenerates to
/// the all-zero quantizer with distortion = variance.
ScalarQuantizer design_ecsq(double variance, double rate);

std::int64_t quantize(const ScalarQuantizer& q, double s);
double dequantize(const ScalarQuantizer& q, std::int64_t index);

/// Shared flyweight store keyed by (variance, rate) rounded to 1e-9
/// granularity. Returned references stay valid for the cache's lifetime.
class QuantizerCache {
 public:
  const ScalarQuantizer& get(double variance, double rate);
  std::size_t size() const { return entries_.size(); }

 private:
  struct KeyHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
      return std::hash<std::int64_t>()(k.first * 0x9E3779B97F4A7C15ll) ^
             std::hash<std::int64_t>()(k.second);
    }
  };
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::unique_ptr<ScalarQuantizer>,
                     KeyHash>
      entries_;
};

}  // namespace prismquant
