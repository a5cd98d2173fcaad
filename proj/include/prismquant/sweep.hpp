#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prismquant/codec.hpp"

namespace prismquant {

enum class Curve : std::uint8_t {
  kTheoryLower = 0,
  kTheoryUpper = 1,
  kGenie = 2,
  kMap = 3,
  kTc = 4,
  kWutc = 5,
};

const char* curve_name(Curve curve);
Curve curve_from_name(const std::string& name);

/// 50 logarithmically spaced water levels in [1e-5, 10] unless overridden.
std::vector<double> default_levels();
std::vector<double> log_spaced_levels(double lo, double hi, std::size_t count);

struct SweepSpec {
  std::vector<double> levels = default_levels();
  std::vector<Curve> curves = {Curve::kTheoryLower, Curve::kTheoryUpper, Curve::kGenie,
                               Curve::kMap};
  std::uint32_t tau = 1;
};

/// One rate-distortion point of one curve.
struct RdPoint {
  Curve curve;
  double level;
  double rate;  // bits/dim (measured for operational curves)
  double nmse;
  std::optional<double> label_rate;        // bits/dim
  std::optional<double> coef_rate;         // bits/dim
  std::optional<double> map_disagreement;  // fraction, map curve only
};

/// Four-curve comparison: theory bounds from the sandwich, operational
/// points from full encode/decode at each level, baselines at matched total
/// rate. Rows are sorted by (curve, level).
std::vector<RdPoint> rd_sweep(const MixtureDictionary& dict, const LabeledSamples& samples,
                              const SweepSpec& spec);

std::string points_to_csv(const std::vector<RdPoint>& points);
void write_csv(const std::vector<RdPoint>& points, const std::string& path);

/// Mean ||x - xhat||^2 / mean ||x||^2.
double measured_nmse(const LabeledSamples& original, const LabeledSamples& reconstruction);

/// Model signal power per dimension: (1/n) sum_c pi_c (tr R_c + |mu_c|^2).
double model_signal_power(const MixtureDictionary& dict);

}  // namespace prismquant
