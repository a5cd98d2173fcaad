#include "prismquant/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "prismquant/errors.hpp"
#include "prismquant/serialize.hpp"

namespace prismquant {

const char* curve_name(Curve curve) {
  switch (curve) {
    case Curve::kTheoryLower: return "theory-lower";
    case Curve::kTheoryUpper: return "theory-upper";
    case Curve::kGenie: return "genie";
    case Curve::kMap: return "map";
    case Curve::kTc: return "tc";
    case Curve::kWutc: return "wutc";
  }
  return "unknown";
}

Curve curve_from_name(const std::string& name) {
  for (Curve c : {Curve::kTheoryLower, Curve::kTheoryUpper, Curve::kGenie, Curve::kMap,
                  Curve::kTc, Curve::kWutc}) {
    if (name == curve_name(c)) return c;
  }
  throw DomainError("unknown curve: " + name);
}

std::vector<double> log_spaced_levels(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) {
    throw DomainError("log_spaced_levels: need 0 < lo < hi and count >= 2");
  }
  std::vector<double> levels(count);
  const double log_lo = std::log10(lo);
  const double log_hi = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    levels[i] = std::pow(10.0, log_lo + (log_hi - log_lo) * static_cast<double>(i) /
                                   static_cast<double>(count - 1));
  }
  return levels;
}

std::vector<double> default_levels() { return log_spaced_levels(1e-5, 10.0, 50); }

double measured_nmse(const LabeledSamples& original, const LabeledSamples& reconstruction) {
  if (original.count != reconstruction.count || original.dim != reconstruction.dim) {
    throw DomainError("measured_nmse: shape mismatch");
  }
  double err = 0.0;
  double power = 0.0;
  for (std::size_t i = 0; i < original.values.size(); ++i) {
    const double d = original.values[i] - reconstruction.values[i];
    err += d * d;
    power += original.values[i] * original.values[i];
  }
  if (power <= 0.0) return err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return err / power;
}

double model_signal_power(const MixtureDictionary& dict) {
  double power = 0.0;
  for (std::size_t c = 0; c < dict.k; ++c) {
    power += dict.priors[c] * (dict.covariances[c].trace() + dot(dict.means[c], dict.means[c]));
  }
  return power / static_cast<double>(dict.n);
}

namespace {

RdPoint operational_point(Curve curve, double level, const LabeledSamples& samples,
                          const LabeledSamples& decoded, const Bitstream& bs) {
  RdPoint p;
  p.curve = curve;
  p.level = level;
  p.rate = bs.measured_rate_per_dim();
  p.nmse = measured_nmse(samples, decoded);
  p.label_rate = bs.label_rate_per_dim();
  p.coef_rate = bs.coef_rate_per_dim();
  return p;
}

}  // namespace

std::vector<RdPoint> rd_sweep(const MixtureDictionary& dict, const LabeledSamples& samples,
                              const SweepSpec& spec) {
  if (samples.count > 0 && samples.dim != dict.n) {
    throw DomainError("rd_sweep: sample dimension != dictionary n");
  }
  for (std::size_t i = 1; i < spec.levels.size(); ++i) {
    if (!(spec.levels[i] > spec.levels[i - 1]) || !(spec.levels[0] > 0.0)) {
      throw DomainError("rd_sweep: levels must be positive and strictly increasing");
    }
  }
  const auto wants = [&](Curve c) {
    return std::find(spec.curves.begin(), spec.curves.end(), c) != spec.curves.end();
  };

  const PooledSpectrum spectrum = pooled_spectrum(dict);
  const double power = model_signal_power(dict);

  // MAP labels are level-independent; fix them once per sweep.
  std::vector<std::uint32_t> map_labels;
  const bool need_map = wants(Curve::kMap) || wants(Curve::kWutc);
  if (need_map) {
    map_labels.resize(samples.count);
    for (std::size_t t = 0; t < samples.count; ++t) {
      map_labels[t] = dict.k == 1 ? 0 : map_label(samples.row(t), dict);
    }
  }
  std::optional<double> disagreement;
  if (!map_labels.empty() && samples.has_labels()) {
    std::size_t mismatches = 0;
    for (std::size_t t = 0; t < samples.count; ++t) {
      if (map_labels[t] != samples.labels[t]) ++mismatches;
    }
    disagreement = static_cast<double>(mismatches) / static_cast<double>(samples.count);
  }

  MixtureDictionary tc_dict;
  if (wants(Curve::kTc)) tc_dict = make_tc_dictionary(samples);

  std::vector<RdPoint> points;
  for (double level : spec.levels) {
    const SandwichBounds bounds = sandwich(dict, level);
    const double theory_distortion = evaluate(spectrum, level).distortion;
    const double theory_nmse = theory_distortion / power;

    if (wants(Curve::kTheoryLower)) {
      points.push_back({Curve::kTheoryLower, level, bounds.conditional_rate, theory_nmse, 0.0,
                        bounds.conditional_rate, std::nullopt});
    }
    if (wants(Curve::kTheoryUpper)) {
      points.push_back({Curve::kTheoryUpper, level, bounds.upper_rate, theory_nmse,
                        bounds.label_rate, bounds.conditional_rate, std::nullopt});
    }

    const double matched_total_rate =
        evaluate(spectrum, level).rate + label_rate_budget(dict, spec.tau);

    if (wants(Curve::kGenie)) {
      CodecConfig cfg{CodecMode::kPrismQuantGenie, matched_total_rate, spec.tau, 0};
      const Bitstream bs = encode_stream_at_level(samples, dict, cfg, level);
      points.push_back(
          operational_point(Curve::kGenie, level, samples, decode_stream(bs, dict), bs));
    }
    if (wants(Curve::kMap)) {
      CodecConfig cfg{CodecMode::kPrismQuantMap, matched_total_rate, spec.tau, 0};
      const Bitstream bs = encode_stream_at_level(samples, dict, cfg, level, map_labels);
      RdPoint p = operational_point(Curve::kMap, level, samples, decode_stream(bs, dict), bs);
      p.map_disagreement = disagreement;
      points.push_back(p);
    }
    if (wants(Curve::kWutc)) {
      CodecConfig cfg{CodecMode::kWutc, matched_total_rate, spec.tau, 0};
      const Bitstream bs = encode_stream_at_level(samples, dict, cfg, level, map_labels);
      points.push_back(
          operational_point(Curve::kWutc, level, samples, decode_stream(bs, dict), bs));
    }
    if (wants(Curve::kTc)) {
      // Matched total budget; with K = 1 the whole budget goes to
      // coefficients on the pooled spectrum.
      CodecConfig cfg{CodecMode::kTcSingle, matched_total_rate, spec.tau, 0};
      const double tc_level =
          solve_level_for_rate(pooled_spectrum(tc_dict), matched_total_rate);
      const Bitstream bs = encode_stream_at_level(samples, tc_dict, cfg, tc_level);
      points.push_back(
          operational_point(Curve::kTc, level, samples, decode_stream(bs, tc_dict), bs));
    }
  }

  std::stable_sort(points.begin(), points.end(), [](const RdPoint& a, const RdPoint& b) {
    if (a.curve != b.curve) return static_cast<int>(a.curve) < static_cast<int>(b.curve);
    return a.level < b.level;
  });
  return points;
}

namespace {
std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}
}  // namespace

std::string points_to_csv(const std::vector<RdPoint>& points) {
  std::string out =
      "curve,mu,rate_bits_per_dim,nmse,label_bits_per_dim,coef_bits_per_dim,map_disagreement\n";
  for (const RdPoint& p : points) {
    out += curve_name(p.curve);
    out += ',';
    out += format_double(p.level);
    out += ',';
    out += format_double(p.rate);
    out += ',';
    out += format_double(p.nmse);
    out += ',';
    if (p.label_rate) out += format_double(*p.label_rate);
    out += ',';
    if (p.coef_rate) out += format_double(*p.coef_rate);
    out += ',';
    if (p.map_disagreement) out += format_double(*p.map_disagreement);
    out += '\n';
  }
  return out;
}

void write_csv(const std::vector<RdPoint>& points, const std::string& path) {
  const std::string csv = points_to_csv(points);
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
}

}  // namespace prismquant
