#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prismquant/coding.hpp"
#include "prismquant/gmm.hpp"
#include "prismquant/quantizer.hpp"
#include "prismquant/ratealloc.hpp"

namespace prismquant {

enum class CodecMode : std::uint8_t {
  kPrismQuantMap = 0,
  kPrismQuantGenie = 1,
  kTcSingle = 2,
  kWutc = 3,
};

const char* codec_mode_name(CodecMode mode);
CodecMode codec_mode_from_name(const std::string& name);

/// tau = 0 encodes an infinite amortization window: labels still travel in
/// the stream but are excluded from the rate budget and accounting.
constexpr std::uint32_t kTauInfinite = 0;

struct CodecConfig {
  CodecMode mode = CodecMode::kPrismQuantMap;
  double total_rate = 0.0;  // bits per source dimension
  std::uint32_t tau = 1;
  std::uint64_t seed = 0;
};

struct RateAccounting {
  std::uint64_t label_bits = 0;  // exact sum of emitted codeword lengths
  std::uint64_t coef_bits = 0;   // coefficient payload size in bits
};

/// Parsed/parseable coded stream: fixed header, two length-prefixed
/// segments, and the rate-accounting trailer.
struct Bitstream {
  std::uint16_t version = 1;
  CodecMode mode = CodecMode::kPrismQuantMap;
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  double total_rate = 0.0;
  std::uint64_t vector_count = 0;
  std::uint32_t tau = 1;
  std::uint64_t dictionary_checksum = 0;
  double water_level = 0.0;  // 0 for wutc streams (per-class levels re-derived)
  std::vector<std::uint8_t> label_payload;
  std::vector<std::uint8_t> coef_payload;
  RateAccounting accounting;

  /// Measured bits/dim, honoring label amortization (tau = infinity drops
  /// the label term).
  double measured_rate_per_dim() const;
  double label_rate_per_dim() const;
  double coef_rate_per_dim() const;
};

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs);
Bitstream parse_bitstream(std::span<const std::uint8_t> bytes);

/// Per-vector encode: label (MAP unless an oracle label is supplied), then
/// the component KLT restricted to modes with a positive allocated rate.
struct VectorCode {
  std::uint32_t label = 0;
  std::vector<std::int64_t> indices;  // one per active mode of `label`
};

VectorCode encode_vector(std::span<const double> x, const MixtureDictionary& dict,
                         const WaterAllocation& alloc, QuantizerCache& cache,
                         std::optional<std::uint32_t> oracle_label = std::nullopt);
Vec decode_vector(const VectorCode& vc, const MixtureDictionary& dict,
                  const WaterAllocation& alloc, QuantizerCache& cache);

/// Stream encode at a total budget: solves the water level from
/// R_q = total_rate - H(C)/(tau*n), writes header + label + coefficient
/// segments. Oracle labels are required for genie mode; precomputed labels
/// may be passed for the MAP modes to skip relabeling (they must equal the
/// MAP decisions; the output is identical either way).
Bitstream encode_stream(const LabeledSamples& samples, const MixtureDictionary& dict,
                        const CodecConfig& cfg,
                        std::span<const std::uint32_t> labels = {});

/// Same pipeline parameterized by the water level instead of the budget;
/// total_rate in the header is derived from the level. Sweeps use this.
Bitstream encode_stream_at_level(const LabeledSamples& samples, const MixtureDictionary& dict,
                                 const CodecConfig& cfg, double level,
                                 std::span<const std::uint32_t> labels = {});

LabeledSamples decode_stream(const Bitstream& bs, const MixtureDictionary& dict);

/// Dictionary restricted to the eigenmodes above the water level. Labeling
/// state (priors, means, Cholesky factors) is kept so MAP decisions match
/// the full dictionary exactly; the eigen storage is what shrinks.
struct PrunedDictionary {
  std::size_t k = 0;
  std::size_t n = 0;
  double level = 0.0;
  std::vector<double> priors;
  std::vector<Vec> means;
  std::vector<CholeskyFactor> chols;
  std::vector<double> log_dets;
  struct RetainedMode {
    std::uint32_t index;
    double eigenvalue;
    Vec column;  // eigenvector
  };
  std::vector<std::vector<RetainedMode>> modes;  // per component, index ascending
  std::vector<std::size_t> active_counts;        // L_c(level)
  double memory_ratio = 0.0;                     // sum L_c / (K n)
};

PrunedDictionary prune_dictionary(const MixtureDictionary& dict, double level);

/// Pruned-path encode/decode; bit-identical to the full-dictionary codec at
/// the same level.
Bitstream encode_stream_pruned(const LabeledSamples& samples, const PrunedDictionary& pruned,
                               std::uint64_t dictionary_checksum, const CodecConfig& cfg,
                               std::span<const std::uint32_t> labels = {});
LabeledSamples decode_stream_pruned(const Bitstream& bs, const PrunedDictionary& pruned,
                                    std::uint64_t dictionary_checksum);

/// Per-class-budget baseline: identical pipeline, rates from
/// wutc_allocation. cfg.mode must be kWutc.
Bitstream wutc_encode_stream(const LabeledSamples& samples, const MixtureDictionary& dict,
                             const CodecConfig& cfg,
                             std::span<const std::uint32_t> labels = {});

/// K = 1 dictionary from pooled sample moments, the tc-single baseline model.
MixtureDictionary make_tc_dictionary(const LabeledSamples& samples);

/// Lossless label budget H(priors)/(tau*n) in bits/dim (0 when tau
/// is infinite).
double label_rate_budget(const MixtureDictionary& dict, std::uint32_t tau);

}  // namespace prismquant
