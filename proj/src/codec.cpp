#include "prismquant/codec.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "prismquant/errors.hpp"
#include "prismquant/serialize.hpp"

namespace prismquant {

namespace {

constexpr std::uint16_t kBitstreamVersion = 1;

// Everything the inner coding loops need about one active eigenmode. The
// eigenvector column is accessed through (pointer, stride) so the full
// dictionary (row-major basis, stride n) and the pruned dictionary
// (contiguous columns, stride 1) run the exact same arithmetic.
struct ActiveMode {
  std::uint32_t index;
  double eigenvalue;
  double rate;
  const double* column;
  std::size_t stride;
  const ScalarQuantizer* quantizer;
  const IndexModel* index_model;
};

struct CodecView {
  std::size_t k = 0;
  std::size_t n = 0;
  const std::vector<double>* priors = nullptr;
  const std::vector<Vec>* means = nullptr;
  const std::vector<CholeskyFactor>* chols = nullptr;
  const std::vector<double>* log_dets = nullptr;
  std::vector<std::vector<ActiveMode>> active;
  std::deque<IndexModel> model_store;
  QuantizerCache quantizers;
};

void attach_mode(CodecView& view, std::size_t c, std::uint32_t i, double eigenvalue, double rate,
                 const double* column, std::size_t stride) {
  if (rate <= 0.0) return;
  const ScalarQuantizer& q = view.quantizers.get(eigenvalue, rate);
  view.model_store.push_back(build_index_model(q));
  view.active[c].push_back({i, eigenvalue, rate, column, stride, &q, &view.model_store.back()});
}

CodecView make_view(const MixtureDictionary& dict, std::span<const double> rates) {
  CodecView view;
  view.k = dict.k;
  view.n = dict.n;
  view.priors = &dict.priors;
  view.means = &dict.means;
  view.chols = &dict.chols;
  view.log_dets = &dict.log_dets;
  view.active.resize(dict.k);
  for (std::size_t c = 0; c < dict.k; ++c) {
    for (std::size_t i = 0; i < dict.n; ++i) {
      attach_mode(view, c, static_cast<std::uint32_t>(i), dict.eigenvalue(c, i),
                  rates[c * dict.n + i], &dict.eigs[c].basis.data()[i], dict.n);
    }
  }
  return view;
}

CodecView make_view(const PrunedDictionary& pruned) {
  CodecView view;
  view.k = pruned.k;
  view.n = pruned.n;
  view.priors = &pruned.priors;
  view.means = &pruned.means;
  view.chols = &pruned.chols;
  view.log_dets = &pruned.log_dets;
  view.active.resize(pruned.k);
  for (std::size_t c = 0; c < pruned.k; ++c) {
    for (const auto& mode : pruned.modes[c]) {
      // Identical rate expression to allocation() so the pruned path emits
      // bit-identical streams.
      const double rate =
          mode.eigenvalue > pruned.level ? 0.5 * std::log2(mode.eigenvalue / pruned.level) : 0.0;
      attach_mode(view, c, mode.index, mode.eigenvalue, rate, mode.column.data(), 1);
    }
  }
  return view;
}

std::uint32_t view_map_label(std::span<const double> x, const CodecView& view) {
  std::uint32_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < view.k; ++c) {
    const double score = std::log((*view.priors)[c]) - 0.5 * (*view.log_dets)[c] -
                         0.5 * mahalanobis_sq(x, (*view.means)[c], (*view.chols)[c]);
    if (score > best_score) {
      best_score = score;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

double transform_coefficient(std::span<const double> x, std::span<const double> mean,
                             const ActiveMode& mode, std::size_t n) {
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    acc += mode.column[j * mode.stride] * (x[j] - mean[j]);
  }
  return acc;
}

std::size_t window_count(std::size_t vectors, std::uint32_t tau) {
  if (tau <= 1) return vectors;  // tau = 0 (infinite) still transmits per vector
  return (vectors + tau - 1) / tau;
}

// The component every vector is coded under: its own label for tau in {0,1},
// the label of its window's first vector otherwise.
std::vector<std::uint32_t> effective_labels(std::span<const std::uint32_t> labels,
                                            std::uint32_t tau) {
  std::vector<std::uint32_t> eff(labels.begin(), labels.end());
  if (tau > 1) {
    for (std::size_t t = 0; t < eff.size(); ++t) eff[t] = labels[(t / tau) * tau];
  }
  return eff;
}

std::vector<std::uint32_t> decide_labels(const LabeledSamples& samples, const CodecView& view,
                                         CodecMode mode, std::span<const std::uint32_t> provided) {
  const std::size_t m = samples.count;
  std::vector<std::uint32_t> labels(m, 0);
  if (!provided.empty()) {
    if (provided.size() != m) throw DomainError("label count does not match sample count");
    std::copy(provided.begin(), provided.end(), labels.begin());
    return labels;
  }
  if (mode == CodecMode::kPrismQuantGenie) {
    if (!samples.has_labels()) {
      throw DomainError("genie mode needs oracle labels");
    }
    std::copy(samples.labels.begin(), samples.labels.end(), labels.begin());
    return labels;
  }
  if (view.k == 1) return labels;
  for (std::size_t t = 0; t < m; ++t) labels[t] = view_map_label(samples.row(t), view);
  return labels;
}

Bitstream encode_with_view(const LabeledSamples& samples, const CodecView& view,
                           const CodecConfig& cfg, double header_level, double header_total_rate,
                           std::uint64_t checksum, std::span<const std::uint32_t> provided) {
  if (samples.dim != view.n) throw DomainError("encode: sample dimension != dictionary n");
  const std::size_t m = samples.count;

  const std::vector<std::uint32_t> labels = decide_labels(samples, view, cfg.mode, provided);
  for (std::uint32_t label : labels) {
    if (label >= view.k) throw DomainError("encode: label out of range");
  }
  const std::vector<std::uint32_t> coding_labels = effective_labels(labels, cfg.tau);

  // Label segment: one codeword per vector (tau <= 1) or per window.
  const LabelCode code = build_label_code(*view.priors);
  BitWriter label_writer;
  if (cfg.tau > 1) {
    for (std::size_t w = 0; w < window_count(m, cfg.tau); ++w) {
      const std::uint32_t label = coding_labels[w * cfg.tau];
      encode_labels(std::span<const std::uint32_t>(&label, 1), code, label_writer);
    }
  } else {
    encode_labels(coding_labels, code, label_writer);
  }
  const std::uint64_t label_bits = label_writer.bit_count();

  // Coefficient segment: per vector, the active modes of its component.
  std::vector<std::uint8_t> coef_payload;
  {
    RangeEncoder enc(coef_payload);
    for (std::size_t t = 0; t < m; ++t) {
      const auto x = samples.row(t);
      const std::uint32_t c = coding_labels[t];
      const auto& mean = (*view.means)[c];
      for (const ActiveMode& mode : view.active[c]) {
        const double s = transform_coefficient(x, mean, mode, view.n);
        const std::int64_t idx = quantize(*mode.quantizer, s);
        const std::size_t slot = static_cast<std::size_t>(idx + mode.index_model->max_index);
        enc.encode(mode.index_model->cumulative[slot], mode.index_model->cumulative[slot + 1]);
      }
    }
    enc.finish();
  }

  Bitstream bs;
  bs.version = kBitstreamVersion;
  bs.mode = cfg.mode;
  bs.n = static_cast<std::uint32_t>(view.n);
  bs.k = static_cast<std::uint32_t>(view.k);
  bs.total_rate = header_total_rate;
  bs.vector_count = m;
  bs.tau = cfg.tau;
  bs.dictionary_checksum = checksum;
  bs.water_level = header_level;
  bs.label_payload = label_writer.finish();
  bs.coef_payload = std::move(coef_payload);
  bs.accounting.label_bits = label_bits;
  bs.accounting.coef_bits = 8 * bs.coef_payload.size();
  return bs;
}

LabeledSamples decode_with_view(const Bitstream& bs, const CodecView& view) {
  const std::size_t m = bs.vector_count;
  const std::size_t n = view.n;

  const LabelCode code = build_label_code(*view.priors);
  BitReader label_reader(bs.label_payload);
  std::vector<std::uint32_t> coding_labels;
  if (bs.tau > 1) {
    const std::vector<std::uint32_t> window_labels =
        decode_labels(label_reader, code, window_count(m, bs.tau));
    coding_labels.resize(m);
    for (std::size_t t = 0; t < m; ++t) coding_labels[t] = window_labels[t / bs.tau];
  } else {
    coding_labels = decode_labels(label_reader, code, m);
  }
  for (std::uint32_t label : coding_labels) {
    if (label >= view.k) {
      throw CorruptStreamError("decoded label out of range", 0);
    }
  }

  LabeledSamples out;
  out.count = m;
  out.dim = n;
  out.values.resize(m * n);
  out.labels = coding_labels;

  RangeDecoder dec(bs.coef_payload);
  const bool any_modes =
      std::any_of(view.active.begin(), view.active.end(), [](const auto& v) { return !v.empty(); });
  for (std::size_t t = 0; t < m; ++t) {
    const std::uint32_t c = coding_labels[t];
    double* xhat = &out.values[t * n];
    const auto& mean = (*view.means)[c];
    std::copy(mean.begin(), mean.end(), xhat);
    if (!any_modes) continue;
    for (const ActiveMode& mode : view.active[c]) {
      const std::uint32_t target = dec.decode_target();
      const auto& cum = mode.index_model->cumulative;
      const auto it = std::upper_bound(cum.begin(), cum.end(), target);
      const std::size_t slot = static_cast<std::size_t>(it - cum.begin()) - 1;
      dec.consume(cum[slot], cum[slot + 1]);
      const double shat =
          dequantize(*mode.quantizer, static_cast<std::int64_t>(slot) - mode.index_model->max_index);
      for (std::size_t j = 0; j < n; ++j) {
        xhat[j] += shat * mode.column[j * mode.stride];
      }
    }
  }
  return out;
}

std::vector<double> global_rates(const MixtureDictionary& dict, double level) {
  return allocation(pooled_spectrum(dict), level).rates;
}

void check_mode_dict(const CodecConfig& cfg, std::size_t k) {
  if (cfg.mode == CodecMode::kTcSingle && k != 1) {
    throw DomainError("tc-single needs a K = 1 dictionary");
  }
}

double budget_to_coef_rate(const MixtureDictionary& dict, const CodecConfig& cfg) {
  const double label_budget = label_rate_budget(dict, cfg.tau);
  if (cfg.total_rate < label_budget - 1e-12) {
    throw InfeasibleBudgetError("total rate " + std::to_string(cfg.total_rate) +
                                    " below the lossless label cost; minimum feasible is " +
                                    std::to_string(label_budget),
                                label_budget);
  }
  return std::max(0.0, cfg.total_rate - label_budget);
}

}  // namespace

const char* codec_mode_name(CodecMode mode) {
  switch (mode) {
    case CodecMode::kPrismQuantMap: return "prismquant-map";
    case CodecMode::kPrismQuantGenie: return "prismquant-genie";
    case CodecMode::kTcSingle: return "tc-single";
    case CodecMode::kWutc: return "wutc";
  }
  return "unknown";
}

CodecMode codec_mode_from_name(const std::string& name) {
  if (name == "prismquant-map" || name == "map") return CodecMode::kPrismQuantMap;
  if (name == "prismquant-genie" || name == "genie") return CodecMode::kPrismQuantGenie;
  if (name == "tc-single" || name == "tc") return CodecMode::kTcSingle;
  if (name == "wutc") return CodecMode::kWutc;
  throw DomainError("unknown codec mode: " + name);
}

double Bitstream::measured_rate_per_dim() const {
  return label_rate_per_dim() + coef_rate_per_dim();
}

double Bitstream::label_rate_per_dim() const {
  if (tau == kTauInfinite || vector_count == 0) return 0.0;
  return static_cast<double>(accounting.label_bits) /
         (static_cast<double>(vector_count) * static_cast<double>(n));
}

double Bitstream::coef_rate_per_dim() const {
  if (vector_count == 0) return 0.0;
  return static_cast<double>(accounting.coef_bits) /
         (static_cast<double>(vector_count) * static_cast<double>(n));
}

double label_rate_budget(const MixtureDictionary& dict, std::uint32_t tau) {
  if (tau == kTauInfinite) return 0.0;
  return entropy_bits(dict.priors) /
         (static_cast<double>(tau) * static_cast<double>(dict.n));
}

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs) {
  ByteWriter w;
  w.magic("PQBS1");
  w.u16(bs.version);
  w.u8(static_cast<std::uint8_t>(bs.mode));
  w.u32(bs.n);
  w.u32(bs.k);
  w.f64(bs.total_rate);
  w.u64(bs.vector_count);
  w.u32(bs.tau);
  w.u64(bs.dictionary_checksum);
  w.f64(bs.water_level);
  w.u64(bs.label_payload.size());
  w.raw(bs.label_payload);
  w.u64(bs.coef_payload.size());
  w.raw(bs.coef_payload);
  w.u64(bs.accounting.label_bits);
  w.u64(bs.accounting.coef_bits);
  return w.take();
}

Bitstream parse_bitstream(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("PQBS1");
  Bitstream bs;
  bs.version = r.u16();
  if (bs.version != kBitstreamVersion) {
    throw CorruptStreamError("unsupported bitstream version " + std::to_string(bs.version), 5);
  }
  const std::uint8_t mode = r.u8();
  if (mode > static_cast<std::uint8_t>(CodecMode::kWutc)) {
    throw CorruptStreamError("unknown codec mode byte", r.position() - 1);
  }
  bs.mode = static_cast<CodecMode>(mode);
  bs.n = r.u32();
  bs.k = r.u32();
  bs.total_rate = r.f64();
  bs.vector_count = r.u64();
  if (bs.n == 0 || bs.k == 0 || bs.vector_count > (1ull << 48)) {
    throw CorruptStreamError("bitstream header dimensions implausible", r.position());
  }
  bs.tau = r.u32();
  bs.dictionary_checksum = r.u64();
  bs.water_level = r.f64();
  const std::uint64_t label_len = r.u64();
  auto label = r.take(label_len);
  bs.label_payload.assign(label.begin(), label.end());
  const std::uint64_t coef_len = r.u64();
  auto coef = r.take(coef_len);
  bs.coef_payload.assign(coef.begin(), coef.end());
  bs.accounting.label_bits = r.u64();
  bs.accounting.coef_bits = r.u64();
  if (r.remaining() != 0) {
    throw CorruptStreamError("trailing bytes after bitstream", r.position());
  }
  return bs;
}

VectorCode encode_vector(std::span<const double> x, const MixtureDictionary& dict,
                         const WaterAllocation& alloc, QuantizerCache& cache,
                         std::optional<std::uint32_t> oracle_label) {
  if (x.size() != dict.n) throw DomainError("encode_vector: dimension mismatch");
  VectorCode vc;
  vc.label = oracle_label ? *oracle_label : map_label(x, dict);
  if (vc.label >= dict.k) throw DomainError("encode_vector: label out of range");
  const auto& mean = dict.means[vc.label];
  for (std::size_t i = 0; i < dict.n; ++i) {
    const double rate = alloc.rates[vc.label * dict.n + i];
    if (rate <= 0.0) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < dict.n; ++j) {
      s += dict.eigs[vc.label].basis(j, i) * (x[j] - mean[j]);
    }
    vc.indices.push_back(quantize(cache.get(dict.eigenvalue(vc.label, i), rate), s));
  }
  return vc;
}

Vec decode_vector(const VectorCode& vc, const MixtureDictionary& dict,
                  const WaterAllocation& alloc, QuantizerCache& cache) {
  if (vc.label >= dict.k) throw CorruptStreamError("decode_vector: label out of range", 0);
  Vec xhat = dict.means[vc.label];
  std::size_t next = 0;
  for (std::size_t i = 0; i < dict.n; ++i) {
    const double rate = alloc.rates[vc.label * dict.n + i];
    if (rate <= 0.0) continue;
    if (next >= vc.indices.size()) {
      throw CorruptStreamError("decode_vector: missing coefficient index", next);
    }
    const double shat =
        dequantize(cache.get(dict.eigenvalue(vc.label, i), rate), vc.indices[next++]);
    for (std::size_t j = 0; j < dict.n; ++j) {
      xhat[j] += shat * dict.eigs[vc.label].basis(j, i);
    }
  }
  if (next != vc.indices.size()) {
    throw CorruptStreamError("decode_vector: extra coefficient indices", next);
  }
  return xhat;
}

Bitstream encode_stream(const LabeledSamples& samples, const MixtureDictionary& dict,
                        const CodecConfig& cfg, std::span<const std::uint32_t> labels) {
  check_mode_dict(cfg, dict.k);
  if (cfg.mode == CodecMode::kWutc) return wutc_encode_stream(samples, dict, cfg, labels);
  const double coef_rate = budget_to_coef_rate(dict, cfg);
  const double level = solve_level_for_rate(pooled_spectrum(dict), coef_rate);
  const CodecView view = make_view(dict, global_rates(dict, level));
  return encode_with_view(samples, view, cfg, level, cfg.total_rate,
                          dictionary_checksum(dict), labels);
}

Bitstream encode_stream_at_level(const LabeledSamples& samples, const MixtureDictionary& dict,
                                 const CodecConfig& cfg, double level,
                                 std::span<const std::uint32_t> labels) {
  check_mode_dict(cfg, dict.k);
  if (!(level > 0.0)) throw DomainError("encode_stream_at_level: level must be positive");
  const PooledSpectrum spectrum = pooled_spectrum(dict);
  const double coef_rate = evaluate(spectrum, level).rate;
  const double total_rate = coef_rate + label_rate_budget(dict, cfg.tau);
  if (cfg.mode == CodecMode::kWutc) {
    const WutcAllocation wutc = wutc_allocation(dict, coef_rate);
    const CodecView view = make_view(dict, wutc.rates);
    // wutc streams carry the per-class coefficient budget in the level slot;
    // the decoder re-derives the class levels from it.
    return encode_with_view(samples, view, cfg, coef_rate, total_rate,
                            dictionary_checksum(dict), labels);
  }
  const CodecView view = make_view(dict, allocation(spectrum, level).rates);
  return encode_with_view(samples, view, cfg, level, total_rate, dictionary_checksum(dict),
                          labels);
}

Bitstream wutc_encode_stream(const LabeledSamples& samples, const MixtureDictionary& dict,
                             const CodecConfig& cfg, std::span<const std::uint32_t> labels) {
  if (cfg.mode != CodecMode::kWutc) throw DomainError("wutc_encode_stream: mode must be wutc");
  const double coef_rate = budget_to_coef_rate(dict, cfg);
  const WutcAllocation wutc = wutc_allocation(dict, coef_rate);
  const CodecView view = make_view(dict, wutc.rates);
  return encode_with_view(samples, view, cfg, coef_rate, cfg.total_rate,
                          dictionary_checksum(dict), labels);
}

LabeledSamples decode_stream(const Bitstream& bs, const MixtureDictionary& dict) {
  if (bs.dictionary_checksum != dictionary_checksum(dict)) {
    throw DictionaryMismatchError("bitstream was coded with a different dictionary");
  }
  if (bs.n != dict.n || bs.k != dict.k) {
    throw DictionaryMismatchError("bitstream dimensions do not match the dictionary");
  }
  if (bs.mode == CodecMode::kWutc) {
    const WutcAllocation wutc = wutc_allocation(dict, bs.water_level);
    const CodecView view = make_view(dict, wutc.rates);
    return decode_with_view(bs, view);
  }
  const CodecView view = make_view(dict, global_rates(dict, bs.water_level));
  return decode_with_view(bs, view);
}

PrunedDictionary prune_dictionary(const MixtureDictionary& dict, double level) {
  if (!(level > 0.0)) throw DomainError("prune_dictionary: level must be positive");
  PrunedDictionary out;
  out.k = dict.k;
  out.n = dict.n;
  out.level = level;
  out.priors = dict.priors;
  out.means = dict.means;
  out.chols = dict.chols;
  out.log_dets = dict.log_dets;
  out.modes.resize(dict.k);
  out.active_counts.assign(dict.k, 0);
  std::size_t total = 0;
  for (std::size_t c = 0; c < dict.k; ++c) {
    for (std::size_t i = 0; i < dict.n; ++i) {
      const double lambda = dict.eigenvalue(c, i);
      if (!(lambda > level)) continue;
      Vec column(dict.n);
      for (std::size_t j = 0; j < dict.n; ++j) column[j] = dict.eigs[c].basis(j, i);
      out.modes[c].push_back({static_cast<std::uint32_t>(i), lambda, std::move(column)});
    }
    out.active_counts[c] = out.modes[c].size();
    total += out.modes[c].size();
  }
  out.memory_ratio =
      static_cast<double>(total) / (static_cast<double>(dict.k) * static_cast<double>(dict.n));
  return out;
}

Bitstream encode_stream_pruned(const LabeledSamples& samples, const PrunedDictionary& pruned,
                               std::uint64_t dictionary_checksum, const CodecConfig& cfg,
                               std::span<const std::uint32_t> labels) {
  if (cfg.mode == CodecMode::kWutc) {
    throw DomainError("pruned encode supports the global-level modes only");
  }
  // Rate accounting mirrors encode_stream_at_level on the full dictionary,
  // term by term, so the header fields come out bit-identical.
  double coef_rate = 0.0;
  const double inv_n = 1.0 / static_cast<double>(pruned.n);
  for (std::size_t c = 0; c < pruned.k; ++c) {
    for (const auto& mode : pruned.modes[c]) {
      coef_rate +=
          pruned.priors[c] * inv_n * (0.5 * std::log2(mode.eigenvalue / pruned.level));
    }
  }
  const double label_budget =
      cfg.tau == kTauInfinite
          ? 0.0
          : entropy_bits(pruned.priors) /
                (static_cast<double>(cfg.tau) * static_cast<double>(pruned.n));
  const double total_rate = coef_rate + label_budget;
  const CodecView view = make_view(pruned);
  return encode_with_view(samples, view, cfg, pruned.level, total_rate, dictionary_checksum,
                          labels);
}

LabeledSamples decode_stream_pruned(const Bitstream& bs, const PrunedDictionary& pruned,
                                    std::uint64_t dictionary_checksum) {
  if (bs.dictionary_checksum != dictionary_checksum) {
    throw DictionaryMismatchError("bitstream was coded with a different dictionary");
  }
  if (bs.mode == CodecMode::kWutc) {
    throw DomainError("pruned decode supports the global-level modes only");
  }
  const CodecView view = make_view(pruned);
  return decode_with_view(bs, view);
}

MixtureDictionary make_tc_dictionary(const LabeledSamples& samples) {
  if (samples.count < 2) throw InsufficientDataError("make_tc_dictionary: need >= 2 samples");
  const std::size_t n = samples.dim;
  Vec mean(n, 0.0);
  for (std::size_t t = 0; t < samples.count; ++t) {
    const auto x = samples.row(t);
    for (std::size_t i = 0; i < n; ++i) mean[i] += x[i];
  }
  for (double& v : mean) v /= static_cast<double>(samples.count);
  SymMatrix cov(n);
  Vec diff(n);
  for (std::size_t t = 0; t < samples.count; ++t) {
    const auto x = samples.row(t);
    for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - mean[i];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) cov.add(i, j, diff[i] * diff[j]);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      cov.set(i, j, cov(i, j) / static_cast<double>(samples.count));
  return make_dictionary({1.0}, {std::move(mean)}, {cov});
}

}  // namespace prismquant
