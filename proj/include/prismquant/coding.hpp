#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prismquant/quantizer.hpp"

namespace prismquant {

/// MSB-first bit writer.
class BitWriter {
 public:
  void put_bit(bool bit);
  void put_bits(std::uint64_t value, unsigned count);  // MSB of `count` bits first
  std::uint64_t bit_count() const { return bit_count_; }
  /// Pads the final partial byte with zeros and returns the buffer.
  std::vector<std::uint8_t> finish();

 private:
  std::vector<std::uint8_t> buf_;
  std::uint8_t current_ = 0;
  unsigned filled_ = 0;
  std::uint64_t bit_count_ = 0;
};

/// MSB-first bit reader; throws CorruptStreamError past the end.
class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  bool get_bit();
  std::uint64_t bit_position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

/// Canonical Huffman code over component labels. K = 1 uses zero-length
/// codewords (the label stream carries no bits).
struct LabelCode {
  std::vector<std::uint8_t> lengths;
  std::vector<std::uint64_t> codewords;  // canonical values, MSB-first

  std::size_t symbol_count() const { return lengths.size(); }
  double expected_length(std::span<const double> prior) const;
};

/// Huffman construction with deterministic tie-breaking: merge the two
/// lowest-probability nodes, ties resolved toward the smallest contained
/// symbol index; codewords assigned canonically.
LabelCode build_label_code(std::span<const double> priors);

void encode_labels(std::span<const std::uint32_t> labels, const LabelCode& code, BitWriter& out);
std::vector<std::uint32_t> decode_labels(BitReader& in, const LabelCode& code, std::size_t count);

/// Static frequency table for the range coder: alphabet [-max_index,
/// max_index], integer cumulative frequencies summing to 2^16, every symbol
/// frequency >= 1.
struct IndexModel {
  std::int64_t max_index = 0;
  std::vector<std::uint32_t> cumulative;  // size alphabet+1, [0] = 0, back() = 65536

  std::size_t alphabet_size() const { return cumulative.size() - 1; }
  std::uint32_t frequency(std::size_t slot) const {
    return cumulative[slot + 1] - cumulative[slot];
  }
  /// -sum log2(freq/total) over a symbol stream, the coder's size yardstick.
  double cross_entropy_bits(std::span<const std::int64_t> indices) const;
};

IndexModel build_index_model(const ScalarQuantizer& q);
IndexModel build_index_model(std::span<const double> probabilities, std::int64_t max_index);

/// Carryless range coder, 32-bit state, byte renormalization with a 2^16
/// range floor matching the frequency total.
class RangeEncoder {
 public:
  explicit RangeEncoder(std::vector<std::uint8_t>& out) : out_(out) {}
  void encode(std::uint32_t cum_lo, std::uint32_t cum_hi);
  void finish();

 private:
  void normalize();
  std::vector<std::uint8_t>& out_;
  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);
  /// Current cumulative-frequency slot value in [0, 65536).
  std::uint32_t decode_target();
  void consume(std::uint32_t cum_lo, std::uint32_t cum_hi);

 private:
  void normalize();
  std::uint8_t next_byte();
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

/// Encodes index streams against per-position models. models[i] applies to
/// indices[i]; pass the same pointer repeatedly for a shared model.
void range_encode(std::span<const std::int64_t> indices,
                  std::span<const IndexModel* const> models, std::vector<std::uint8_t>& out);
std::vector<std::int64_t> range_decode(std::span<const std::uint8_t> bytes,
                                       std::span<const IndexModel* const> models);

}  // namespace prismquant
