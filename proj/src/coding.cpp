#include "prismquant/coding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prismquant/errors.hpp"

namespace prismquant {

// --- bit IO ---

void BitWriter::put_bit(bool bit) {
  current_ = static_cast<std::uint8_t>((current_ << 1) | (bit ? 1 : 0));
  if (++filled_ == 8) {
    buf_.push_back(current_);
    current_ = 0;
    filled_ = 0;
  }
  ++bit_count_;
}

void BitWriter::put_bits(std::uint64_t value, unsigned count) {
  for (unsigned i = count; i-- > 0;) {
    put_bit((value >> i) & 1u);
  }
}

std::vector<std::uint8_t> BitWriter::finish() {
  if (filled_ > 0) {
    buf_.push_back(static_cast<std::uint8_t>(current_ << (8 - filled_)));
    current_ = 0;
    filled_ = 0;
  }
  return std::move(buf_);
}

bool BitReader::get_bit() {
  const std::size_t byte = static_cast<std::size_t>(pos_ >> 3);
  if (byte >= bytes_.size()) {
    throw CorruptStreamError("bit stream truncated", static_cast<std::size_t>(pos_));
  }
  const unsigned shift = 7u - static_cast<unsigned>(pos_ & 7u);
  ++pos_;
  return (bytes_[byte] >> shift) & 1u;
}

// --- canonical Huffman label code ---

double LabelCode::expected_length(std::span<const double> prior) const {
  double acc = 0.0;
  for (std::size_t s = 0; s < lengths.size(); ++s) acc += prior[s] * lengths[s];
  return acc;
}

LabelCode build_label_code(std::span<const double> priors) {
  const std::size_t k = priors.size();
  LabelCode code;
  code.lengths.assign(k, 0);
  code.codewords.assign(k, 0);
  if (k <= 1) return code;

  struct Node {
    double prob;
    std::size_t min_symbol;  // tie-break representative
    int left = -1, right = -1;
    std::uint32_t symbol = 0;
    bool leaf = false;
  };
  std::vector<Node> pool;
  pool.reserve(2 * k);
  std::vector<int> active;
  for (std::size_t s = 0; s < k; ++s) {
    pool.push_back({priors[s], s, -1, -1, static_cast<std::uint32_t>(s), true});
    active.push_back(static_cast<int>(s));
  }
  const auto lighter = [&](int a, int b) {
    if (pool[a].prob != pool[b].prob) return pool[a].prob < pool[b].prob;
    return pool[a].min_symbol < pool[b].min_symbol;
  };
  while (active.size() > 1) {
    // O(K^2) selection keeps the tie-break rule transparent; K is small.
    std::size_t i0 = 0;
    for (std::size_t i = 1; i < active.size(); ++i)
      if (lighter(active[i], active[i0])) i0 = i;
    const int a = active[i0];
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(i0));
    std::size_t i1 = 0;
    for (std::size_t i = 1; i < active.size(); ++i)
      if (lighter(active[i], active[i1])) i1 = i;
    const int b = active[i1];
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(i1));
    pool.push_back({pool[a].prob + pool[b].prob, std::min(pool[a].min_symbol, pool[b].min_symbol),
                    a, b, 0, false});
    active.push_back(static_cast<int>(pool.size() - 1));
  }

  // Depths by iterative traversal.
  std::vector<std::pair<int, std::uint8_t>> stack{{active[0], 0}};
  while (!stack.empty()) {
    const auto [node, depth] = stack.back();
    stack.pop_back();
    if (pool[node].leaf) {
      code.lengths[pool[node].symbol] = depth;
    } else {
      stack.push_back({pool[node].left, static_cast<std::uint8_t>(depth + 1)});
      stack.push_back({pool[node].right, static_cast<std::uint8_t>(depth + 1)});
    }
  }

  // Canonical assignment: sort by (length, symbol), consecutive codewords.
  std::vector<std::uint32_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
    if (code.lengths[x] != code.lengths[y]) return code.lengths[x] < code.lengths[y];
    return x < y;
  });
  std::uint64_t next = 0;
  std::uint8_t prev_len = code.lengths[order[0]];
  for (std::uint32_t sym : order) {
    next <<= (code.lengths[sym] - prev_len);
    code.codewords[sym] = next;
    prev_len = code.lengths[sym];
    ++next;
  }
  return code;
}

void encode_labels(std::span<const std::uint32_t> labels, const LabelCode& code, BitWriter& out) {
  for (std::uint32_t label : labels) {
    if (label >= code.symbol_count()) throw DomainError("encode_labels: label out of range");
    out.put_bits(code.codewords[label], code.lengths[label]);
  }
}

std::vector<std::uint32_t> decode_labels(BitReader& in, const LabelCode& code, std::size_t count) {
  std::vector<std::uint32_t> out(count, 0);
  const std::size_t k = code.symbol_count();
  if (k <= 1) return out;  // zero-length codewords

  // Canonical decode tables per length.
  std::uint8_t max_len = 0;
  for (std::uint8_t l : code.lengths) max_len = std::max(max_len, l);
  std::vector<std::uint32_t> count_at(max_len + 1, 0);
  for (std::uint8_t l : code.lengths) ++count_at[l];
  std::vector<std::uint64_t> first_code(max_len + 1, 0);
  std::vector<std::uint32_t> first_index(max_len + 1, 0);
  std::vector<std::uint32_t> sorted(k);
  std::iota(sorted.begin(), sorted.end(), 0);
  std::sort(sorted.begin(), sorted.end(), [&](std::uint32_t x, std::uint32_t y) {
    if (code.lengths[x] != code.lengths[y]) return code.lengths[x] < code.lengths[y];
    return x < y;
  });
  {
    std::uint64_t c = 0;
    std::uint32_t idx = 0;
    for (std::uint8_t l = 1; l <= max_len; ++l) {
      c <<= 1;
      first_code[l] = c;
      first_index[l] = idx;
      c += count_at[l];
      idx += count_at[l];
    }
  }

  for (std::size_t t = 0; t < count; ++t) {
    std::uint64_t word = 0;
    for (std::uint8_t l = 1; l <= max_len; ++l) {
      word = (word << 1) | (in.get_bit() ? 1u : 0u);
      const std::uint64_t offset = word - first_code[l];
      if (count_at[l] > 0 && word >= first_code[l] && offset < count_at[l]) {
        out[t] = sorted[first_index[l] + static_cast<std::uint32_t>(offset)];
        break;
      }
      if (l == max_len) {
        throw CorruptStreamError("decode_labels: invalid codeword",
                                 static_cast<std::size_t>(in.bit_position()));
      }
    }
  }
  return out;
}

// --- index model ---

namespace {
constexpr std::uint32_t kFreqTotal = 1u << 16;
}

double IndexModel::cross_entropy_bits(std::span<const std::int64_t> indices) const {
  double bits = 0.0;
  for (std::int64_t idx : indices) {
    const std::size_t slot = static_cast<std::size_t>(idx + max_index);
    bits -= std::log2(static_cast<double>(frequency(slot)) / kFreqTotal);
  }
  return bits;
}

IndexModel build_index_model(const ScalarQuantizer& q) {
  return build_index_model(q.model, q.clip_index);
}

IndexModel build_index_model(std::span<const double> probabilities, std::int64_t max_index) {
  const std::size_t alphabet = probabilities.size();
  if (alphabet == 0 || alphabet != static_cast<std::size_t>(2 * max_index + 1)) {
    throw DomainError("build_index_model: alphabet/max_index mismatch");
  }
  if (alphabet > kFreqTotal) {
    throw DomainError("build_index_model: alphabet larger than frequency total");
  }

  std::vector<std::uint32_t> freq(alphabet);
  std::vector<double> remainder(alphabet);
  std::uint64_t assigned = 0;
  for (std::size_t s = 0; s < alphabet; ++s) {
    const double scaled = probabilities[s] * kFreqTotal;
    freq[s] = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(scaled));
    remainder[s] = scaled - std::floor(scaled);
    assigned += freq[s];
  }
  std::vector<std::uint32_t> order(alphabet);
  std::iota(order.begin(), order.end(), 0);
  if (assigned < kFreqTotal) {
    // Hand out the leftovers by largest fractional part, ties by slot.
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
      return a < b;
    });
    std::uint64_t leftover = kFreqTotal - assigned;
    for (std::size_t i = 0; leftover > 0; i = (i + 1) % alphabet) {
      ++freq[order[i]];
      --leftover;
    }
  } else if (assigned > kFreqTotal) {
    // Claw back the forced minimums from the heaviest slots.
    std::uint64_t excess = assigned - kFreqTotal;
    while (excess > 0) {
      std::size_t heaviest = 0;
      for (std::size_t s = 1; s < alphabet; ++s)
        if (freq[s] > freq[heaviest]) heaviest = s;
      const std::uint32_t take =
          std::min<std::uint64_t>(excess, freq[heaviest] - 1);
      if (take == 0) throw DomainError("build_index_model: cannot satisfy minimum frequencies");
      freq[heaviest] -= take;
      excess -= take;
    }
  }

  IndexModel model;
  model.max_index = max_index;
  model.cumulative.resize(alphabet + 1);
  model.cumulative[0] = 0;
  for (std::size_t s = 0; s < alphabet; ++s) {
    model.cumulative[s + 1] = model.cumulative[s] + freq[s];
  }
  return model;
}

// --- range coder ---

namespace {
constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint32_t kBottom = 1u << 16;
}

void RangeEncoder::normalize() {
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBottom && ((range_ = (0u - low_) & (kBottom - 1)), true))) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

void RangeEncoder::encode(std::uint32_t cum_lo, std::uint32_t cum_hi) {
  const std::uint32_t r = range_ / kFreqTotal;
  low_ += r * cum_lo;
  range_ = r * (cum_hi - cum_lo);
  normalize();
}

void RangeEncoder::finish() {
  for (int i = 0; i < 4; ++i) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ <<= 8;
  }
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size()) {
    throw CorruptStreamError("range-coded stream truncated", pos_);
  }
  return bytes_[pos_++];
}

std::uint32_t RangeDecoder::decode_target() {
  range_ /= kFreqTotal;
  const std::uint32_t target = (code_ - low_) / range_;
  if (target >= kFreqTotal) {
    throw CorruptStreamError("range-coded stream corrupt", pos_);
  }
  return target;
}

void RangeDecoder::consume(std::uint32_t cum_lo, std::uint32_t cum_hi) {
  low_ += range_ * cum_lo;
  range_ *= (cum_hi - cum_lo);
  normalize();
}

void RangeDecoder::normalize() {
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBottom && ((range_ = (0u - low_) & (kBottom - 1)), true))) {
    code_ = (code_ << 8) | next_byte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

void range_encode(std::span<const std::int64_t> indices,
                  std::span<const IndexModel* const> models, std::vector<std::uint8_t>& out) {
  RangeEncoder enc(out);
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const IndexModel& m = *models[t];
    const std::int64_t slot = indices[t] + m.max_index;
    if (slot < 0 || static_cast<std::size_t>(slot) >= m.alphabet_size()) {
      throw DomainError("range_encode: index outside the model alphabet");
    }
    enc.encode(m.cumulative[static_cast<std::size_t>(slot)],
               m.cumulative[static_cast<std::size_t>(slot) + 1]);
  }
  enc.finish();
}

std::vector<std::int64_t> range_decode(std::span<const std::uint8_t> bytes,
                                       std::span<const IndexModel* const> models) {
  std::vector<std::int64_t> out(models.size());
  if (models.empty()) return out;
  RangeDecoder dec(bytes);
  for (std::size_t t = 0; t < models.size(); ++t) {
    const IndexModel& m = *models[t];
    const std::uint32_t target = dec.decode_target();
    // cumulative is strictly increasing: binary search the containing slot.
    const auto it = std::upper_bound(m.cumulative.begin(), m.cumulative.end(), target);
    const std::size_t slot = static_cast<std::size_t>(it - m.cumulative.begin()) - 1;
    dec.consume(m.cumulative[slot], m.cumulative[slot + 1]);
    out[t] = static_cast<std::int64_t>(slot) - m.max_index;
  }
  return out;
}

}  // namespace prismquant
