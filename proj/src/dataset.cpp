#include "prismquant/dataset.hpp"

#include <cmath>
#include <cstring>

#include "prismquant/errors.hpp"
#include "prismquant/serialize.hpp"

namespace prismquant {

namespace {
constexpr std::uint16_t kDataVersion = 1;
constexpr std::uint16_t kLabelVersion = 1;

bool is_f32(ElementType t) {
  return t == ElementType::kF32Real || t == ElementType::kF32Complex;
}
}  // namespace

std::vector<std::uint8_t> serialize_dataset(const Dataset& data) {
  ByteWriter w;
  w.magic("PQDATA1");
  w.u16(kDataVersion);
  w.u64(data.record_count);
  w.u64(data.record_length);
  w.u8(static_cast<std::uint8_t>(data.element_type));
  const std::size_t expected = data.record_count * data.doubles_per_record();
  if (data.values.size() != expected) {
    throw DomainError("serialize_dataset: payload size mismatch");
  }
  if (is_f32(data.element_type)) {
    for (double v : data.values) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      w.u32(bits);
    }
  } else {
    for (double v : data.values) w.f64(v);
  }
  return w.take();
}

Dataset parse_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("PQDATA1");
  const std::uint16_t version = r.u16();
  if (version != kDataVersion) {
    throw CorruptStreamError("unsupported dataset version " + std::to_string(version), 7);
  }
  Dataset data;
  data.record_count = r.u64();
  data.record_length = r.u64();
  const std::uint8_t type = r.u8();
  if (type > static_cast<std::uint8_t>(ElementType::kF64Complex)) {
    throw CorruptStreamError("unknown element type", r.position() - 1);
  }
  data.element_type = static_cast<ElementType>(type);
  if (data.record_length > (1ull << 48) || data.record_count > (1ull << 48)) {
    throw CorruptStreamError("dataset header dimensions implausible", r.position());
  }
  const unsigned __int128 expected_bytes =
      static_cast<unsigned __int128>(data.record_count) * data.doubles_per_record() *
      (is_f32(data.element_type) ? 4 : 8);
  if (expected_bytes != static_cast<unsigned __int128>(r.remaining())) {
    throw CorruptStreamError("dataset payload size inconsistent with header", r.position());
  }
  const std::size_t count = data.record_count * data.doubles_per_record();
  data.values.resize(count);
  if (is_f32(data.element_type)) {
    for (double& v : data.values) {
      const std::uint32_t bits = r.u32();
      float f;
      std::memcpy(&f, &bits, 4);
      v = static_cast<double>(f);
    }
  } else {
    for (double& v : data.values) v = r.f64();
  }
  if (r.remaining() != 0) throw CorruptStreamError("trailing bytes after dataset", r.position());
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  write_file(path, serialize_dataset(data));
}

Dataset load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

Dataset dataset_from_samples(const LabeledSamples& samples) {
  Dataset data;
  data.record_count = samples.count;
  data.record_length = samples.dim;
  data.element_type = ElementType::kF64Real;
  data.values = samples.values;
  return data;
}

LabeledSamples samples_from_dataset(const Dataset& data) {
  if (data.is_complex()) {
    throw DomainError("samples_from_dataset: complex records need partition_dataset first");
  }
  LabeledSamples s;
  s.count = data.record_count;
  s.dim = data.record_length;
  s.values = data.values;
  return s;
}

PartitionedData partition_dataset(const Dataset& raw, std::size_t n) {
  if (n < 1) throw DomainError("partition_dataset: n must be >= 1");
  const std::size_t per_record = raw.doubles_per_record();
  if (raw.values.size() != raw.record_count * per_record) {
    throw IngestionError("dataset payload inconsistent with header", 0);
  }

  PartitionedData parts;
  parts.block_dim = n;
  parts.real_length = per_record;  // complex: 2 * record_length after the re/im split
  parts.blocks_per_record = (per_record + n - 1) / n;
  parts.pad = parts.blocks_per_record * n - per_record;
  parts.blocks.count = raw.record_count * parts.blocks_per_record;
  parts.blocks.dim = n;
  parts.blocks.values.assign(parts.blocks.count * n, 0.0);

  Vec stacked(parts.blocks_per_record * n);
  for (std::size_t rec = 0; rec < raw.record_count; ++rec) {
    const double* src = &raw.values[rec * per_record];
    std::fill(stacked.begin(), stacked.end(), 0.0);
    if (raw.is_complex()) {
      // [re_0..re_{L-1}, im_0..im_{L-1}]
      const std::size_t len = raw.record_length;
      for (std::size_t e = 0; e < len; ++e) {
        if (!std::isfinite(src[2 * e]) || !std::isfinite(src[2 * e + 1])) {
          throw IngestionError("non-finite element", rec);
        }
        stacked[e] = src[2 * e];
        stacked[len + e] = src[2 * e + 1];
      }
    } else {
      for (std::size_t e = 0; e < per_record; ++e) {
        if (!std::isfinite(src[e])) throw IngestionError("non-finite element", rec);
        stacked[e] = src[e];
      }
    }
    std::copy(stacked.begin(), stacked.end(),
              parts.blocks.values.begin() +
                  static_cast<std::ptrdiff_t>(rec * parts.blocks_per_record * n));
  }
  return parts;
}

Dataset reassemble_dataset(const PartitionedData& parts, ElementType element_type,
                           std::uint64_t record_length) {
  const bool complex_records = element_type == ElementType::kF32Complex ||
                               element_type == ElementType::kF64Complex;
  const std::size_t per_record = static_cast<std::size_t>(record_length) *
                                 (complex_records ? 2 : 1);
  if (per_record != parts.real_length) {
    throw DomainError("reassemble_dataset: record length does not match the partition");
  }
  if (parts.blocks.count % parts.blocks_per_record != 0) {
    throw DomainError("reassemble_dataset: block count not a multiple of blocks per record");
  }
  Dataset data;
  data.record_count = parts.blocks.count / parts.blocks_per_record;
  data.record_length = record_length;
  data.element_type = element_type;
  data.values.resize(data.record_count * per_record);
  const std::size_t stacked_len = parts.blocks_per_record * parts.block_dim;
  for (std::size_t rec = 0; rec < data.record_count; ++rec) {
    const double* stacked = &parts.blocks.values[rec * stacked_len];
    double* dst = &data.values[rec * per_record];
    if (complex_records) {
      const std::size_t len = record_length;
      for (std::size_t e = 0; e < len; ++e) {
        dst[2 * e] = stacked[e];
        dst[2 * e + 1] = stacked[len + e];
      }
    } else {
      for (std::size_t e = 0; e < per_record; ++e) dst[e] = stacked[e];
    }
  }
  return data;
}

void save_labels(std::span<const std::uint32_t> labels, std::uint32_t k,
                 const std::string& path) {
  ByteWriter w;
  w.magic("PQLBL1");
  w.u16(kLabelVersion);
  w.u64(labels.size());
  w.u32(k);
  for (std::uint32_t label : labels) w.u32(label);
  write_file(path, w.bytes());
}

std::vector<std::uint32_t> load_labels(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes);
  r.expect_magic("PQLBL1");
  const std::uint16_t version = r.u16();
  if (version != kLabelVersion) {
    throw CorruptStreamError("unsupported label file version " + std::to_string(version), 6);
  }
  const std::uint64_t count = r.u64();
  const std::uint32_t k = r.u32();
  if (static_cast<unsigned __int128>(count) * 4 !=
      static_cast<unsigned __int128>(r.remaining())) {
    throw CorruptStreamError("label payload size inconsistent with header", r.position());
  }
  std::vector<std::uint32_t> labels(count);
  for (auto& label : labels) {
    label = r.u32();
    if (label >= k) throw CorruptStreamError("label out of range", r.position() - 4);
  }
  if (r.remaining() != 0) throw CorruptStreamError("trailing bytes after labels", r.position());
  return labels;
}

}  // namespace prismquant
