#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prismquant/gmm.hpp"

namespace prismquant {

enum class ElementType : std::uint8_t {
  kF32Real = 0,
  kF64Real = 1,
  kF32Complex = 2,  // interleaved re, im
  kF64Complex = 3,
};

/// Raw record container (PQDATA1). Values are held as doubles; complex
/// records store interleaved re/im pairs, so a record occupies
/// record_length * 2 doubles.
struct Dataset {
  std::uint64_t record_count = 0;
  std::uint64_t record_length = 0;  // elements per record (complex counts pairs)
  ElementType element_type = ElementType::kF64Real;
  std::vector<double> values;

  bool is_complex() const {
    return element_type == ElementType::kF32Complex || element_type == ElementType::kF64Complex;
  }
  std::size_t doubles_per_record() const {
    return static_cast<std::size_t>(record_length) * (is_complex() ? 2 : 1);
  }
};

std::vector<std::uint8_t> serialize_dataset(const Dataset& data);
Dataset parse_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

/// LabeledSamples <-> Dataset adapters (f64 real records of length dim).
Dataset dataset_from_samples(const LabeledSamples& samples);
LabeledSamples samples_from_dataset(const Dataset& data);

/// Block partition of raw records into real n-vectors: complex records are
/// split into [re; im] and concatenated, zero-padded to a multiple of n,
/// then chopped into blocks. Padding metadata makes reassembly lossless.
struct PartitionedData {
  LabeledSamples blocks;             // all records' blocks, record-major
  std::size_t block_dim = 0;         // n
  std::size_t blocks_per_record = 0;
  std::size_t real_length = 0;       // unpadded real length per record
  std::size_t pad = 0;               // zeros appended per record
};

PartitionedData partition_dataset(const Dataset& raw, std::size_t n);

/// Inverse of partition_dataset given possibly-modified block values (e.g.
/// after a codec round trip); restores the original record layout.
Dataset reassemble_dataset(const PartitionedData& parts, ElementType element_type,
                           std::uint64_t record_length);

/// Oracle-label sidecar (PQLBL1) so genie-mode coding works from files.
void save_labels(std::span<const std::uint32_t> labels, std::uint32_t k,
                 const std::string& path);
std::vector<std::uint32_t> load_labels(const std::string& path);

}  // namespace prismquant
