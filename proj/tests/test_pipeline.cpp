#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "prismquant/dataset.hpp"
#include "prismquant/errors.hpp"
#include "prismquant/rng.hpp"
#include "prismquant/sweep.hpp"
#include "prismquant/synthetic.hpp"

using namespace prismquant;

TEST_CASE("synth_mixture draws inside the protocol") {
  SynthSpec spec;
  spec.k = 6;
  spec.n = 5;
  spec.seed = 101;
  spec.sample_count = 60000;
  const auto result = synth_mixture(spec);
  const auto& dict = result.dictionary;

  double prior_sum = 0.0;
  for (double p : dict.priors) {
    CHECK(p > 0.0);
    prior_sum += p;
  }
  CHECK(prior_sum == doctest::Approx(1.0).epsilon(1e-12));

  for (std::size_t c = 0; c < dict.k; ++c) {
    for (double v : dict.means[c]) CHECK(v == 0.0);
    for (double lambda : dict.eigs[c].eigenvalues) {
      CHECK(lambda >= 0.1);
      CHECK(lambda <= 10.0);
    }
  }

  // Empirical label frequencies within 3 standard errors of the priors.
  std::vector<std::size_t> counts(dict.k, 0);
  for (auto l : result.samples.labels) ++counts[l];
  for (std::size_t c = 0; c < dict.k; ++c) {
    const double freq =
        static_cast<double>(counts[c]) / static_cast<double>(result.samples.count);
    const double se = std::sqrt(dict.priors[c] * (1.0 - dict.priors[c]) /
                                static_cast<double>(result.samples.count));
    CHECK(std::abs(freq - dict.priors[c]) <= 3.0 * se);
  }
}

TEST_CASE("synth K = 1 is a single Gaussian with an orthonormal basis") {
  SynthSpec spec;
  spec.k = 1;
  spec.n = 4;
  spec.seed = 9;
  const auto dict = synth_dictionary(spec);
  CHECK(dict.k == 1);
  CHECK(dict.priors[0] == doctest::Approx(1.0));
  const auto& basis = dict.eigs[0].basis;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < 4; ++m) acc += basis(m, i) * basis(m, j);
      CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("synth is deterministic for a fixed seed") {
  SynthSpec spec;
  spec.k = 3;
  spec.n = 4;
  spec.seed = 55;
  spec.sample_count = 100;
  const auto a = synth_mixture(spec);
  const auto b = synth_mixture(spec);
  CHECK(serialize_dictionary(a.dictionary) == serialize_dictionary(b.dictionary));
  CHECK(a.samples.values == b.samples.values);
  CHECK(a.samples.labels == b.samples.labels);
}

TEST_CASE("dataset container round trips all element types") {
  Rng rng(7);
  for (ElementType type : {ElementType::kF32Real, ElementType::kF64Real,
                           ElementType::kF32Complex, ElementType::kF64Complex}) {
    Dataset data;
    data.record_count = 5;
    data.record_length = 6;
    data.element_type = type;
    data.values.resize(data.record_count * data.doubles_per_record());
    for (double& v : data.values) {
      v = rng.gaussian();
      if (type == ElementType::kF32Real || type == ElementType::kF32Complex) {
        v = static_cast<double>(static_cast<float>(v));  // representable in f32
      }
    }
    const auto bytes = serialize_dataset(data);
    const auto parsed = parse_dataset(bytes);
    CHECK(parsed.record_count == data.record_count);
    CHECK(parsed.record_length == data.record_length);
    CHECK(parsed.element_type == data.element_type);
    CHECK(parsed.values == data.values);
  }
}

TEST_CASE("partition anchors") {
  // One complex element, n = 2: a single (re, im) block.
  Dataset one;
  one.record_count = 1;
  one.record_length = 1;
  one.element_type = ElementType::kF64Complex;
  one.values = {3.0, -4.0};
  const auto parts = partition_dataset(one, 2);
  CHECK(parts.blocks.count == 1);
  CHECK(parts.blocks_per_record == 1);
  CHECK(parts.pad == 0);
  CHECK(parts.blocks.values == std::vector<double>{3.0, -4.0});

  // 32 x 32 complex record into n = 1024 gives 2 blocks per record.
  Dataset big;
  big.record_count = 3;
  big.record_length = 32 * 32;
  big.element_type = ElementType::kF64Complex;
  big.values.resize(big.record_count * big.doubles_per_record());
  Rng rng(2);
  for (double& v : big.values) v = rng.gaussian();
  const auto parts2 = partition_dataset(big, 1024);
  CHECK(parts2.blocks_per_record == 2);
  CHECK(parts2.blocks.count == 6);
  CHECK(parts2.pad == 0);

  // Reassembly after identity coding reproduces the raw records exactly.
  const auto rebuilt = reassemble_dataset(parts2, ElementType::kF64Complex, 32 * 32);
  CHECK(rebuilt.values == big.values);

  // Padding path: length 5 real records into n = 3.
  Dataset ragged;
  ragged.record_count = 2;
  ragged.record_length = 5;
  ragged.element_type = ElementType::kF64Real;
  ragged.values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto parts3 = partition_dataset(ragged, 3);
  CHECK(parts3.blocks_per_record == 2);
  CHECK(parts3.pad == 1);
  CHECK(parts3.blocks.values[5] == 0.0);  // the padded slot
  const auto rebuilt3 = reassemble_dataset(parts3, ElementType::kF64Real, 5);
  CHECK(rebuilt3.values == ragged.values);
}

TEST_CASE("partition rejects malformed input") {
  Dataset bad;
  bad.record_count = 1;
  bad.record_length = 2;
  bad.element_type = ElementType::kF64Real;
  bad.values = {1.0, std::nan("")};
  CHECK_THROWS_AS(partition_dataset(bad, 2), IngestionError);
}

TEST_CASE("label sidecar round trip") {
  const std::vector<std::uint32_t> labels{0, 3, 2, 2, 1, 0};
  save_labels(labels, 4, "/tmp/pq_test_labels.bin");
  CHECK(load_labels("/tmp/pq_test_labels.bin") == labels);
}

TEST_CASE("containers reject headers inconsistent with the payload size") {
  Dataset data;
  data.record_count = 2;
  data.record_length = 3;
  data.element_type = ElementType::kF64Real;
  data.values = {1, 2, 3, 4, 5, 6};
  auto bytes = serialize_dataset(data);

  // Inflate the record count field without supplying the payload.
  auto inflated = bytes;
  inflated[9] = 0xFF;  // low byte of record_count (after magic + version)
  CHECK_THROWS_AS(parse_dataset(inflated), CorruptStreamError);

  // Implausibly huge dimensions must be rejected before any allocation.
  auto huge = bytes;
  for (int i = 0; i < 8; ++i) huge[9 + i] = 0xFF;
  CHECK_THROWS_AS(parse_dataset(huge), CorruptStreamError);

  SynthSpec spec;
  spec.k = 2;
  spec.n = 2;
  spec.seed = 3;
  auto dict_bytes = serialize_dictionary(synth_dictionary(spec));
  dict_bytes[8] = 0x7F;  // K field
  CHECK_THROWS_AS(parse_dictionary(dict_bytes), CorruptStreamError);
}

TEST_CASE("rd_sweep produces ordered, monotone, reproducible curves") {
  SynthSpec spec;
  spec.k = 3;
  spec.n = 6;
  spec.seed = 77;
  spec.sample_count = 20000;
  const auto synth = synth_mixture(spec);

  SweepSpec sweep;
  sweep.levels = log_spaced_levels(1e-3, 10.0, 12);
  sweep.curves = {Curve::kTheoryLower, Curve::kTheoryUpper, Curve::kGenie, Curve::kMap,
                  Curve::kTc, Curve::kWutc};
  const auto points = rd_sweep(synth.dictionary, synth.samples, sweep);
  CHECK(points.size() == 6 * sweep.levels.size());

  // Sorted by (curve, level); within each curve rate falls and nmse rises.
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& prev = points[i - 1];
    const auto& cur = points[i];
    if (prev.curve != cur.curve) continue;
    CHECK(cur.level > prev.level);
    CHECK(cur.rate <= prev.rate + 1e-9);
    CHECK(cur.nmse >= prev.nmse - 1e-9);
  }

  // Sandwich identity at every level.
  const double label_rate = entropy_bits(synth.dictionary.priors) / 6.0;
  for (std::size_t i = 0; i < sweep.levels.size(); ++i) {
    const auto& lower = points[i];
    const auto& upper = points[sweep.levels.size() + i];
    REQUIRE(lower.curve == Curve::kTheoryLower);
    REQUIRE(upper.curve == Curve::kTheoryUpper);
    CHECK(upper.level == lower.level);
    CHECK(std::abs((upper.rate - lower.rate) - label_rate) <= 1e-12);
    CHECK(upper.nmse == lower.nmse);
  }

  // The top level submerges every mode: mean-only coding (the label bits
  // remain, the coefficient segment is flush-only).
  const auto& genie_top = points[2 * sweep.levels.size() + sweep.levels.size() - 1];
  REQUIRE(genie_top.curve == Curve::kGenie);
  REQUIRE(genie_top.coef_rate.has_value());
  CHECK(*genie_top.coef_rate < 0.01);
  CHECK(genie_top.nmse == doctest::Approx(1.0).epsilon(0.05));

  // MAP disagreement obeys the union bound.
  const auto& map_point = points[3 * sweep.levels.size()];
  REQUIRE(map_point.curve == Curve::kMap);
  REQUIRE(map_point.map_disagreement.has_value());
  const double bound = map_error_union_bound(synth.dictionary);
  const double se = std::sqrt(std::max(*map_point.map_disagreement *
                                           (1.0 - *map_point.map_disagreement),
                                       1e-12) /
                              static_cast<double>(synth.samples.count));
  CHECK(*map_point.map_disagreement <= bound + 3.0 * se);

  // Byte-identical CSV on repeated runs.
  const auto again = rd_sweep(synth.dictionary, synth.samples, sweep);
  CHECK(points_to_csv(points) == points_to_csv(again));
}

TEST_CASE("csv formatting") {
  std::vector<RdPoint> points{{Curve::kTheoryLower, 0.5, 1.25, 0.125, 0.0, 1.25, std::nullopt}};
  const std::string csv = points_to_csv(points);
  CHECK(csv ==
        "curve,mu,rate_bits_per_dim,nmse,label_bits_per_dim,coef_bits_per_dim,"
        "map_disagreement\n"
        "theory-lower,0.5,1.25,0.125,0,1.25,\n");
}
