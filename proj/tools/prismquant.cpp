// prismquant: lossy compression toolkit for Gaussian-mixture sources.
//
// Subcommands: synth, fit, ingest, encode, decode, bounds, sweep, prune.
// Every command ends with one machine-readable JSON summary line on stdout;
// errors go to stderr with a nonzero exit code.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "prismquant/codec.hpp"
#include "prismquant/dataset.hpp"
#include "prismquant/errors.hpp"
#include "prismquant/gmm.hpp"
#include "prismquant/serialize.hpp"
#include "prismquant/sweep.hpp"
#include "prismquant/synthetic.hpp"

namespace pq = prismquant;
using nlohmann::json;

namespace {

void emit(const json& summary) { std::cout << summary.dump() << std::endl; }

std::vector<pq::Curve> parse_curves(const std::string& csv) {
  std::vector<pq::Curve> curves;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string token =
        csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!token.empty()) curves.push_back(pq::curve_from_name(token));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (curves.empty()) throw pq::DomainError("no curves requested");
  return curves;
}

struct LevelOptions {
  double lo = 1e-5;
  double hi = 10.0;
  std::size_t count = 50;

  void attach(CLI::App* cmd) {
    cmd->add_option("--level-min", lo, "Smallest water level");
    cmd->add_option("--level-max", hi, "Largest water level");
    cmd->add_option("--levels", count, "Number of log-spaced water levels");
  }
  std::vector<double> build() const { return pq::log_spaced_levels(lo, hi, count); }
};

int run(int argc, char** argv) {
  CLI::App app{"PrismQuant codec and rate-distortion toolkit"};
  app.require_subcommand(1);

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "Generate a synthetic mixture and samples");
  std::size_t synth_k = 8, synth_n = 32, synth_samples = 100000;
  std::uint64_t synth_seed = 1;
  double var_min = 0.1, var_max = 10.0;
  bool log_uniform = false;
  std::string synth_dict_out, synth_data_out, synth_labels_out, synth_json_out;
  synth->add_option("--k", synth_k, "Mixture components");
  synth->add_option("--n", synth_n, "Source dimension");
  synth->add_option("--samples", synth_samples, "Sample count");
  synth->add_option("--seed", synth_seed, "RNG seed");
  synth->add_option("--var-min", var_min, "Eigenvalue range lower edge");
  synth->add_option("--var-max", var_max, "Eigenvalue range upper edge");
  synth->add_flag("--log-uniform", log_uniform, "Draw eigenvalues log-uniformly");
  synth->add_option("--out-dict", synth_dict_out, "Dictionary output (PQDICT)")->required();
  synth->add_option("--out-data", synth_data_out, "Sample output (PQDATA1)");
  synth->add_option("--out-labels", synth_labels_out, "Oracle label output (PQLBL1)");
  synth->add_option("--json-out", synth_json_out, "Also export the dictionary as JSON");

  // --- fit ---
  auto* fit = app.add_subcommand("fit", "Fit a mixture dictionary with EM");
  std::string fit_data, fit_dict_out, fit_json_out;
  std::size_t fit_k = 8, fit_restarts = 3, fit_max_iters = 200;
  std::uint64_t fit_seed = 1;
  double fit_tol = 1e-6;
  fit->add_option("--data", fit_data, "Training data (PQDATA1)")->required();
  fit->add_option("--k", fit_k, "Mixture components");
  fit->add_option("--seed", fit_seed, "RNG seed");
  fit->add_option("--restarts", fit_restarts, "EM restarts");
  fit->add_option("--max-iters", fit_max_iters, "EM iteration cap");
  fit->add_option("--tol", fit_tol, "Relative log-likelihood tolerance");
  fit->add_option("--out-dict", fit_dict_out, "Dictionary output (PQDICT)")->required();
  fit->add_option("--json-out", fit_json_out, "Also export the dictionary as JSON");

  // --- ingest ---
  auto* ingest = app.add_subcommand("ingest", "Partition raw records into n-blocks");
  std::string ingest_raw, ingest_out;
  std::size_t ingest_n = 32;
  ingest->add_option("--raw", ingest_raw, "Raw records (PQDATA1, real or complex)")->required();
  ingest->add_option("--n", ingest_n, "Block dimension");
  ingest->add_option("--out", ingest_out, "Block output (PQDATA1, f64 real)")->required();

  // --- encode ---
  auto* encode = app.add_subcommand("encode", "Encode samples into a bitstream");
  std::string enc_data, enc_dict, enc_labels, enc_out, enc_mode = "prismquant-map";
  double enc_rate = 1.0;
  std::uint32_t enc_tau = 1;
  bool enc_tau_inf = false;
  encode->add_option("--data", enc_data, "Samples (PQDATA1)")->required();
  encode->add_option("--dict", enc_dict, "Dictionary (PQDICT)")->required();
  encode->add_option("--labels", enc_labels, "Oracle labels (PQLBL1), genie mode");
  encode->add_option("--rate", enc_rate, "Total budget, bits/dim");
  encode->add_option("--tau", enc_tau, "Label amortization window");
  encode->add_flag("--tau-inf", enc_tau_inf, "Exclude the label rate (infinite window)");
  encode->add_option("--mode", enc_mode, "prismquant-map|prismquant-genie|tc-single|wutc");
  encode->add_option("--out", enc_out, "Bitstream output (PQBS1)")->required();

  // --- decode ---
  auto* decode = app.add_subcommand("decode", "Decode a bitstream");
  std::string dec_in, dec_dict, dec_out;
  decode->add_option("--bitstream", dec_in, "Bitstream (PQBS1)")->required();
  decode->add_option("--dict", dec_dict, "Dictionary (PQDICT)")->required();
  decode->add_option("--out", dec_out, "Reconstruction output (PQDATA1)")->required();

  // --- bounds ---
  auto* bounds = app.add_subcommand("bounds", "Sandwich bounds and entropy terms");
  std::string bounds_dict, bounds_csv;
  LevelOptions bounds_levels;
  bounds->add_option("--dict", bounds_dict, "Dictionary (PQDICT)")->required();
  bounds_levels.attach(bounds);
  bounds->add_option("--out", bounds_csv, "CSV output for the theory curves");

  // --- sweep ---
  auto* sweep = app.add_subcommand("sweep", "Rate-distortion sweep to CSV");
  std::string sweep_dict, sweep_data, sweep_labels, sweep_out;
  std::string sweep_curves = "theory-lower,theory-upper,genie,map";
  std::uint32_t sweep_tau = 1;
  bool sweep_tau_inf = false;
  LevelOptions sweep_levels;
  sweep->add_option("--dict", sweep_dict, "Dictionary (PQDICT)")->required();
  sweep->add_option("--data", sweep_data, "Samples (PQDATA1)")->required();
  sweep->add_option("--labels", sweep_labels, "Oracle labels (PQLBL1)");
  sweep->add_option("--curves", sweep_curves, "Comma-separated curve list");
  sweep->add_option("--tau", sweep_tau, "Label amortization window");
  sweep->add_flag("--tau-inf", sweep_tau_inf, "Exclude the label rate");
  sweep_levels.attach(sweep);
  sweep->add_option("--out", sweep_out, "CSV output")->required();

  // --- prune ---
  auto* prune = app.add_subcommand("prune", "Report active modes under a water level");
  std::string prune_dict;
  double prune_level = 1.0;
  prune->add_option("--dict", prune_dict, "Dictionary (PQDICT)")->required();
  prune->add_option("--mu", prune_level, "Water level")->required();

  CLI11_PARSE(app, argc, argv);

  if (*synth) {
    pq::SynthSpec spec;
    spec.k = synth_k;
    spec.n = synth_n;
    spec.seed = synth_seed;
    spec.variance_min = var_min;
    spec.variance_max = var_max;
    spec.log_uniform_eigenvalues = log_uniform;
    spec.sample_count = synth_samples;
    const pq::SynthResult result = pq::synth_mixture(spec);
    pq::save_dictionary(result.dictionary, synth_dict_out);
    if (!synth_data_out.empty()) {
      pq::save_dataset(pq::dataset_from_samples(result.samples), synth_data_out);
    }
    if (!synth_labels_out.empty()) {
      pq::save_labels(result.samples.labels, static_cast<std::uint32_t>(spec.k),
                      synth_labels_out);
    }
    if (!synth_json_out.empty()) {
      const std::string text = pq::dictionary_to_json(result.dictionary);
      pq::write_file(synth_json_out,
                     std::span<const std::uint8_t>(
                         reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }
    emit({{"command", "synth"},
          {"k", spec.k},
          {"n", spec.n},
          {"samples", result.samples.count},
          {"dict", synth_dict_out},
          {"checksum", pq::dictionary_checksum(result.dictionary)}});
    return 0;
  }

  if (*fit) {
    const pq::LabeledSamples data = pq::samples_from_dataset(pq::load_dataset(fit_data));
    pq::EmConfig cfg;
    cfg.seed = fit_seed;
    cfg.restarts = fit_restarts;
    cfg.max_iters = fit_max_iters;
    cfg.loglik_rel_tol = fit_tol;
    pq::EmReport report;
    const pq::MixtureDictionary dict = pq::fit_em(data, fit_k, cfg, &report);
    pq::save_dictionary(dict, fit_dict_out);
    if (!fit_json_out.empty()) {
      const std::string text = pq::dictionary_to_json(dict);
      pq::write_file(fit_json_out,
                     std::span<const std::uint8_t>(
                         reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }
    emit({{"command", "fit"},
          {"k", fit_k},
          {"n", data.dim},
          {"samples", data.count},
          {"iterations", report.iterations},
          {"restart", report.best_restart},
          {"avg_loglik", report.final_loglik},
          {"dict", fit_dict_out},
          {"checksum", pq::dictionary_checksum(dict)}});
    return 0;
  }

  if (*ingest) {
    const pq::Dataset raw = pq::load_dataset(ingest_raw);
    const pq::PartitionedData parts = pq::partition_dataset(raw, ingest_n);
    pq::save_dataset(pq::dataset_from_samples(parts.blocks), ingest_out);
    emit({{"command", "ingest"},
          {"records", raw.record_count},
          {"blocks", parts.blocks.count},
          {"blocks_per_record", parts.blocks_per_record},
          {"pad", parts.pad},
          {"n", parts.block_dim},
          {"out", ingest_out}});
    return 0;
  }

  if (*encode) {
    const pq::LabeledSamples data = pq::samples_from_dataset(pq::load_dataset(enc_data));
    const pq::MixtureDictionary dict = pq::load_dictionary(enc_dict);
    pq::CodecConfig cfg;
    cfg.mode = pq::codec_mode_from_name(enc_mode);
    cfg.total_rate = enc_rate;
    cfg.tau = enc_tau_inf ? pq::kTauInfinite : enc_tau;
    std::vector<std::uint32_t> labels;
    if (!enc_labels.empty()) labels = pq::load_labels(enc_labels);
    const pq::Bitstream bs = pq::encode_stream(data, dict, cfg, labels);
    pq::write_file(enc_out, pq::serialize_bitstream(bs));
    emit({{"command", "encode"},
          {"mode", pq::codec_mode_name(cfg.mode)},
          {"vectors", bs.vector_count},
          {"total_rate_budget", bs.total_rate},
          {"water_level", bs.water_level},
          {"measured_rate", bs.measured_rate_per_dim()},
          {"label_bits", bs.accounting.label_bits},
          {"coef_bits", bs.accounting.coef_bits},
          {"out", enc_out}});
    return 0;
  }

  if (*decode) {
    const auto bytes = pq::read_file(dec_in);
    const pq::Bitstream bs = pq::parse_bitstream(bytes);
    const pq::MixtureDictionary dict = pq::load_dictionary(dec_dict);
    const pq::LabeledSamples decoded = pq::decode_stream(bs, dict);
    pq::save_dataset(pq::dataset_from_samples(decoded), dec_out);
    emit({{"command", "decode"},
          {"mode", pq::codec_mode_name(bs.mode)},
          {"vectors", decoded.count},
          {"n", decoded.dim},
          {"out", dec_out}});
    return 0;
  }

  if (*bounds) {
    const pq::MixtureDictionary dict = pq::load_dictionary(bounds_dict);
    const pq::EntropyTerms terms = pq::entropy_terms(dict);
    const std::vector<double> levels = bounds_levels.build();
    pq::SweepSpec spec;
    spec.levels = levels;
    spec.curves = {pq::Curve::kTheoryLower, pq::Curve::kTheoryUpper};
    const auto points = pq::rd_sweep(dict, pq::LabeledSamples{}, spec);
    if (!bounds_csv.empty()) pq::write_csv(points, bounds_csv);
    const pq::SandwichBounds sample_bounds = pq::sandwich(dict, levels.front());
    emit({{"command", "bounds"},
          {"k", dict.k},
          {"n", dict.n},
          {"h_cond_bits", terms.conditional_bits},
          {"h_label_bits", terms.label_bits},
          {"label_rate", sample_bounds.label_rate},
          {"log2k_over_n", sample_bounds.log2k_over_n},
          {"levels", levels.size()},
          {"out", bounds_csv}});
    return 0;
  }

  if (*sweep) {
    const pq::MixtureDictionary dict = pq::load_dictionary(sweep_dict);
    pq::LabeledSamples data = pq::samples_from_dataset(pq::load_dataset(sweep_data));
    if (!sweep_labels.empty()) data.labels = pq::load_labels(sweep_labels);
    pq::SweepSpec spec;
    spec.levels = sweep_levels.build();
    spec.curves = parse_curves(sweep_curves);
    spec.tau = sweep_tau_inf ? pq::kTauInfinite : sweep_tau;
    const auto points = pq::rd_sweep(dict, data, spec);
    pq::write_csv(points, sweep_out);
    emit({{"command", "sweep"},
          {"curves", sweep_curves},
          {"levels", spec.levels.size()},
          {"rows", points.size()},
          {"vectors", data.count},
          {"out", sweep_out}});
    return 0;
  }

  if (*prune) {
    const pq::MixtureDictionary dict = pq::load_dictionary(prune_dict);
    const pq::PrunedDictionary pruned = pq::prune_dictionary(dict, prune_level);
    json counts = json::array();
    for (std::size_t c = 0; c < pruned.k; ++c) counts.push_back(pruned.active_counts[c]);
    emit({{"command", "prune"},
          {"mu", prune_level},
          {"active_counts", counts},
          {"memory_ratio", pruned.memory_ratio}});
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pq::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
}
