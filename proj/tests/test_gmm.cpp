#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "json.hpp"

#include "prismquant/errors.hpp"
#include "prismquant/gmm.hpp"
#include "prismquant/rng.hpp"
#include "prismquant/synthetic.hpp"

using namespace prismquant;

namespace {

SymMatrix scalar_cov(double v) {
  SymMatrix m(1);
  m.set(0, 0, v);
  return m;
}

MixtureDictionary two_component_1d(double mu0, double mu1, double v0, double v1,
                                   double p0 = 0.5) {
  return make_dictionary({p0, 1.0 - p0}, {Vec{mu0}, Vec{mu1}},
                         {scalar_cov(v0), scalar_cov(v1)});
}

LabeledSamples samples_from(std::vector<Vec> rows) {
  LabeledSamples s;
  s.count = rows.size();
  s.dim = rows[0].size();
  for (const auto& r : rows) s.values.insert(s.values.end(), r.begin(), r.end());
  return s;
}

}  // namespace

TEST_CASE("responsibilities anchors") {
  const auto single = make_dictionary({1.0}, {Vec{0.0}}, {scalar_cov(1.0)});
  CHECK(responsibilities(Vec{3.0}, single) == std::vector<double>{1.0});

  const auto sym = two_component_1d(-1.0, 1.0, 1.0, 1.0);
  const auto r = responsibilities(Vec{0.0}, sym);
  CHECK(r[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(0.5).epsilon(1e-12));

  const auto far = two_component_1d(-10.0, 10.0, 1.0, 1.0);
  const auto rf = responsibilities(Vec{9.0}, far);
  CHECK(rf[1] >= 1.0 - 1e-30);
  CHECK(rf[0] + rf[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("responsibilities agree with the direct-density route") {
  Rng rng(5);
  SynthSpec spec;
  spec.k = 3;
  spec.n = 4;
  spec.seed = 99;
  const auto dict = synth_dictionary(spec);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x(spec.n);
    for (auto& v : x) v = 3.0 * rng.gaussian();
    // Linear-domain densities; skip cases that underflow.
    std::vector<double> direct(dict.k);
    double total = 0.0;
    for (std::size_t c = 0; c < dict.k; ++c) {
      const double maha = mahalanobis_sq(x, dict.means[c], dict.covariances[c]);
      const double norm =
          std::pow(2.0 * 3.14159265358979323846, -0.5 * static_cast<double>(dict.n)) *
          std::exp(-0.5 * dict.log_dets[c]);
      direct[c] = dict.priors[c] * norm * std::exp(-0.5 * maha);
      total += direct[c];
    }
    if (total < 1e-290) continue;
    const auto r = responsibilities(x, dict);
    for (std::size_t c = 0; c < dict.k; ++c) {
      CHECK(r[c] == doctest::Approx(direct[c] / total).epsilon(1e-9));
    }
  }
}

TEST_CASE("map_label anchors and argmax consistency") {
  const auto single = make_dictionary({1.0}, {Vec{0.0}}, {scalar_cov(1.0)});
  CHECK(map_label(Vec{5.0}, single) == 0);

  const auto far = two_component_1d(-10.0, 10.0, 1.0, 1.0);
  CHECK(map_label(Vec{9.0}, far) == 1);

  SynthSpec spec;
  spec.k = 4;
  spec.n = 3;
  spec.seed = 17;
  const auto dict = synth_dictionary(spec);
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    Vec x(spec.n);
    for (auto& v : x) v = 2.0 * rng.gaussian();
    const auto r = responsibilities(x, dict);
    const std::size_t argmax =
        static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    CHECK(map_label(x, dict) == argmax);
  }
}

TEST_CASE("map_label equals nearest mean under equal priors and covariances") {
  std::vector<Vec> means{{0.0, 0.0}, {4.0, 0.0}, {0.0, 4.0}, {-4.0, -4.0}};
  const auto dict = make_dictionary({0.25, 0.25, 0.25, 0.25}, means,
                                    std::vector<SymMatrix>(4, SymMatrix::identity(2)));
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    Vec x{6.0 * rng.uniform() - 3.0, 6.0 * rng.uniform() - 3.0};
    std::size_t nearest = 0;
    double best = 1e300;
    for (std::size_t c = 0; c < 4; ++c) {
      const double d = (x[0] - means[c][0]) * (x[0] - means[c][0]) +
                       (x[1] - means[c][1]) * (x[1] - means[c][1]);
      if (d < best) {
        best = d;
        nearest = c;
      }
    }
    CHECK(map_label(x, dict) == nearest);
  }
}

TEST_CASE("fit_em single component closed form") {
  Rng rng(77);
  std::vector<Vec> rows;
  for (int i = 0; i < 500; ++i) rows.push_back({2.0 + rng.gaussian(), -1.0 + 0.5 * rng.gaussian()});
  const auto data = samples_from(rows);

  EmConfig cfg;
  cfg.seed = 1;
  cfg.restarts = 1;
  const auto dict = fit_em(data, 1, cfg);

  Vec mean(2, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < 2; ++i) mean[i] += r[i] / 500.0;
  SymMatrix cov(2);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        cov.add(i, j, (r[i] - mean[i]) * (r[j] - mean[j]) / 500.0);
  const double lambda = cfg.tikhonov_scale * cov.trace() / 2.0;

  CHECK(dict.priors[0] == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(dict.means[0][i] == doctest::Approx(mean[i]).epsilon(1e-9));
    for (std::size_t j = 0; j < 2; ++j) {
      const double expected = cov(i, j) + (i == j ? lambda : 0.0);
      CHECK(dict.covariances[0](i, j) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("fit_em recovers two well-separated clusters") {
  const auto truth = two_component_1d(-10.0, 10.0, 1.0, 1.0);
  const auto data = sample(truth, 10000, 2024);

  EmConfig cfg;
  cfg.seed = 3;
  EmReport report;
  const auto dict = fit_em(data, 2, cfg, &report);

  // Components come out in some order; match by mean sign.
  const std::size_t neg = dict.means[0][0] < 0 ? 0 : 1;
  const std::size_t pos = 1 - neg;
  CHECK(std::abs(dict.means[neg][0] + 10.0) < 0.1);
  CHECK(std::abs(dict.means[pos][0] - 10.0) < 0.1);
  CHECK(std::abs(dict.priors[neg] - 0.5) < 0.05);
  CHECK(std::abs(dict.priors[pos] - 0.5) < 0.05);

  // Log-likelihood is monotone between prune events (none expected here).
  CHECK(report.prune_events.empty());
  for (std::size_t i = 1; i < report.loglik_history.size(); ++i) {
    CHECK(report.loglik_history[i] >= report.loglik_history[i - 1] - 1e-9);
  }
}

TEST_CASE("fit_em loglik monotone on a harder mixture") {
  SynthSpec spec;
  spec.k = 4;
  spec.n = 6;
  spec.seed = 5;
  spec.sample_count = 2000;
  const auto synth = synth_mixture(spec);

  EmConfig cfg;
  cfg.seed = 9;
  cfg.restarts = 2;
  EmReport report;
  const auto dict = fit_em(synth.samples, 4, cfg, &report);
  std::size_t next_prune = 0;
  for (std::size_t i = 1; i < report.loglik_history.size(); ++i) {
    // A reseed resets the chain at the following iteration.
    if (next_prune < report.prune_events.size() &&
        report.prune_events[next_prune] == i - 1) {
      ++next_prune;
      continue;
    }
    CHECK(report.loglik_history[i] >= report.loglik_history[i - 1] - 1e-9);
  }
  for (double p : dict.priors) CHECK(p >= 1e-4);
}

TEST_CASE("degenerate component reseeding") {
  std::vector<double> priors{0.7, 0.29995, 5e-5};
  std::vector<Vec> means{{0.0, 0.0}, {5.0, 0.0}, {99.0, 99.0}};
  std::vector<SymMatrix> covs{SymMatrix::identity(2), SymMatrix::identity(2),
                              SymMatrix::identity(2)};
  covs[0].set(0, 0, 4.0);  // top eigenvector of the largest component = e_0

  CHECK(detail::replace_degenerate_components(priors, means, covs, 1e-4));
  const double sum = std::accumulate(priors.begin(), priors.end(), 0.0);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  for (double p : priors) CHECK(p >= 1e-4);
  // Reseeded at the largest component's mean shifted along its top
  // eigenvector by 0.1 * sqrt(lambda_max).
  CHECK(priors[0] == doctest::Approx(priors[2]).epsilon(1e-12));
  CHECK(means[2][0] == doctest::Approx(0.1 * 2.0).epsilon(1e-12));
  CHECK(means[2][1] == doctest::Approx(0.0));
  CHECK(covs[2](0, 0) == doctest::Approx(4.0));
}

TEST_CASE("a starved component is reseeded during fitting") {
  // One extreme outlier among 20000 inliers: the component that seeds on it
  // ends the first M-step at prior 1/20001 < 1e-4 and gets reseeded; EM then
  // rediscovers the outlier and the cycle repeats until the iteration cap.
  Rng rng(7);
  LabeledSamples data;
  data.count = 20001;
  data.dim = 1;
  data.values.resize(data.count);
  for (std::size_t t = 0; t < 20000; ++t) data.values[t] = rng.gaussian();
  data.values[20000] = 1000.0;

  EmConfig cfg;
  cfg.seed = 1;
  cfg.restarts = 1;
  cfg.max_iters = 40;
  EmReport report;
  const auto dict = fit_em(data, 2, cfg, &report);

  CHECK(!report.prune_events.empty());
  for (double p : dict.priors) CHECK(p >= 1e-4);
  // Monotone within segments; each reseed restarts the chain.
  std::size_t next_prune = 0;
  for (std::size_t i = 1; i < report.loglik_history.size(); ++i) {
    if (next_prune < report.prune_events.size() &&
        report.prune_events[next_prune] == i - 1) {
      ++next_prune;
      continue;
    }
    CHECK(report.loglik_history[i] >= report.loglik_history[i - 1] - 1e-9);
  }
}

TEST_CASE("fit_em input validation") {
  LabeledSamples tiny;
  tiny.count = 2;
  tiny.dim = 1;
  tiny.values = {0.0, 1.0};
  EmConfig cfg;
  CHECK_THROWS_AS(fit_em(tiny, 3, cfg), InsufficientDataError);

  LabeledSamples bad = tiny;
  bad.values[0] = std::nan("");
  CHECK_THROWS_AS(fit_em(bad, 1, cfg), RejectedInputError);
}

TEST_CASE("sample moments match the dictionary") {
  const auto dict = make_dictionary({1.0}, {Vec{0.0, 0.0}},
                                    {SymMatrix::identity(2)});
  const auto draw = sample(dict, 1000000, 9);
  SymMatrix emp(2);
  for (std::size_t t = 0; t < draw.count; ++t) {
    const auto x = draw.row(t);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j <= i; ++j) emp.add(i, j, x[i] * x[j] / 1e6);
  }
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(std::abs(emp(i, j) - (i == j ? 1.0 : 0.0)) < 0.01);
}

TEST_CASE("sample label frequencies match priors within 3 standard errors") {
  const auto dict = two_component_1d(-1.0, 1.0, 1.0, 2.0, 0.3);
  const std::size_t m = 200000;
  const auto draw = sample(dict, m, 123);
  std::size_t count0 = 0;
  for (auto l : draw.labels) count0 += (l == 0);
  const double freq = static_cast<double>(count0) / static_cast<double>(m);
  const double se = std::sqrt(0.3 * 0.7 / static_cast<double>(m));
  CHECK(std::abs(freq - 0.3) <= 3.0 * se);
}

TEST_CASE("sample count zero gives an empty container") {
  const auto dict = make_dictionary({1.0}, {Vec{0.0}}, {scalar_cov(1.0)});
  const auto draw = sample(dict, 0, 1);
  CHECK(draw.count == 0);
  CHECK(draw.values.empty());
}

TEST_CASE("sample is deterministic for a fixed seed") {
  const auto dict = two_component_1d(-2.0, 2.0, 1.0, 1.0);
  const auto a = sample(dict, 100, 55);
  const auto b = sample(dict, 100, 55);
  CHECK(a.values == b.values);
  CHECK(a.labels == b.labels);
}

TEST_CASE("bhattacharyya_distance anchors") {
  // Identical components.
  const auto same = make_dictionary({0.5, 0.5}, {Vec{1.0}, Vec{1.0}},
                                    {scalar_cov(2.0), scalar_cov(2.0)});
  CHECK(bhattacharyya_distance(same, 0, 1) == doctest::Approx(0.0).epsilon(1e-12));

  // Equal unit variances, means 2 apart: B = (1/8) * 4 / 1 = 0.5.
  const auto shifted = two_component_1d(0.0, 2.0, 1.0, 1.0);
  CHECK(bhattacharyya_distance(shifted, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));

  // Zero means, variances 1 and 4: B = 0.5 * ln(2.5 / 2).
  const auto scaled = two_component_1d(0.0, 0.0, 1.0, 4.0);
  CHECK(bhattacharyya_distance(scaled, 0, 1) ==
        doctest::Approx(0.5 * std::log(2.5 / 2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(bhattacharyya_distance(shifted, 1, 1), DomainError);
}

TEST_CASE("map_error_union_bound anchors and Monte Carlo validity") {
  const auto single = make_dictionary({1.0}, {Vec{0.0}}, {scalar_cov(1.0)});
  CHECK(map_error_union_bound(single) == 0.0);

  const auto shifted = two_component_1d(0.0, 2.0, 1.0, 1.0);
  CHECK(map_error_union_bound(shifted) ==
        doctest::Approx(0.5 * std::exp(-0.5)).epsilon(1e-12));

  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    SynthSpec spec;
    spec.k = 3;
    spec.n = 8;
    spec.seed = seed;
    spec.sample_count = 20000;
    const auto synth = synth_mixture(spec);
    std::size_t wrong = 0;
    for (std::size_t t = 0; t < synth.samples.count; ++t) {
      if (map_label(synth.samples.row(t), synth.dictionary) != synth.samples.labels[t]) ++wrong;
    }
    const double err = static_cast<double>(wrong) / static_cast<double>(synth.samples.count);
    const double se = std::sqrt(std::max(err * (1.0 - err), 1e-12) /
                                static_cast<double>(synth.samples.count));
    CHECK(err <= map_error_union_bound(synth.dictionary) + 3.0 * se);
  }
}

TEST_CASE("translation invariance of labeling and separability") {
  const auto base = two_component_1d(-1.0, 2.0, 1.0, 3.0, 0.4);
  auto shifted_means = base.means;
  for (auto& mu : shifted_means) mu[0] += 17.5;
  const auto shifted = make_dictionary(base.priors, shifted_means, base.covariances);

  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = 4.0 * rng.gaussian();
    const auto r0 = responsibilities(Vec{x}, base);
    const auto r1 = responsibilities(Vec{x + 17.5}, shifted);
    CHECK(r1[0] == doctest::Approx(r0[0]).epsilon(1e-9));
    CHECK(map_label(Vec{x}, base) == map_label(Vec{x + 17.5}, shifted));
  }
  CHECK(bhattacharyya_distance(shifted, 0, 1) ==
        doctest::Approx(bhattacharyya_distance(base, 0, 1)).epsilon(1e-9));
}

TEST_CASE("dictionary container round trip") {
  SynthSpec spec;
  spec.k = 3;
  spec.n = 5;
  spec.seed = 8;
  const auto dict = synth_dictionary(spec);

  const auto bytes = serialize_dictionary(dict);
  const auto parsed = parse_dictionary(bytes);
  CHECK(parsed.k == dict.k);
  CHECK(parsed.n == dict.n);
  CHECK(parsed.priors == dict.priors);
  for (std::size_t c = 0; c < dict.k; ++c) {
    CHECK(parsed.means[c] == dict.means[c]);
    CHECK(parsed.eigs[c].eigenvalues == dict.eigs[c].eigenvalues);
    CHECK(parsed.eigs[c].basis.data() == dict.eigs[c].basis.data());
    CHECK(parsed.covariances[c].data() == dict.covariances[c].data());
  }
  CHECK(serialize_dictionary(parsed) == bytes);

  // Corrupting any byte breaks the checksum.
  auto corrupt = bytes;
  corrupt[bytes.size() / 2] ^= 0xFF;
  CHECK_THROWS_AS(parse_dictionary(corrupt), CorruptStreamError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(parse_dictionary(truncated), CorruptStreamError);
}

TEST_CASE("dictionary JSON export survives the decimal round trip") {
  SynthSpec spec;
  spec.k = 2;
  spec.n = 3;
  spec.seed = 44;
  const auto dict = synth_dictionary(spec);
  const auto parsed = nlohmann::json::parse(dictionary_to_json(dict));
  CHECK(parsed["k"] == dict.k);
  for (std::size_t c = 0; c < dict.k; ++c) {
    CHECK(parsed["priors"][c].get<double>() == dict.priors[c]);
    for (std::size_t i = 0; i < dict.n; ++i) {
      CHECK(parsed["components"][c]["eigenvalues"][i].get<double>() ==
            dict.eigs[c].eigenvalues[i]);
      for (std::size_t j = 0; j < dict.n; ++j) {
        CHECK(parsed["components"][c]["covariance"][i][j].get<double>() ==
              dict.covariances[c](i, j));
      }
    }
  }
}
