#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "fedsim/harness.hpp"
#include "fedsim/rng.hpp"

using fedsim::AggKind;
using fedsim::AttackKind;
using fedsim::Batch;
using fedsim::Dataset;
using fedsim::ExperimentConfig;
using fedsim::ExperimentResult;
using fedsim::MetricsRow;
using fedsim::ModelSpec;
using fedsim::Partition;
using fedsim::Rng;
using fedsim::Stream;
using fedsim::Vec;
using fedsim::derive_seed;

namespace {

// small, fast defaults shared by most harness runs in this file
ExperimentConfig tiny_cfg() {
  ExperimentConfig cfg;
  cfg.blobs_classes = 3;
  cfg.blobs_per_class = 30;
  cfg.blobs_feature_dim = 6;
  cfg.blobs_noise_sigma = 0.6;
  cfg.k = 5;
  cfg.k_m = 0;
  cfg.beta = 0.9;
  cfg.rounds = 25;
  cfg.batch_size = 8;
  cfg.eta0 = 0.2;
  cfg.lr_drop_round = 20;
  cfg.lr_drop_factor = 0.5;
  cfg.eval_every = 5;
  cfg.seed = 42;
  cfg.workers = 1;
  return cfg;
}

struct ReferenceTrace {
  Vec params;
  std::vector<double> eta, train_loss, test_acc, test_loss;
};

// Monolithic minibatch momentum SGD sharing nothing with the harness loop
// beyond the tested kernels: same stream derivations, inline batch draws,
// inline momentum, inline mean, inline parameter update.
ReferenceTrace reference_loop(const ExperimentConfig& cfg) {
  Dataset train =
      fedsim::generate_blobs(cfg.blobs_classes, cfg.blobs_per_class, cfg.blobs_feature_dim,
                             cfg.blobs_noise_sigma, derive_seed(cfg.seed, Stream::train_data));
  Dataset test = fedsim::generate_blobs(cfg.blobs_classes, 2 * cfg.blobs_per_class,
                                        cfg.blobs_feature_dim, cfg.blobs_noise_sigma,
                                        derive_seed(cfg.seed, Stream::test_data));
  Partition part = fedsim::partition_iid(train, cfg.k, derive_seed(cfg.seed, Stream::partition));

  ModelSpec spec;
  spec.kind = cfg.model;
  spec.feature_dim = train.feature_dim;
  spec.num_classes = train.num_classes;
  spec.hidden = cfg.hidden;
  spec.init_seed = derive_seed(cfg.seed, Stream::model_init);

  const std::size_t dim = fedsim::param_count(spec);
  Vec params = fedsim::init_params(spec);
  std::vector<Rng> streams;
  std::vector<Vec> momenta(static_cast<std::size_t>(cfg.k), Vec(dim, 0.0));
  for (int i = 0; i < cfg.k; ++i)
    streams.emplace_back(derive_seed(cfg.seed, Stream::client, static_cast<std::uint64_t>(i)));

  ReferenceTrace out;
  fedsim::EvalResult ev = fedsim::evaluate(spec, params, test);
  double acc = ev.accuracy, tloss = ev.mean_loss;

  for (int t = 1; t <= cfg.rounds; ++t) {
    const double eta = t >= cfg.lr_drop_round ? cfg.eta0 * cfg.lr_drop_factor : cfg.eta0;
    double mean_loss = 0.0;
    for (int i = 0; i < cfg.k; ++i) {
      const auto& shard = part.shards[static_cast<std::size_t>(i)];
      const std::size_t n = shard.size();
      Batch batch;
      std::vector<std::size_t> pos(n);
      std::iota(pos.begin(), pos.end(), 0);
      for (std::size_t b = 0; b < static_cast<std::size_t>(cfg.batch_size); ++b) {
        const std::size_t j = b + streams[static_cast<std::size_t>(i)].uniform_below(n - b);
        std::swap(pos[b], pos[j]);
        batch.push_back(shard[pos[b]]);
      }
      double loss = 0.0;
      Vec g = fedsim::gradient_with_loss(spec, params, train, batch, &loss);
      mean_loss += loss;
      Vec& m = momenta[static_cast<std::size_t>(i)];
      for (std::size_t d = 0; d < dim; ++d) m[d] = (1.0 - cfg.beta) * g[d] + cfg.beta * m[d];
    }
    mean_loss /= cfg.k;

    Vec agg(dim, 0.0);
    for (int i = 0; i < cfg.k; ++i)
      for (std::size_t d = 0; d < dim; ++d) agg[d] += 1.0 * momenta[static_cast<std::size_t>(i)][d];
    for (std::size_t d = 0; d < dim; ++d) agg[d] /= static_cast<double>(cfg.k);
    for (std::size_t d = 0; d < dim; ++d) params[d] += -eta * agg[d];

    if (t % cfg.eval_every == 0 || t == cfg.rounds) {
      ev = fedsim::evaluate(spec, params, test);
      acc = ev.accuracy;
      tloss = ev.mean_loss;
    }
    out.eta.push_back(eta);
    out.train_loss.push_back(mean_loss);
    out.test_acc.push_back(acc);
    out.test_loss.push_back(tloss);
  }
  out.params = params;
  return out;
}

std::string unique_tmp_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() /
             (std::string("fedsim_test_") + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir.string();
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

void write_idx_pair(const std::string& img_path, const std::string& lab_path, std::uint32_t n,
                    const std::vector<unsigned char>& pixels,
                    const std::vector<unsigned char>& labels) {
  std::ofstream img(img_path, std::ios::binary);
  write_be32(img, 0x00000803u);
  write_be32(img, n);
  write_be32(img, 2);
  write_be32(img, 2);
  img.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  std::ofstream lab(lab_path, std::ios::binary);
  write_be32(lab, 0x00000801u);
  write_be32(lab, n);
  lab.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

}  // namespace

TEST_CASE("lr schedule holds eta0 until the drop round") {
  ExperimentConfig cfg;
  cfg.eta0 = 0.1;
  cfg.lr_drop_round = 75;
  cfg.lr_drop_factor = 0.1;
  CHECK(fedsim::lr_schedule(cfg, 1) == 0.1);
  CHECK(fedsim::lr_schedule(cfg, 74) == 0.1);
  CHECK(fedsim::lr_schedule(cfg, 75) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(fedsim::lr_schedule(cfg, 100) == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("minimal config fills every default") {
  ExperimentConfig cfg = fedsim::parse_config_json(R"({"k": 25})");
  CHECK(cfg.k == 25);
  CHECK(cfg.dataset == fedsim::DataSource::blobs);
  CHECK(cfg.blobs_classes == 10);
  CHECK(cfg.blobs_per_class == 100);
  CHECK(cfg.blobs_feature_dim == 20);
  CHECK(cfg.blobs_noise_sigma == 0.5);
  CHECK(cfg.blobs_test_per_class == 0);
  CHECK(cfg.partition == fedsim::PartitionKind::iid);
  CHECK(cfg.dirichlet_alpha == 1.0);
  CHECK(cfg.k_m == 0);
  CHECK(cfg.beta == 0.9);
  CHECK(cfg.attack.kind == AttackKind::none);
  CHECK(cfg.attack.z == 1.0);
  CHECK(cfg.attack.lambda == 0.9);
  CHECK(cfg.attack.rho == 1.0);
  CHECK(cfg.attack.angle_deg == 90.0);
  CHECK(cfg.attack.epsilon == 0.2);
  CHECK_FALSE(cfg.attack.alternate_sign);
  CHECK(cfg.aggregator.kind == AggKind::mean);
  CHECK(cfg.aggregator.tau == 1.0);
  CHECK(cfg.aggregator.clip_iters == 1);
  CHECK(cfg.aggregator.rfa_max_iters == 100);
  CHECK(cfg.aggregator.rfa_tol == 1e-8);
  CHECK(cfg.aggregator.bucket_n == 3);
  CHECK_FALSE(cfg.trim_k_set);
  CHECK(cfg.model == fedsim::ModelKind::logreg);
  CHECK(cfg.hidden == 16);
  CHECK(cfg.rounds == 500);
  CHECK(cfg.batch_size == 32);
  CHECK(cfg.eta0 == 0.1);
  CHECK(cfg.lr_drop_round == 375);
  CHECK(cfg.lr_drop_factor == 0.1);
  CHECK(cfg.eval_every == 10);
  CHECK(cfg.seed == 1);
  CHECK(cfg.workers == 1);
  CHECK(cfg.out_path == "metrics.csv");
}

TEST_CASE("config parsing rejects bad documents with named keys") {
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json(R"({"beta": 0.9})"),
                       doctest::Contains("missing required key 'k'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json(R"({"k": 5, "foo": 1})"),
                       doctest::Contains("unknown config key 'foo'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json(R"({"k": "five"})"),
                       doctest::Contains("config key 'k' must be an integer"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json(R"({"k": 5, "beta": "high"})"),
                       doctest::Contains("'beta' must be a number"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json(R"({"k": 5, "attack": "rops"})"),
                       doctest::Contains("unknown attack 'rops'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json(R"({"k": 5, "aggregator": "median"})"),
                       doctest::Contains("unknown aggregator 'median'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json(R"({"k": 5, "dataset": "mnist"})"),
                       doctest::Contains("unknown dataset 'mnist'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json(R"({"k": 5, "model": "cnn"})"),
                       doctest::Contains("unknown model 'cnn'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json(R"({"k": 5, "seed": -3})"),
                       doctest::Contains("'seed' must be a non-negative integer"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json("[1, 2]"),
                       doctest::Contains("must be a flat JSON object"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_json("{nope"), doctest::Contains("not valid JSON"),
                       std::runtime_error);
}

TEST_CASE("validation rejects out-of-range fields before any compute") {
  auto expect_invalid = [](void (*tweak)(ExperimentConfig&), const char* needle) {
    ExperimentConfig cfg = tiny_cfg();
    tweak(cfg);
    CHECK_THROWS_WITH_AS(fedsim::run_experiment(cfg), doctest::Contains(needle),
                         std::runtime_error);
  };
  expect_invalid([](ExperimentConfig& c) { c.k = 0; }, "k must be >= 1");
  expect_invalid([](ExperimentConfig& c) { c.k_m = c.k; }, "0 <= k_m < k");
  expect_invalid([](ExperimentConfig& c) { c.beta = 1.0; }, "beta must be in [0, 1)");
  expect_invalid([](ExperimentConfig& c) { c.rounds = -1; }, "rounds must be >= 0");
  expect_invalid([](ExperimentConfig& c) { c.batch_size = 0; }, "batch_size must be >= 1");
  expect_invalid([](ExperimentConfig& c) { c.eta0 = 0.0; }, "eta0 must be > 0");
  expect_invalid([](ExperimentConfig& c) { c.eval_every = 0; }, "eval_every must be >= 1");
  expect_invalid([](ExperimentConfig& c) { c.workers = 0; }, "workers must be >= 1");
  expect_invalid([](ExperimentConfig& c) { c.blobs_feature_dim = 2; },
                 "blobs_feature_dim must be >= blobs_classes");
  expect_invalid(
      [](ExperimentConfig& c) {
        c.model = fedsim::ModelKind::mlp;
        c.hidden = 0;
      },
      "hidden must be >= 1");
  expect_invalid([](ExperimentConfig& c) { c.aggregator.tau = 0.0; }, "tau must be > 0");
  expect_invalid(
      [](ExperimentConfig& c) {
        c.aggregator.kind = AggKind::tm;
        c.trim_k_set = true;
        c.aggregator.trim_k = 3;
      },
      "trimmed mean needs");
  expect_invalid(
      [](ExperimentConfig& c) {
        c.aggregator.kind = AggKind::scc;
        c.aggregator.bucket_n = 99;
      },
      "bucket_n must be in [1, k]");
  expect_invalid([](ExperimentConfig& c) { c.dataset = fedsim::DataSource::idx; },
                 "idx dataset needs");
}

TEST_CASE("trim count defaults to the byzantine count until configured") {
  ExperimentConfig cfg = fedsim::parse_config_json(R"({"k": 25, "k_m": 5, "aggregator": "tm"})");
  CHECK(fedsim::resolved_aggregator(cfg).trim_k == 5);
  cfg = fedsim::parse_config_json(R"({"k": 25, "k_m": 5, "aggregator": "tm", "trim_k": 2})");
  CHECK(fedsim::resolved_aggregator(cfg).trim_k == 2);
}

TEST_CASE("csv writer emits the fixed header and fixed-point rows") {
  const std::string header =
      "round,eta,test_accuracy,test_loss,train_loss,clip_fraction_benign,"
      "clip_fraction_byz,cos_ref_benign,cos_ref_byz,cos_delta_prev\n";
  CHECK(fedsim::metrics_to_csv({}) == header);

  MetricsRow r;
  r.round = 7;
  r.eta = 0.1;
  r.test_accuracy = 0.625;
  r.test_loss = 1.25;
  r.train_loss = 2.0 / 3.0;
  r.clip_fraction_benign = 0.05;
  r.clip_fraction_byz = 1.0;
  r.cos_ref_benign = 0.9999995;  // rounds up at six decimals
  r.cos_ref_byz = -1.0;
  r.cos_delta_prev = 0.0;
  CHECK(fedsim::metrics_to_csv({r}) ==
        header + "7,0.100000,0.625000,1.250000,0.666667,0.050000,1.000000,1.000000,-1.000000,0.000000\n");

  const std::string dir = unique_tmp_dir("csv");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/m.csv";
  fedsim::write_csv({r}, path);
  std::ifstream f(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(content == fedsim::metrics_to_csv({r}));
  CHECK_THROWS_WITH_AS(fedsim::write_csv({r}, dir + "/missing/m.csv"),
                       doctest::Contains("cannot open"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("zero rounds returns the initialization untouched") {
  ExperimentConfig cfg = tiny_cfg();
  cfg.rounds = 0;
  cfg.model = fedsim::ModelKind::mlp;
  cfg.hidden = 4;
  ExperimentResult res = fedsim::run_experiment(cfg);
  CHECK(res.metrics.empty());

  ModelSpec spec;
  spec.kind = fedsim::ModelKind::mlp;
  spec.feature_dim = cfg.blobs_feature_dim;
  spec.num_classes = cfg.blobs_classes;
  spec.hidden = 4;
  spec.init_seed = derive_seed(cfg.seed, Stream::model_init);
  Vec expect = fedsim::init_params(spec);
  REQUIRE(res.final_params.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(res.final_params[i] == expect[i]);
}

TEST_CASE("distributed run matches a monolithic momentum SGD loop bitwise") {
  ExperimentConfig cfg = tiny_cfg();
  ExperimentResult res = fedsim::run_experiment(cfg);
  ReferenceTrace ref = reference_loop(cfg);

  REQUIRE(res.metrics.size() == static_cast<std::size_t>(cfg.rounds));
  REQUIRE(res.final_params.size() == ref.params.size());
  for (std::size_t d = 0; d < ref.params.size(); ++d) CHECK(res.final_params[d] == ref.params[d]);
  for (int t = 0; t < cfg.rounds; ++t) {
    const MetricsRow& row = res.metrics[static_cast<std::size_t>(t)];
    CHECK(row.round == t + 1);
    CHECK(row.eta == ref.eta[static_cast<std::size_t>(t)]);
    CHECK(row.train_loss == ref.train_loss[static_cast<std::size_t>(t)]);
    // carried forward between scheduled evaluations, so every row must agree
    CHECK(row.test_accuracy == ref.test_acc[static_cast<std::size_t>(t)]);
    CHECK(row.test_loss == ref.test_loss[static_cast<std::size_t>(t)]);
    // a full mean never scales anyone down
    CHECK(row.clip_fraction_benign == 0.0);
    CHECK(row.clip_fraction_byz == 0.0);
  }
}

TEST_CASE("byzantine-free runs pin the adversary metrics to zero") {
  ExperimentConfig cfg = tiny_cfg();
  cfg.rounds = 6;
  ExperimentResult res = fedsim::run_experiment(cfg);
  for (const MetricsRow& row : res.metrics) {
    CHECK(row.cos_ref_byz == 0.0);
    CHECK(row.cos_delta_prev == 0.0);
    CHECK(row.clip_fraction_byz == 0.0);
  }
  // round 1 measures the benign mean against itself
  CHECK(res.metrics.front().cos_ref_benign == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("worker count and rerun leave every byte unchanged") {
  ExperimentConfig cfg = tiny_cfg();
  cfg.model = fedsim::ModelKind::mlp;
  cfg.hidden = 5;
  cfg.k = 10;
  cfg.k_m = 3;
  cfg.attack.kind = AttackKind::alie;
  cfg.aggregator.kind = AggKind::cc;
  cfg.aggregator.tau = 0.5;
  cfg.rounds = 20;

  ExperimentResult a = fedsim::run_experiment(cfg);
  ExperimentResult b = fedsim::run_experiment(cfg);
  cfg.workers = 4;
  ExperimentResult c = fedsim::run_experiment(cfg);

  const std::string csv_a = fedsim::metrics_to_csv(a.metrics);
  CHECK(csv_a == fedsim::metrics_to_csv(b.metrics));
  CHECK(csv_a == fedsim::metrics_to_csv(c.metrics));
  REQUIRE(a.final_params.size() == c.final_params.size());
  for (std::size_t d = 0; d < a.final_params.size(); ++d) {
    CHECK(a.final_params[d] == b.final_params[d]);
    CHECK(a.final_params[d] == c.final_params[d]);
  }
}

TEST_CASE("honest byzantines under attack none reproduce the clean trajectory") {
  ExperimentConfig clean = tiny_cfg();
  clean.k = 6;
  clean.rounds = 10;
  ExperimentConfig marked = clean;
  marked.k_m = 2;  // same clients, same streams, nothing malicious submitted

  ExperimentResult a = fedsim::run_experiment(clean);
  ExperimentResult b = fedsim::run_experiment(marked);
  REQUIRE(a.final_params.size() == b.final_params.size());
  for (std::size_t d = 0; d < a.final_params.size(); ++d)
    CHECK(a.final_params[d] == b.final_params[d]);
  for (std::size_t t = 0; t < a.metrics.size(); ++t) {
    CHECK(a.metrics[t].test_accuracy == b.metrics[t].test_accuracy);
    CHECK(a.metrics[t].test_loss == b.metrics[t].test_loss);
  }
}

TEST_CASE("round one measures the attack against the live benign mean") {
  ExperimentConfig cfg = tiny_cfg();
  cfg.k = 4;
  cfg.k_m = 1;
  cfg.beta = 0.0;
  cfg.rounds = 1;
  cfg.attack.kind = AttackKind::ipm;
  ExperimentResult res = fedsim::run_experiment(cfg);
  REQUIRE(res.metrics.size() == 1);
  // the scaled inversion points exactly away from the round-1 reference
  CHECK(res.metrics[0].cos_ref_benign == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.metrics[0].cos_ref_byz == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(res.metrics[0].cos_delta_prev == 0.0);
}

TEST_CASE("orthogonal relocation at defaults never exceeds the clip radius") {
  ExperimentConfig cfg = tiny_cfg();
  cfg.k = 8;
  cfg.k_m = 2;
  cfg.rounds = 12;
  cfg.attack.kind = AttackKind::rop;
  cfg.aggregator.kind = AggKind::cc;
  cfg.aggregator.tau = 1.0;
  ExperimentResult res = fedsim::run_experiment(cfg);
  for (const MetricsRow& row : res.metrics) CHECK(row.clip_fraction_byz == 0.0);
}

TEST_CASE("label flipping changes only the byzantine side of round one") {
  ExperimentConfig none = tiny_cfg();
  none.k = 4;
  none.k_m = 2;
  none.beta = 0.0;
  none.rounds = 1;
  ExperimentConfig flip = none;
  flip.attack.kind = AttackKind::labelflip;

  ExperimentResult a = fedsim::run_experiment(none);
  ExperimentResult b = fedsim::run_experiment(flip);
  // benign clients saw identical batches, so the reported loss is identical
  CHECK(a.metrics[0].train_loss == b.metrics[0].train_loss);
  CHECK(a.metrics[0].cos_ref_byz != b.metrics[0].cos_ref_byz);
}

TEST_CASE("homogeneous aggregators agree when nobody attacks") {
  ExperimentConfig cfg = tiny_cfg();
  cfg.blobs_classes = 5;
  cfg.blobs_feature_dim = 10;
  cfg.blobs_per_class = 40;
  cfg.blobs_noise_sigma = 0.35;
  cfg.k = 10;
  cfg.batch_size = 16;
  cfg.rounds = 60;
  cfg.lr_drop_round = 45;
  cfg.eval_every = 10;
  cfg.seed = 7;

  ExperimentResult mean = fedsim::run_experiment(cfg);
  const double base = mean.metrics.back().test_accuracy;
  CHECK(base > 0.7);  // the task must be learnable for the comparison to mean anything

  // an enormous radius turns centered clipping into a bitwise mean
  ExperimentConfig cc = cfg;
  cc.aggregator.kind = AggKind::cc;
  cc.aggregator.tau = 1e12;
  ExperimentResult cc_res = fedsim::run_experiment(cc);
  REQUIRE(cc_res.final_params.size() == mean.final_params.size());
  for (std::size_t d = 0; d < mean.final_params.size(); ++d)
    CHECK(cc_res.final_params[d] == mean.final_params[d]);

  // the rest reorder their sums, so agreement holds to a couple of points
  ExperimentConfig tm = cfg;
  tm.aggregator.kind = AggKind::tm;
  tm.trim_k_set = true;
  tm.aggregator.trim_k = 0;
  CHECK(std::abs(fedsim::run_experiment(tm).metrics.back().test_accuracy - base) <= 0.02);

  ExperimentConfig rfa = cfg;
  rfa.aggregator.kind = AggKind::rfa;
  CHECK(std::abs(fedsim::run_experiment(rfa).metrics.back().test_accuracy - base) <= 0.02);

  ExperimentConfig scc = cfg;
  scc.aggregator.kind = AggKind::scc;
  scc.aggregator.tau = 1e12;
  scc.aggregator.bucket_n = cfg.k;
  CHECK(std::abs(fedsim::run_experiment(scc).metrics.back().test_accuracy - base) <= 0.02);
}

TEST_CASE("sweep walks the grid, records failures and keeps going") {
  ExperimentConfig base = tiny_cfg();
  base.k = 6;
  base.k_m = 2;
  base.rounds = 4;
  base.eval_every = 2;
  base.seed = 11;

  const std::string dir = unique_tmp_dir("sweep");
  const std::string grid = R"({"beta": [0.0, 0.9], "k_m": [1, 10]})";
  std::vector<fedsim::SweepRow> rows = fedsim::run_sweep(base, grid, dir);
  REQUIRE(rows.size() == 4);

  // beta is the slower axis, k_m the faster one
  CHECK(rows[0].cfg.beta == 0.0);
  CHECK(rows[0].cfg.k_m == 1);
  CHECK(rows[1].cfg.k_m == 10);
  CHECK(rows[2].cfg.beta == 0.9);
  CHECK(rows[2].cfg.k_m == 1);
  CHECK(rows[3].cfg.k_m == 10);

  CHECK(rows[0].status == "ok");
  CHECK(rows[2].status == "ok");
  CHECK(rows[1].status.find("error:") == 0);
  CHECK(rows[1].status.find("k_m") != std::string::npos);
  CHECK(rows[3].status.find("error:") == 0);
  CHECK(std::isnan(rows[1].final_test_accuracy));

  // each cell reruns under its own derived seed
  ExperimentConfig cell0 = base;
  cell0.beta = 0.0;
  cell0.k_m = 1;
  cell0.seed = derive_seed(base.seed, Stream::sweep_cell, 0);
  ExperimentResult direct = fedsim::run_experiment(cell0);
  CHECK(rows[0].final_test_accuracy == direct.metrics.back().test_accuracy);
  CHECK(rows[0].cfg.seed == cell0.seed);

  CHECK(std::filesystem::exists(dir + "/summary.csv"));
  CHECK(std::filesystem::exists(dir + "/cell_0000.csv"));
  CHECK(std::filesystem::exists(dir + "/cell_0002.csv"));
  CHECK_FALSE(std::filesystem::exists(dir + "/cell_0001.csv"));

  std::ifstream f(dir + "/summary.csv", std::ios::binary);
  std::string summary((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(summary ==
        fedsim::summary_to_csv(rows));
  CHECK(summary.find("cell,lambda,rho,angle_deg,tau,beta,aggregator,attack,k,k_m,seed,"
                     "final_test_accuracy,status\n") == 0);
  // error rows keep the schema: a nan accuracy and a comma-free status
  CHECK(summary.find(",nan,error: ") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep grids are validated up front") {
  ExperimentConfig base = tiny_cfg();
  const std::string dir = unique_tmp_dir("sweep_bad");
  CHECK_THROWS_WITH_AS(fedsim::run_sweep(base, R"({"foo": [1]})", dir),
                       doctest::Contains("unknown sweep axis 'foo'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::run_sweep(base, R"({})", dir),
                       doctest::Contains("non-empty JSON object"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::run_sweep(base, R"({"beta": 0.9})", dir),
                       doctest::Contains("'beta' must be a non-empty array"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::run_sweep(base, R"({"beta": []})", dir),
                       doctest::Contains("'beta' must be a non-empty array"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fedsim::run_sweep(base, "not json", dir),
                       doctest::Contains("not valid JSON"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config files round-trip through the parser") {
  const std::string dir = unique_tmp_dir("cfgfile");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/cfg.json";
  {
    std::ofstream f(path);
    f << R"({"k": 9, "k_m": 2, "attack": "rop", "aggregator": "scc", "bucket_n": 3, "seed": 77})";
  }
  ExperimentConfig cfg = fedsim::parse_config_file(path);
  CHECK(cfg.k == 9);
  CHECK(cfg.k_m == 2);
  CHECK(cfg.attack.kind == AttackKind::rop);
  CHECK(cfg.aggregator.kind == AggKind::scc);
  CHECK(cfg.aggregator.bucket_n == 3);
  CHECK(cfg.seed == 77);
  CHECK_THROWS_WITH_AS(fedsim::parse_config_file(dir + "/nope.json"),
                       doctest::Contains("cannot open config file"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("idx files drive a run and the splits share a class count") {
  const std::string dir = unique_tmp_dir("idx_run");
  std::filesystem::create_directories(dir);
  // train carries labels {0,1,2}; test only {0,1}; the model must see 3
  std::vector<unsigned char> train_px, test_px;
  std::vector<unsigned char> train_y, test_y;
  for (int i = 0; i < 9; ++i) {
    const unsigned char c = static_cast<unsigned char>(i % 3);
    train_y.push_back(c);
    for (int p = 0; p < 4; ++p)
      train_px.push_back(static_cast<unsigned char>(60 * c + 20 * (p == c)));
  }
  for (int i = 0; i < 4; ++i) {
    const unsigned char c = static_cast<unsigned char>(i % 2);
    test_y.push_back(c);
    for (int p = 0; p < 4; ++p)
      test_px.push_back(static_cast<unsigned char>(60 * c + 20 * (p == c)));
  }
  write_idx_pair(dir + "/train_img", dir + "/train_lab", 9, train_px, train_y);
  write_idx_pair(dir + "/test_img", dir + "/test_lab", 4, test_px, test_y);

  ExperimentConfig cfg;
  cfg.dataset = fedsim::DataSource::idx;
  cfg.idx_train_images = dir + "/train_img";
  cfg.idx_train_labels = dir + "/train_lab";
  cfg.idx_test_images = dir + "/test_img";
  cfg.idx_test_labels = dir + "/test_lab";
  cfg.k = 3;
  cfg.rounds = 2;
  cfg.batch_size = 2;
  cfg.eval_every = 1;
  ExperimentResult res = fedsim::run_experiment(cfg);
  CHECK(res.metrics.size() == 2);
  // logreg over 2x2 images and the union class count: (4 + 1) * 3 parameters
  CHECK(res.final_params.size() == 15);
  std::filesystem::remove_all(dir);
}

TEST_CASE("kind names round-trip") {
  for (auto kind : {AttackKind::none, AttackKind::alie, AttackKind::ipm, AttackKind::rop,
                    AttackKind::bitflip, AttackKind::labelflip})
    CHECK(fedsim::parse_attack_kind(fedsim::attack_kind_name(kind)) == kind);
  for (auto kind : {AggKind::mean, AggKind::cc, AggKind::tm, AggKind::rfa, AggKind::scc})
    CHECK(fedsim::parse_agg_kind(fedsim::agg_kind_name(kind)) == kind);
}
