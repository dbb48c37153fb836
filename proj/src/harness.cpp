#include "fedsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "fedsim/rng.hpp"
#include "json.hpp"

namespace fedsim {

namespace {

using nlohmann::json;

// Benign local steps are independent, so a flat index pool is enough. The
// reduction happens after the join, on the id-ordered slots, which keeps the
// result byte-identical for any worker count.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  int w = std::min(workers, n);
  if (w <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex mu;
  auto drain = [&] {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w) - 1);
  for (int i = 0; i < w - 1; ++i) pool.emplace_back(drain);
  drain();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string json_preview(const json& v) {
  std::string s = v.dump();
  if (s.size() > 40) s = s.substr(0, 37) + "...";
  return s;
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw std::runtime_error("config key '" + key + "' must be an integer (got " +
                             json_preview(v) + ")");
  return v.get<int>();
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number())
    throw std::runtime_error("config key '" + key + "' must be a number (got " + json_preview(v) +
                             ")");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean())
    throw std::runtime_error("config key '" + key + "' must be a boolean (got " +
                             json_preview(v) + ")");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string())
    throw std::runtime_error("config key '" + key + "' must be a string (got " + json_preview(v) +
                             ")");
  return v.get<std::string>();
}

std::uint64_t as_seed(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw std::runtime_error("config key '" + key + "' must be a non-negative integer (got " +
                           json_preview(v) + ")");
}

DataSource parse_data_source(const std::string& name) {
  if (name == "blobs") return DataSource::blobs;
  if (name == "idx") return DataSource::idx;
  throw std::runtime_error("unknown dataset '" + name + "' (expected blobs or idx)");
}

PartitionKind parse_partition_kind(const std::string& name) {
  if (name == "iid") return PartitionKind::iid;
  if (name == "dirichlet") return PartitionKind::dirichlet;
  throw std::runtime_error("unknown partition '" + name + "' (expected iid or dirichlet)");
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "logreg") return ModelKind::logreg;
  if (name == "mlp") return ModelKind::mlp;
  throw std::runtime_error("unknown model '" + name + "' (expected logreg or mlp)");
}

// commas and newlines would break the fixed-schema summary rows
std::string sanitize_status(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

double lr_schedule(const ExperimentConfig& cfg, int t) {
  return t >= cfg.lr_drop_round ? cfg.eta0 * cfg.lr_drop_factor : cfg.eta0;
}

AggregatorSpec resolved_aggregator(const ExperimentConfig& cfg) {
  AggregatorSpec agg = cfg.aggregator;
  if (!cfg.trim_k_set) agg.trim_k = cfg.k_m;
  return agg;
}

void validate_config(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) { throw std::runtime_error("invalid config: " + msg); };
  if (cfg.k < 1) fail("k must be >= 1 (got " + std::to_string(cfg.k) + ")");
  if (cfg.k_m < 0 || cfg.k_m >= cfg.k)
    fail("k_m must satisfy 0 <= k_m < k (got k_m=" + std::to_string(cfg.k_m) +
         ", k=" + std::to_string(cfg.k) + ")");
  if (!(cfg.beta >= 0.0 && cfg.beta < 1.0)) fail("beta must be in [0, 1)");
  if (cfg.rounds < 0) fail("rounds must be >= 0");
  if (cfg.batch_size < 1) fail("batch_size must be >= 1");
  if (!(cfg.eta0 > 0.0)) fail("eta0 must be > 0");
  if (!(cfg.lr_drop_factor > 0.0)) fail("lr_drop_factor must be > 0");
  if (cfg.eval_every < 1) fail("eval_every must be >= 1");
  if (cfg.workers < 1) fail("workers must be >= 1");

  if (cfg.dataset == DataSource::blobs) {
    if (cfg.blobs_classes < 2) fail("blobs_classes must be >= 2");
    if (cfg.blobs_per_class < 1) fail("blobs_per_class must be >= 1");
    if (cfg.blobs_feature_dim < cfg.blobs_classes)
      fail("blobs_feature_dim must be >= blobs_classes (unit class means are axis-aligned)");
    if (!(cfg.blobs_noise_sigma >= 0.0)) fail("blobs_noise_sigma must be >= 0");
    if (cfg.blobs_test_per_class < 0) fail("blobs_test_per_class must be >= 0");
  } else {
    if (cfg.idx_train_images.empty() || cfg.idx_train_labels.empty() ||
        cfg.idx_test_images.empty() || cfg.idx_test_labels.empty())
      fail(
          "idx dataset needs idx_train_images, idx_train_labels, idx_test_images and "
          "idx_test_labels");
  }
  if (cfg.partition == PartitionKind::dirichlet && !(cfg.dirichlet_alpha > 0.0))
    fail("dirichlet_alpha must be > 0");

  if (cfg.model == ModelKind::mlp && cfg.hidden < 1) fail("hidden must be >= 1 for the mlp model");

  if (!(cfg.attack.lambda >= 0.0 && cfg.attack.lambda <= 1.0))
    fail("attack_lambda must be in [0, 1]");
  if (!(cfg.attack.rho >= 0.0 && cfg.attack.rho <= 1.0)) fail("attack_rho must be in [0, 1]");
  if (!(cfg.attack.epsilon >= 0.0)) fail("attack_epsilon must be >= 0");

  if (!(cfg.aggregator.tau > 0.0)) fail("tau must be > 0");
  if (cfg.aggregator.clip_iters < 1) fail("clip_iters must be >= 1");
  if (cfg.aggregator.rfa_max_iters < 1) fail("rfa_max_iters must be >= 1");
  if (!(cfg.aggregator.rfa_tol > 0.0)) fail("rfa_tol must be > 0");
  if (cfg.aggregator.kind == AggKind::scc &&
      (cfg.aggregator.bucket_n < 1 || cfg.aggregator.bucket_n > cfg.k))
    fail("bucket_n must be in [1, k]");
  if (cfg.aggregator.kind == AggKind::tm) {
    int trim = resolved_aggregator(cfg).trim_k;
    if (trim < 0 || 2 * trim >= cfg.k)
      fail("trimmed mean needs 0 <= 2 * trim_k < k (got trim_k=" + std::to_string(trim) +
           ", k=" + std::to_string(cfg.k) + ")");
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);

  Dataset train, test;
  if (cfg.dataset == DataSource::blobs) {
    int test_pc = cfg.blobs_test_per_class > 0 ? cfg.blobs_test_per_class : 2 * cfg.blobs_per_class;
    train = generate_blobs(cfg.blobs_classes, cfg.blobs_per_class, cfg.blobs_feature_dim,
                           cfg.blobs_noise_sigma, derive_seed(cfg.seed, Stream::train_data));
    test = generate_blobs(cfg.blobs_classes, test_pc, cfg.blobs_feature_dim, cfg.blobs_noise_sigma,
                          derive_seed(cfg.seed, Stream::test_data));
  } else {
    train = load_idx(cfg.idx_train_images, cfg.idx_train_labels);
    test = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
    // the two splits may each miss some labels; the model sees their union
    int classes = std::max(train.num_classes, test.num_classes);
    train.num_classes = classes;
    test.num_classes = classes;
  }

  Partition part = cfg.partition == PartitionKind::iid
                       ? partition_iid(train, cfg.k, derive_seed(cfg.seed, Stream::partition))
                       : partition_dirichlet(train, cfg.k, cfg.dirichlet_alpha,
                                             derive_seed(cfg.seed, Stream::partition));

  ModelSpec mspec;
  mspec.kind = cfg.model;
  mspec.feature_dim = train.feature_dim;
  mspec.num_classes = train.num_classes;
  mspec.hidden = cfg.hidden;
  mspec.init_seed = derive_seed(cfg.seed, Stream::model_init);

  // data-level attacks read a different view of the same shards
  Dataset flipped;
  const Dataset* byz_view = &train;
  if (cfg.attack.kind == AttackKind::labelflip) {
    flipped = flip_labels(train);
    byz_view = &flipped;
  }

  const std::size_t dim = param_count(mspec);
  const int n_benign = cfg.k - cfg.k_m;
  std::vector<ClientState> clients;
  clients.reserve(static_cast<std::size_t>(cfg.k));
  for (int i = 0; i < cfg.k; ++i)
    clients.emplace_back(i, i >= n_benign, part.shards[static_cast<std::size_t>(i)], dim, cfg.seed);

  AggregatorSpec agg = resolved_aggregator(cfg);

  Vec params = init_params(mspec);
  Vec stored_ref(dim, 0.0);  // last server aggregate; zero until round 1 lands
  Vec prev_delta;
  bool have_prev_delta = false;

  ExperimentResult out;
  out.metrics.reserve(static_cast<std::size_t>(cfg.rounds));

  double test_acc = 0.0, test_loss = 0.0;
  if (cfg.rounds > 0) {
    // theta_0 baseline, carried forward until the first scheduled evaluation
    EvalResult ev = evaluate(mspec, params, test);
    test_acc = ev.accuracy;
    test_loss = ev.mean_loss;
  }

  for (int t = 1; t <= cfg.rounds; ++t) {
    try {
      const double eta = lr_schedule(cfg, t);

      std::vector<Vec> subs(static_cast<std::size_t>(cfg.k));
      parallel_for(n_benign, cfg.workers, [&](int i) {
        subs[static_cast<std::size_t>(i)] =
            local_step(clients[static_cast<std::size_t>(i)], params, cfg.beta, cfg.batch_size,
                       mspec, train);
      });
      double train_loss = 0.0;
      for (int i = 0; i < n_benign; ++i) train_loss += clients[static_cast<std::size_t>(i)].last_batch_loss;
      train_loss /= n_benign;

      std::vector<Vec> benign(subs.begin(), subs.begin() + n_benign);
      IndexStats stats = index_stats(benign);

      RoundKnowledge kn;
      kn.t = t;
      kn.benign_mean = std::move(stats.mean);
      kn.benign_std = std::move(stats.stddev);
      // no server history exists in round 1; everyone measures against the
      // current benign mean instead, attacks and aggregator alike
      kn.prev_aggregate = t == 1 ? kn.benign_mean : stored_ref;
      kn.eta = eta;
      kn.k = cfg.k;
      kn.k_m = cfg.k_m;

      if (cfg.k_m > 0) {
        std::vector<ClientState*> byz;
        byz.reserve(static_cast<std::size_t>(cfg.k_m));
        for (int i = n_benign; i < cfg.k; ++i) byz.push_back(&clients[static_cast<std::size_t>(i)]);
        std::vector<Vec> byz_subs =
            dispatch(cfg.attack, kn, byz, params, cfg.beta, cfg.batch_size, mspec, *byz_view);
        for (int j = 0; j < cfg.k_m; ++j)
          subs[static_cast<std::size_t>(n_benign + j)] = std::move(byz_subs[static_cast<std::size_t>(j)]);
      }

      agg.seed = derive_seed(cfg.seed, Stream::bucket_draw, static_cast<std::uint64_t>(t));
      AggregateOutcome res = aggregate(agg, subs, kn.prev_aggregate);
      axpy(params, -eta, res.aggregate);

      MetricsRow row;
      row.round = t;
      row.eta = eta;
      row.train_loss = train_loss;
      int clipped_benign = 0, clipped_byz = 0;
      for (int i = 0; i < n_benign; ++i)
        if (res.per_client_clip_factor[static_cast<std::size_t>(i)] < 1.0) ++clipped_benign;
      for (int i = n_benign; i < cfg.k; ++i)
        if (res.per_client_clip_factor[static_cast<std::size_t>(i)] < 1.0) ++clipped_byz;
      row.clip_fraction_benign = static_cast<double>(clipped_benign) / n_benign;
      row.clip_fraction_byz = cfg.k_m > 0 ? static_cast<double>(clipped_byz) / cfg.k_m : 0.0;
      row.cos_ref_benign = cosine_similarity(kn.prev_aggregate, kn.benign_mean);
      if (cfg.k_m > 0) {
        Vec byz_mean(dim, 0.0);
        for (int i = n_benign; i < cfg.k; ++i) axpy(byz_mean, 1.0, subs[static_cast<std::size_t>(i)]);
        for (double& v : byz_mean) v /= cfg.k_m;
        row.cos_ref_byz = cosine_similarity(kn.prev_aggregate, byz_mean);
        Vec delta = sub(byz_mean, kn.benign_mean);
        row.cos_delta_prev = have_prev_delta ? cosine_similarity(prev_delta, delta) : 0.0;
        prev_delta = std::move(delta);
        have_prev_delta = true;
      }
      if (t % cfg.eval_every == 0 || t == cfg.rounds) {
        EvalResult ev = evaluate(mspec, params, test);
        test_acc = ev.accuracy;
        test_loss = ev.mean_loss;
      }
      row.test_accuracy = test_acc;
      row.test_loss = test_loss;
      out.metrics.push_back(row);

      stored_ref = std::move(res.aggregate);
    } catch (const std::exception& e) {
      throw std::runtime_error("round " + std::to_string(t) + ": " + e.what());
    }
  }

  out.final_params = std::move(params);
  return out;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out =
      "round,eta,test_accuracy,test_loss,train_loss,clip_fraction_benign,"
      "clip_fraction_byz,cos_ref_benign,cos_ref_byz,cos_delta_prev\n";
  char buf[256];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.round,
                  r.eta, r.test_accuracy, r.test_loss, r.train_loss, r.clip_fraction_benign,
                  r.clip_fraction_byz, r.cos_ref_benign, r.cos_ref_byz, r.cos_delta_prev);
    out += buf;
  }
  return out;
}

void write_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << metrics_to_csv(rows);
  f.flush();
  if (!f) throw std::runtime_error("failed while writing " + path);
}

std::string attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::alie: return "alie";
    case AttackKind::ipm: return "ipm";
    case AttackKind::rop: return "rop";
    case AttackKind::bitflip: return "bitflip";
    case AttackKind::labelflip: return "labelflip";
  }
  throw std::runtime_error("unreachable attack kind");
}

std::string agg_kind_name(AggKind kind) {
  switch (kind) {
    case AggKind::mean: return "mean";
    case AggKind::cc: return "cc";
    case AggKind::tm: return "tm";
    case AggKind::rfa: return "rfa";
    case AggKind::scc: return "scc";
  }
  throw std::runtime_error("unreachable aggregator kind");
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "none") return AttackKind::none;
  if (name == "alie") return AttackKind::alie;
  if (name == "ipm") return AttackKind::ipm;
  if (name == "rop") return AttackKind::rop;
  if (name == "bitflip") return AttackKind::bitflip;
  if (name == "labelflip") return AttackKind::labelflip;
  throw std::runtime_error("unknown attack '" + name +
                           "' (expected one of none, alie, ipm, rop, bitflip, labelflip)");
}

AggKind parse_agg_kind(const std::string& name) {
  if (name == "mean") return AggKind::mean;
  if (name == "cc") return AggKind::cc;
  if (name == "tm") return AggKind::tm;
  if (name == "rfa") return AggKind::rfa;
  if (name == "scc") return AggKind::scc;
  throw std::runtime_error("unknown aggregator '" + name +
                           "' (expected one of mean, cc, tm, rfa, scc)");
}

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config must be a flat JSON object");

  static const char* kKnown[] = {
      "dataset",          "blobs_classes",    "blobs_per_class", "blobs_feature_dim",
      "blobs_noise_sigma", "blobs_test_per_class", "idx_train_images", "idx_train_labels",
      "idx_test_images",  "idx_test_labels",  "partition",       "dirichlet_alpha",
      "k",                "k_m",              "beta",            "attack",
      "attack_z",         "attack_lambda",    "attack_rho",      "attack_angle_deg",
      "attack_epsilon",   "attack_alternate_sign", "aggregator", "tau",
      "clip_iters",       "trim_k",           "rfa_max_iters",   "rfa_tol",
      "bucket_n",         "model",            "hidden",          "rounds",
      "batch_size",       "eta0",             "lr_drop_round",   "lr_drop_factor",
      "eval_every",       "seed",             "workers",         "out_path"};
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* name : kKnown)
      if (item.key() == name) {
        known = true;
        break;
      }
    if (!known) throw std::runtime_error("unknown config key '" + item.key() + "'");
  }
  if (!j.contains("k")) throw std::runtime_error("config is missing required key 'k'");

  ExperimentConfig cfg;
  if (j.contains("dataset")) cfg.dataset = parse_data_source(as_string(j["dataset"], "dataset"));
  if (j.contains("blobs_classes")) cfg.blobs_classes = as_int(j["blobs_classes"], "blobs_classes");
  if (j.contains("blobs_per_class"))
    cfg.blobs_per_class = as_int(j["blobs_per_class"], "blobs_per_class");
  if (j.contains("blobs_feature_dim"))
    cfg.blobs_feature_dim = as_int(j["blobs_feature_dim"], "blobs_feature_dim");
  if (j.contains("blobs_noise_sigma"))
    cfg.blobs_noise_sigma = as_double(j["blobs_noise_sigma"], "blobs_noise_sigma");
  if (j.contains("blobs_test_per_class"))
    cfg.blobs_test_per_class = as_int(j["blobs_test_per_class"], "blobs_test_per_class");
  if (j.contains("idx_train_images"))
    cfg.idx_train_images = as_string(j["idx_train_images"], "idx_train_images");
  if (j.contains("idx_train_labels"))
    cfg.idx_train_labels = as_string(j["idx_train_labels"], "idx_train_labels");
  if (j.contains("idx_test_images"))
    cfg.idx_test_images = as_string(j["idx_test_images"], "idx_test_images");
  if (j.contains("idx_test_labels"))
    cfg.idx_test_labels = as_string(j["idx_test_labels"], "idx_test_labels");
  if (j.contains("partition"))
    cfg.partition = parse_partition_kind(as_string(j["partition"], "partition"));
  if (j.contains("dirichlet_alpha"))
    cfg.dirichlet_alpha = as_double(j["dirichlet_alpha"], "dirichlet_alpha");
  cfg.k = as_int(j["k"], "k");
  if (j.contains("k_m")) cfg.k_m = as_int(j["k_m"], "k_m");
  if (j.contains("beta")) cfg.beta = as_double(j["beta"], "beta");
  if (j.contains("attack")) cfg.attack.kind = parse_attack_kind(as_string(j["attack"], "attack"));
  if (j.contains("attack_z")) cfg.attack.z = as_double(j["attack_z"], "attack_z");
  if (j.contains("attack_lambda"))
    cfg.attack.lambda = as_double(j["attack_lambda"], "attack_lambda");
  if (j.contains("attack_rho")) cfg.attack.rho = as_double(j["attack_rho"], "attack_rho");
  if (j.contains("attack_angle_deg"))
    cfg.attack.angle_deg = as_double(j["attack_angle_deg"], "attack_angle_deg");
  if (j.contains("attack_epsilon"))
    cfg.attack.epsilon = as_double(j["attack_epsilon"], "attack_epsilon");
  if (j.contains("attack_alternate_sign"))
    cfg.attack.alternate_sign = as_bool(j["attack_alternate_sign"], "attack_alternate_sign");
  if (j.contains("aggregator"))
    cfg.aggregator.kind = parse_agg_kind(as_string(j["aggregator"], "aggregator"));
  if (j.contains("tau")) cfg.aggregator.tau = as_double(j["tau"], "tau");
  if (j.contains("clip_iters")) cfg.aggregator.clip_iters = as_int(j["clip_iters"], "clip_iters");
  if (j.contains("trim_k")) {
    cfg.aggregator.trim_k = as_int(j["trim_k"], "trim_k");
    cfg.trim_k_set = true;
  }
  if (j.contains("rfa_max_iters"))
    cfg.aggregator.rfa_max_iters = as_int(j["rfa_max_iters"], "rfa_max_iters");
  if (j.contains("rfa_tol")) cfg.aggregator.rfa_tol = as_double(j["rfa_tol"], "rfa_tol");
  if (j.contains("bucket_n")) cfg.aggregator.bucket_n = as_int(j["bucket_n"], "bucket_n");
  if (j.contains("model")) cfg.model = parse_model_kind(as_string(j["model"], "model"));
  if (j.contains("hidden")) cfg.hidden = as_int(j["hidden"], "hidden");
  if (j.contains("rounds")) cfg.rounds = as_int(j["rounds"], "rounds");
  if (j.contains("batch_size")) cfg.batch_size = as_int(j["batch_size"], "batch_size");
  if (j.contains("eta0")) cfg.eta0 = as_double(j["eta0"], "eta0");
  if (j.contains("lr_drop_round")) cfg.lr_drop_round = as_int(j["lr_drop_round"], "lr_drop_round");
  if (j.contains("lr_drop_factor"))
    cfg.lr_drop_factor = as_double(j["lr_drop_factor"], "lr_drop_factor");
  if (j.contains("eval_every")) cfg.eval_every = as_int(j["eval_every"], "eval_every");
  if (j.contains("seed")) cfg.seed = as_seed(j["seed"], "seed");
  if (j.contains("workers")) cfg.workers = as_int(j["workers"], "workers");
  if (j.contains("out_path")) cfg.out_path = as_string(j["out_path"], "out_path");
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_json(buf.str());
}

namespace {

// fixed axis order; the Cartesian product varies the last present axis fastest
const char* kAxisOrder[] = {"lambda", "rho",    "angle_deg", "tau", "beta",
                            "aggregator", "attack", "k",     "k_m"};

void apply_axis(ExperimentConfig& cfg, const std::string& name, const json& v) {
  if (name == "lambda")
    cfg.attack.lambda = as_double(v, name);
  else if (name == "rho")
    cfg.attack.rho = as_double(v, name);
  else if (name == "angle_deg")
    cfg.attack.angle_deg = as_double(v, name);
  else if (name == "tau")
    cfg.aggregator.tau = as_double(v, name);
  else if (name == "beta")
    cfg.beta = as_double(v, name);
  else if (name == "aggregator")
    cfg.aggregator.kind = parse_agg_kind(as_string(v, name));
  else if (name == "attack")
    cfg.attack.kind = parse_attack_kind(as_string(v, name));
  else if (name == "k")
    cfg.k = as_int(v, name);
  else if (name == "k_m")
    cfg.k_m = as_int(v, name);
  else
    throw std::runtime_error("unknown sweep axis '" + name + "'");
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& grid_text,
                                const std::string& out_dir) {
  json g;
  try {
    g = json::parse(grid_text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("sweep grid is not valid JSON: ") + e.what());
  }
  if (!g.is_object() || g.empty())
    throw std::runtime_error("sweep grid must be a non-empty JSON object");
  for (const auto& item : g.items()) {
    bool known = false;
    for (const char* name : kAxisOrder)
      if (item.key() == name) {
        known = true;
        break;
      }
    if (!known) throw std::runtime_error("unknown sweep axis '" + item.key() + "'");
    if (!item.value().is_array() || item.value().empty())
      throw std::runtime_error("sweep axis '" + item.key() + "' must be a non-empty array");
  }

  struct Axis {
    std::string name;
    json values;
  };
  std::vector<Axis> axes;
  for (const char* name : kAxisOrder)
    if (g.contains(name)) axes.push_back({name, g[name]});

  std::size_t total = 1;
  for (const Axis& a : axes) total *= a.values.size();

  std::filesystem::create_directories(out_dir);

  std::vector<SweepRow> rows;
  rows.reserve(total);
  for (std::size_t cell = 0; cell < total; ++cell) {
    ExperimentConfig cfg = base;
    cfg.seed = derive_seed(base.seed, Stream::sweep_cell, cell);
    SweepRow row;
    row.cell = cell;
    try {
      std::size_t rem = cell;
      for (std::size_t a = axes.size(); a-- > 0;) {
        std::size_t idx = rem % axes[a].values.size();
        rem /= axes[a].values.size();
        apply_axis(cfg, axes[a].name, axes[a].values[idx]);
      }
      row.cfg = cfg;
      ExperimentResult res = run_experiment(cfg);
      row.final_test_accuracy =
          res.metrics.empty() ? std::nan("") : res.metrics.back().test_accuracy;
      row.status = "ok";
      char name[32];
      std::snprintf(name, sizeof(name), "cell_%04llu.csv", static_cast<unsigned long long>(cell));
      write_csv(res.metrics, out_dir + "/" + name);
    } catch (const std::exception& e) {
      // record the failure and keep sweeping the remaining cells
      row.cfg = cfg;
      row.final_test_accuracy = std::nan("");
      row.status = "error: " + sanitize_status(e.what());
    }
    rows.push_back(std::move(row));
  }

  std::ofstream f(out_dir + "/summary.csv", std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + out_dir + "/summary.csv for writing");
  f << summary_to_csv(rows);
  f.flush();
  if (!f) throw std::runtime_error("failed while writing " + out_dir + "/summary.csv");
  return rows;
}

std::string summary_to_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "cell,lambda,rho,angle_deg,tau,beta,aggregator,attack,k,k_m,seed,"
      "final_test_accuracy,status\n";
  for (const SweepRow& r : rows) {
    char head[160];
    std::snprintf(head, sizeof(head), "%llu,%s,%s,%s,%s,%s,",
                  static_cast<unsigned long long>(r.cell),
                  format_double(r.cfg.attack.lambda).c_str(), format_double(r.cfg.attack.rho).c_str(),
                  format_double(r.cfg.attack.angle_deg).c_str(),
                  format_double(r.cfg.aggregator.tau).c_str(), format_double(r.cfg.beta).c_str());
    out += head;
    char tail[160];
    std::snprintf(tail, sizeof(tail), "%s,%s,%d,%d,%llu,%s,", agg_kind_name(r.cfg.aggregator.kind).c_str(),
                  attack_kind_name(r.cfg.attack.kind).c_str(), r.cfg.k, r.cfg.k_m,
                  static_cast<unsigned long long>(r.cfg.seed),
                  format_double(r.final_test_accuracy).c_str());
    out += tail;
    out += r.status;
    out += '\n';
  }
  return out;
}

}  // namespace fedsim
