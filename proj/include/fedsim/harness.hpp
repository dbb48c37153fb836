#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/aggregators.hpp"
#include "fedsim/attacks.hpp"
#include "fedsim/client.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

enum class DataSource { blobs, idx };
enum class PartitionKind { iid, dirichlet };

struct ExperimentConfig {
  // data
  DataSource dataset = DataSource::blobs;
  int blobs_classes = 10;
  int blobs_per_class = 100;
  int blobs_feature_dim = 20;
  double blobs_noise_sigma = 0.5;
  int blobs_test_per_class = 0;  // 0 means twice blobs_per_class
  std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;

  // clients
  PartitionKind partition = PartitionKind::iid;
  double dirichlet_alpha = 1.0;
  int k = 0;  // required in config files
  int k_m = 0;
  double beta = 0.9;

  AttackSpec attack;
  AggregatorSpec aggregator;
  bool trim_k_set = false;  // tm trim defaults to k_m unless configured

  // model
  ModelKind model = ModelKind::logreg;
  int hidden = 16;

  // schedule
  int rounds = 500;
  int batch_size = 32;
  double eta0 = 0.1;
  int lr_drop_round = 375;
  double lr_drop_factor = 0.1;
  int eval_every = 10;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_path = "metrics.csv";
};

struct MetricsRow {
  int round = 0;
  double eta = 0.0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  double train_loss = 0.0;
  double clip_fraction_benign = 0.0;
  double clip_fraction_byz = 0.0;
  double cos_ref_benign = 0.0;  // cos(reference, benign mean)
  double cos_ref_byz = 0.0;     // cos(reference, byzantine mean), 0 without byzantines
  double cos_delta_prev = 0.0;  // cos of consecutive byzantine perturbations
};

struct ExperimentResult {
  Vec final_params;
  std::vector<MetricsRow> metrics;
};

// step schedule: eta0 until lr_drop_round, eta0 * lr_drop_factor from then on
double lr_schedule(const ExperimentConfig& cfg, int t);

// tm trim count falls back to k_m when the config never set one
AggregatorSpec resolved_aggregator(const ExperimentConfig& cfg);

void validate_config(const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
void write_csv(const std::vector<MetricsRow>& rows, const std::string& path);

// flat JSON object; unknown keys and type mismatches are hard errors
ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// name <-> enum plumbing shared by config, sweep and the CLI
std::string attack_kind_name(AttackKind kind);
std::string agg_kind_name(AggKind kind);
AttackKind parse_attack_kind(const std::string& name);
AggKind parse_agg_kind(const std::string& name);

struct SweepRow {
  std::size_t cell = 0;
  ExperimentConfig cfg;  // effective per-cell configuration
  double final_test_accuracy = 0.0;
  std::string status;  // "ok" or the recorded error
};

// Cartesian product over a flat JSON grid across
// {lambda, rho, angle_deg, tau, beta, aggregator, attack, k, k_m}.
// Writes cell_NNNN.csv per cell plus summary.csv under out_dir.
std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& grid_text,
                                const std::string& out_dir);

std::string summary_to_csv(const std::vector<SweepRow>& rows);

}  // namespace fedsim
