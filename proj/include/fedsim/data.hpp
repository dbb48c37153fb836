#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedsim {

struct Dataset {
  std::vector<double> features;  // row-major, num_samples x feature_dim
  std::vector<int> labels;
  std::size_t feature_dim = 0;
  int num_classes = 0;

  std::size_t num_samples() const { return labels.size(); }
  const double* row(std::size_t i) const { return features.data() + i * feature_dim; }
};

struct Partition {
  std::vector<std::vector<std::size_t>> shards;
};

// Gaussian blobs around axis-aligned unit class means e_c.
Dataset generate_blobs(int num_classes, int per_class, int feature_dim, double noise_sigma,
                       std::uint64_t seed);

// Big-endian IDX pair (images magic 0x00000803, labels 0x00000801); pixels scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Per-class seeded shuffle dealt round-robin across k shards.
Partition partition_iid(const Dataset& ds, int k, std::uint64_t seed);

// Per-class Dirichlet(alpha) proportions with largest-remainder rounding;
// redraws the whole partition when a shard comes out empty.
Partition partition_dirichlet(const Dataset& ds, int k, double alpha, std::uint64_t seed);

// y -> (C-1) - y, features untouched
Dataset flip_labels(const Dataset& ds);

}  // namespace fedsim
