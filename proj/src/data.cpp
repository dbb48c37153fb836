#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

Dataset generate_blobs(int num_classes, int per_class, int feature_dim, double noise_sigma,
                       std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("generate_blobs: num_classes must be >= 2");
  if (per_class < 1) throw std::invalid_argument("generate_blobs: per_class must be >= 1");
  if (feature_dim < num_classes)
    throw std::invalid_argument("generate_blobs: feature_dim must be >= num_classes");
  if (noise_sigma < 0.0) throw std::invalid_argument("generate_blobs: noise_sigma must be >= 0");

  Dataset ds;
  ds.feature_dim = static_cast<std::size_t>(feature_dim);
  ds.num_classes = num_classes;
  const std::size_t n = static_cast<std::size_t>(num_classes) * per_class;
  ds.features.assign(n * ds.feature_dim, 0.0);
  ds.labels.assign(n, 0);

  Rng rng(seed);
  for (int c = 0; c < num_classes; ++c) {
    for (int s = 0; s < per_class; ++s) {
      const std::size_t i = static_cast<std::size_t>(c) * per_class + s;
      double* x = ds.features.data() + i * ds.feature_dim;
      for (std::size_t j = 0; j < ds.feature_dim; ++j) {
        const double mean = (j == static_cast<std::size_t>(c)) ? 1.0 : 0.0;
        x[j] = mean + noise_sigma * rng.normal();
      }
      ds.labels[i] = c;
    }
  }
  return ds;
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_idx: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_u32_be(const std::vector<unsigned char>& b, std::size_t off,
                          const std::string& path) {
  if (off + 4 > b.size())
    throw std::runtime_error("load_idx: " + path + " truncated at byte offset " +
                             std::to_string(off));
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  const std::uint32_t img_magic = read_u32_be(img, 0, images_path);
  if (img_magic != 0x00000803u)
    throw std::runtime_error("load_idx: bad magic in " + images_path + " at byte offset 0 (got " +
                             std::to_string(img_magic) + ", want 2051)");
  const std::uint32_t lab_magic = read_u32_be(lab, 0, labels_path);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("load_idx: bad magic in " + labels_path + " at byte offset 0 (got " +
                             std::to_string(lab_magic) + ", want 2049)");

  const std::uint32_t n_img = read_u32_be(img, 4, images_path);
  const std::uint32_t rows = read_u32_be(img, 8, images_path);
  const std::uint32_t cols = read_u32_be(img, 12, images_path);
  const std::uint32_t n_lab = read_u32_be(lab, 4, labels_path);
  if (n_img != n_lab)
    throw std::runtime_error("load_idx: image count " + std::to_string(n_img) +
                             " does not match label count " + std::to_string(n_lab));

  const std::size_t pixels = std::size_t(n_img) * rows * cols;
  if (img.size() != 16 + pixels)
    throw std::runtime_error("load_idx: " + images_path + " truncated at byte offset " +
                             std::to_string(img.size()) + " (want " + std::to_string(16 + pixels) +
                             " bytes)");
  if (lab.size() != 8 + std::size_t(n_lab))
    throw std::runtime_error("load_idx: " + labels_path + " truncated at byte offset " +
                             std::to_string(lab.size()) + " (want " +
                             std::to_string(8 + std::size_t(n_lab)) + " bytes)");

  Dataset ds;
  ds.feature_dim = std::size_t(rows) * cols;
  ds.features.resize(pixels);
  ds.labels.resize(n_img);
  for (std::size_t p = 0; p < pixels; ++p) ds.features[p] = img[16 + p] / 255.0;
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.num_samples(); ++i) by_class[ds.labels[i]].push_back(i);
  return by_class;
}

}  // namespace

Partition partition_iid(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("partition_iid: k must be >= 1");
  auto by_class = indices_by_class(ds);
  for (int c = 0; c < ds.num_classes; ++c)
    if (by_class[c].size() < static_cast<std::size_t>(k))
      throw std::invalid_argument("partition_iid: class " + std::to_string(c) + " has only " +
                                  std::to_string(by_class[c].size()) + " samples for k=" +
                                  std::to_string(k));
  Rng rng(seed);
  Partition part;
  part.shards.assign(k, {});
  for (int c = 0; c < ds.num_classes; ++c) {
    auto& idx = by_class[c];
    // Fisher-Yates, then deal round-robin
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_below(i);
      std::swap(idx[i - 1], idx[j]);
    }
    for (std::size_t i = 0; i < idx.size(); ++i) part.shards[i % k].push_back(idx[i]);
  }
  return part;
}

Partition partition_dirichlet(const Dataset& ds, int k, double alpha, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("partition_dirichlet: k must be >= 1");
  if (alpha <= 0.0) throw std::invalid_argument("partition_dirichlet: alpha must be > 0");
  const auto by_class = indices_by_class(ds);
  Rng rng(seed);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Partition part;
    part.shards.assign(k, {});
    for (int c = 0; c < ds.num_classes; ++c) {
      const auto& idx = by_class[c];
      const auto p = rng.dirichlet(static_cast<std::size_t>(k), alpha);
      // largest-remainder rounding of p * n so the counts sum exactly to n
      const std::size_t n = idx.size();
      std::vector<std::size_t> cnt(k);
      std::vector<double> frac(k);
      std::size_t assigned = 0;
      for (int i = 0; i < k; ++i) {
        const double raw = p[i] * static_cast<double>(n);
        cnt[i] = static_cast<std::size_t>(std::floor(raw));
        frac[i] = raw - std::floor(raw);
        assigned += cnt[i];
      }
      std::vector<int> order(k);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return frac[a] > frac[b]; });
      for (std::size_t r = 0; r < n - assigned; ++r) ++cnt[order[r]];
      std::size_t pos = 0;
      for (int i = 0; i < k; ++i) {
        for (std::size_t s = 0; s < cnt[i]; ++s) part.shards[i].push_back(idx[pos++]);
      }
    }
    const bool ok = std::none_of(part.shards.begin(), part.shards.end(),
                                 [](const auto& s) { return s.empty(); });
    if (ok) return part;
  }
  throw std::runtime_error("partition_dirichlet: produced an empty shard in 100 consecutive draws");
}

Dataset flip_labels(const Dataset& ds) {
  Dataset out = ds;
  for (auto& y : out.labels) y = (ds.num_classes - 1) - y;
  return out;
}

}  // namespace fedsim
