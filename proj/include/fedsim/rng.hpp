#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace fedsim {

// Purpose tags mixed into derived seeds so the consumers of one experiment
// seed (data generation, partitioning, per-client batch draws, ...) never
// share a stream.
enum class Stream : std::uint64_t {
  train_data = 1,
  test_data = 2,
  partition = 3,
  model_init = 4,
  client = 5,
  bucket_draw = 6,
  sweep_cell = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream purpose, std::uint64_t salt = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return splitmix64(h ^ salt);
}

// mt19937_64 supplies the raw bits; the distribution transforms are spelled
// out here because the <random> distribution adapters are implementation
// defined and the simulator promises identical streams everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  // uniform integer in [0, n), rejection sampled so every value is equally likely
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    std::uint64_t x, r;
    do {
      x = eng_();
      r = x % n;
    } while (x - r > std::uint64_t(0) - n);
    return r;
  }

  // uniform in [0, 1) with 53-bit resolution
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // uniform strictly inside (lo, hi)
  double uniform_open(double lo, double hi) {
    double x;
    do {
      x = lo + (hi - lo) * uniform01();
    } while (x <= lo || x >= hi);
    return x;
  }

  // standard normal via Box-Muller, pair cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Gamma(alpha, 1) via Marsaglia-Tsang squeeze; alpha < 1 boosted through
  // Gamma(alpha + 1) * U^(1/alpha)
  double gamma(double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("gamma: alpha must be positive");
    if (alpha < 1.0) {
      double u;
      do {
        u = uniform01();
      } while (u <= 0.0);
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // symmetric Dirichlet over k categories
  std::vector<double> dirichlet(std::size_t k, double alpha) {
    if (k == 0) throw std::invalid_argument("dirichlet: k must be positive");
    std::vector<double> p(k);
    for (int attempt = 0; attempt < 100; ++attempt) {
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        p[i] = gamma(alpha);
        sum += p[i];
      }
      if (sum > 1e-300) {
        for (auto& v : p) v /= sum;
        return p;
      }
    }
    throw std::runtime_error("dirichlet: degenerate gamma draws");
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fedsim
