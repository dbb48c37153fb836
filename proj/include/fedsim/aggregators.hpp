#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/vecmath.hpp"

namespace fedsim {

enum class AggKind { mean, cc, tm, rfa, scc };

struct AggregatorSpec {
  AggKind kind = AggKind::mean;
  double tau = 1.0;        // cc / scc clipping radius
  int clip_iters = 1;      // cc refinement passes
  int trim_k = 0;          // tm drop count per side
  int rfa_max_iters = 100;
  double rfa_tol = 1e-8;
  int bucket_n = 3;        // scc cluster count
  std::uint64_t seed = 0;  // scc bucket draws, salted per round by the harness
};

struct AggregateOutcome {
  Vec aggregate;
  // one entry per client, 1.0 whenever that client was not scaled down
  std::vector<double> per_client_clip_factor;
};

struct ClipResult {
  Vec value;
  double factor;
};

// pulls m toward center onto the tau-ball; factor 1 when already inside
// (gap norms within one part in 1e12 of tau count as inside)
ClipResult cc_clip(const Vec& m, const Vec& center, double tau);

AggregateOutcome mean_agg(const std::vector<Vec>& ms);

// clip all submissions toward the running center, re-center on their mean,
// repeat clip_iters times; reports the last iteration's factors
AggregateOutcome cc_agg(const std::vector<Vec>& ms, const Vec& prev, double tau, int clip_iters);

// coordinate-wise sorted mean with trim_k values dropped from each end
AggregateOutcome trimmed_mean_agg(const std::vector<Vec>& ms, int trim_k);

// smoothed Weiszfeld geometric median; iterates recorded when trace is given
AggregateOutcome rfa_agg(const std::vector<Vec>& ms, int max_iters = 100, double tol = 1e-8,
                         std::vector<Vec>* trace = nullptr);

// sequential centered clipping: cosine-sorted clusters, seeded bucket draws,
// one clip per bucket with the output chaining into the next center
AggregateOutcome scc_agg(const std::vector<Vec>& ms, const Vec& prev, double tau, int n,
                         std::uint64_t seed);

// cluster sizes for k clients in n contiguous near-equal groups; the +1
// remainders sit at the trailing (lowest cosine) end
std::vector<int> scc_cluster_sizes(int k, int n);

AggregateOutcome aggregate(const AggregatorSpec& spec, const std::vector<Vec>& ms,
                           const Vec& prev);

}  // namespace fedsim
