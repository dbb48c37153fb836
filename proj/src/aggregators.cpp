#include "fedsim/aggregators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

void check_nonempty(const std::vector<Vec>& ms, const char* op) {
  if (ms.empty()) throw std::invalid_argument(std::string(op) + ": no submissions");
  for (const auto& m : ms)
    if (m.size() != ms.front().size())
      throw std::invalid_argument(std::string(op) + ": submissions disagree in dim");
}

Vec mean_of(const std::vector<Vec>& ms) {
  Vec out(ms.front().size(), 0.0);
  for (const auto& m : ms) axpy(out, 1.0, m);
  for (auto& v : out) v /= static_cast<double>(ms.size());
  return out;
}

Vec mean_of_subset(const std::vector<Vec>& ms, const std::vector<int>& ids) {
  Vec out(ms.front().size(), 0.0);
  for (int i : ids) axpy(out, 1.0, ms[i]);
  for (auto& v : out) v /= static_cast<double>(ids.size());
  return out;
}

}  // namespace

ClipResult cc_clip(const Vec& m, const Vec& center, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("cc_clip: tau must be > 0");
  const Vec gap = sub(m, center);
  const double gn = norm(gap);
  // the tolerance band keeps norms that equal tau up to rounding unclipped
  if (gn <= 1e-12 || gn <= tau * (1.0 + 1e-12)) return {m, 1.0};
  const double factor = tau / gn;
  Vec out = center;
  axpy(out, factor, gap);
  return {out, factor};
}

AggregateOutcome mean_agg(const std::vector<Vec>& ms) {
  check_nonempty(ms, "mean_agg");
  return {mean_of(ms), std::vector<double>(ms.size(), 1.0)};
}

AggregateOutcome cc_agg(const std::vector<Vec>& ms, const Vec& prev, double tau, int clip_iters) {
  check_nonempty(ms, "cc_agg");
  if (clip_iters < 1) throw std::invalid_argument("cc_agg: clip_iters must be >= 1");
  if (prev.size() != ms.front().size())
    throw std::invalid_argument("cc_agg: center dim mismatch");

  Vec center = prev;
  std::vector<double> factors(ms.size(), 1.0);
  std::vector<Vec> clipped(ms.size());
  for (int it = 0; it < clip_iters; ++it) {
    for (std::size_t i = 0; i < ms.size(); ++i) {
      auto res = cc_clip(ms[i], center, tau);
      clipped[i] = std::move(res.value);
      factors[i] = res.factor;
    }
    center = mean_of(clipped);
  }
  return {center, factors};
}

AggregateOutcome trimmed_mean_agg(const std::vector<Vec>& ms, int trim_k) {
  check_nonempty(ms, "trimmed_mean_agg");
  if (trim_k < 0) throw std::invalid_argument("trimmed_mean_agg: trim_k must be >= 0");
  const int k = static_cast<int>(ms.size());
  if (k - 2 * trim_k < 1)
    throw std::invalid_argument("trimmed_mean_agg: trim_k " + std::to_string(trim_k) +
                                " leaves nothing of k=" + std::to_string(k));
  const std::size_t d = ms.front().size();
  Vec out(d, 0.0);
  std::vector<double> column(k);
  for (std::size_t j = 0; j < d; ++j) {
    for (int i = 0; i < k; ++i) column[i] = ms[i][j];
    std::stable_sort(column.begin(), column.end());
    double s = 0.0;
    for (int i = trim_k; i < k - trim_k; ++i) s += column[i];
    out[j] = s / static_cast<double>(k - 2 * trim_k);
  }
  return {out, std::vector<double>(ms.size(), 1.0)};
}

AggregateOutcome rfa_agg(const std::vector<Vec>& ms, int max_iters, double tol,
                         std::vector<Vec>* trace) {
  check_nonempty(ms, "rfa_agg");
  Vec x = mean_of(ms);
  if (trace) trace->push_back(x);
  for (int it = 0; it < max_iters; ++it) {
    double wsum = 0.0;
    Vec next(x.size(), 0.0);
    for (const auto& m : ms) {
      const double w = 1.0 / std::max(norm(sub(x, m)), 1e-8);
      axpy(next, w, m);
      wsum += w;
    }
    for (auto& v : next) v /= wsum;
    const double step = norm(sub(next, x));
    x = std::move(next);
    if (trace) trace->push_back(x);
    if (step <= tol) break;
  }
  return {x, std::vector<double>(ms.size(), 1.0)};
}

std::vector<int> scc_cluster_sizes(int k, int n) {
  if (n < 1 || n > k) throw std::invalid_argument("scc: need 1 <= n <= k");
  std::vector<int> sizes(n, k / n);
  const int rem = k % n;
  // the +1 clusters go to the trailing (lowest cosine) end of the order
  for (int c = n - rem; c < n; ++c) ++sizes[c];
  return sizes;
}

AggregateOutcome scc_agg(const std::vector<Vec>& ms, const Vec& prev, double tau, int n,
                         std::uint64_t seed) {
  check_nonempty(ms, "scc_agg");
  if (prev.size() != ms.front().size())
    throw std::invalid_argument("scc_agg: center dim mismatch");
  const int k = static_cast<int>(ms.size());
  const auto sizes = scc_cluster_sizes(k, n);

  // sort ids by alignment with the reference, best first, ties by id
  std::vector<double> cos(k);
  for (int i = 0; i < k; ++i) cos[i] = cosine_similarity(ms[i], prev);
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cos[a] > cos[b]; });

  std::vector<std::vector<int>> clusters(n);
  int pos = 0;
  for (int c = 0; c < n; ++c) {
    clusters[c].assign(order.begin() + pos, order.begin() + pos + sizes[c]);
    pos += sizes[c];
  }

  const int rounds = (k + n - 1) / n;  // ceil(k/n) buckets drain every cluster
  Rng rng(seed);
  Vec h = prev;
  std::vector<double> factors(k, 1.0);
  for (int r = 0; r < rounds; ++r) {
    std::vector<int> bucket;
    for (int c = 0; c < n; ++c) {
      auto& cl = clusters[c];
      if (cl.empty()) continue;
      const std::size_t j = rng.uniform_below(cl.size());
      bucket.push_back(cl[j]);
      cl.erase(cl.begin() + j);
    }
    if (bucket.empty()) continue;
    auto res = cc_clip(mean_of_subset(ms, bucket), h, tau);
    h = std::move(res.value);
    for (int i : bucket) factors[i] = res.factor;
  }
  return {h, factors};
}

AggregateOutcome aggregate(const AggregatorSpec& spec, const std::vector<Vec>& ms,
                           const Vec& prev) {
  switch (spec.kind) {
    case AggKind::mean:
      return mean_agg(ms);
    case AggKind::cc:
      return cc_agg(ms, prev, spec.tau, spec.clip_iters);
    case AggKind::tm:
      return trimmed_mean_agg(ms, spec.trim_k);
    case AggKind::rfa:
      return rfa_agg(ms, spec.rfa_max_iters, spec.rfa_tol);
    case AggKind::scc:
      return scc_agg(ms, prev, spec.tau, spec.bucket_n, spec.seed);
  }
  throw std::invalid_argument("aggregate: unknown aggregator kind");
}

}  // namespace fedsim
