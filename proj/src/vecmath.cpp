#include "fedsim/vecmath.hpp"

#include <cmath>
#include <string>

namespace fedsim {

namespace {

void require_same_dim(const Vec& a, const Vec& b, const char* op) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace

double inner(const Vec& a, const Vec& b) {
  require_same_dim(a, b, "inner");
  double s = 0.0;
  // ascending index order keeps the reduction bit-reproducible
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double norm(const Vec& v) { return std::sqrt(inner(v, v)); }

double cosine_similarity(const Vec& a, const Vec& b) {
  require_same_dim(a, b, "cosine_similarity");
  const double na = norm(a);
  const double nb = norm(b);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return inner(a, b) / (na * nb);
}

Rejection orthogonal_rejection(const Vec& p, const Vec& m) {
  require_same_dim(p, m, "orthogonal_rejection");
  const double nm = norm(m);
  if (nm <= 1e-12) throw DegenerateTarget();
  const double coeff = inner(p, m) / (nm * nm);
  Rejection out;
  out.proj = scale(m, coeff);
  out.rej = sub(p, out.proj);
  return out;
}

IndexStats index_stats(const std::vector<Vec>& vs) {
  if (vs.empty()) throw std::invalid_argument("index_stats: empty input");
  const std::size_t d = vs.front().size();
  for (const auto& v : vs) require_same_dim(vs.front(), v, "index_stats");
  IndexStats st;
  st.mean.assign(d, 0.0);
  st.stddev.assign(d, 0.0);
  const double n = static_cast<double>(vs.size());
  for (const auto& v : vs)
    for (std::size_t j = 0; j < d; ++j) st.mean[j] += v[j];
  for (std::size_t j = 0; j < d; ++j) st.mean[j] /= n;
  for (const auto& v : vs)
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = v[j] - st.mean[j];
      st.stddev[j] += diff * diff;
    }
  for (std::size_t j = 0; j < d; ++j) st.stddev[j] = std::sqrt(st.stddev[j] / n);
  return st;
}

Vec add(const Vec& a, const Vec& b) {
  require_same_dim(a, b, "add");
  Vec out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] + b[j];
  return out;
}

Vec sub(const Vec& a, const Vec& b) {
  require_same_dim(a, b, "sub");
  Vec out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

Vec scale(const Vec& v, double s) {
  Vec out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j] * s;
  return out;
}

void axpy(Vec& y, double a, const Vec& x) {
  require_same_dim(y, x, "axpy");
  for (std::size_t j = 0; j < y.size(); ++j) y[j] += a * x[j];
}

}  // namespace fedsim
