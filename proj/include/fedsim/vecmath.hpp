#pragma once

#include <stdexcept>
#include <vector>

namespace fedsim {

// Flat parameter vector; doubles as model weights, gradients, momenta and
// attack payloads.
using Vec = std::vector<double>;

// Raised when a projection target has no usable direction. The caller owns
// the fallback.
struct DegenerateTarget : std::runtime_error {
  DegenerateTarget() : std::runtime_error("orthogonal_rejection: target norm is below 1e-12") {}
};

double inner(const Vec& a, const Vec& b);
double norm(const Vec& v);

// 0.0 when either argument has norm under 1e-12
double cosine_similarity(const Vec& a, const Vec& b);

struct Rejection {
  Vec proj;
  Vec rej;
};

// splits p into its component along m and the remainder orthogonal to m
Rejection orthogonal_rejection(const Vec& p, const Vec& m);

struct IndexStats {
  Vec mean;
  Vec stddev;  // population convention, divide by n
};

IndexStats index_stats(const std::vector<Vec>& vs);

// elementwise helpers shared by the rest of the code base
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scale(const Vec& v, double s);
void axpy(Vec& y, double a, const Vec& x);  // y += a * x

}  // namespace fedsim
