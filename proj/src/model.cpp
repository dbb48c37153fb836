#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

void validate_spec(const ModelSpec& spec) {
  if (spec.feature_dim < 1) throw std::invalid_argument("model: feature_dim must be >= 1");
  if (spec.num_classes < 2) throw std::invalid_argument("model: num_classes must be >= 2");
  if (spec.kind == ModelKind::mlp && spec.hidden < 1)
    throw std::invalid_argument("model: mlp hidden width must be >= 1");
}

void validate_inputs(const ModelSpec& spec, const Vec& params, const Dataset& ds) {
  validate_spec(spec);
  if (params.size() != param_count(spec))
    throw std::invalid_argument("model: params dim " + std::to_string(params.size()) +
                                " does not match spec dim " + std::to_string(param_count(spec)));
  if (ds.feature_dim != static_cast<std::size_t>(spec.feature_dim))
    throw std::invalid_argument("model: dataset feature_dim does not match spec");
}

struct Scratch {
  std::vector<double> h;
  std::vector<double> logits;
  std::vector<double> probs;
};

// fills logits (and hidden activations for the mlp)
void forward(const ModelSpec& spec, const Vec& params, const double* x, Scratch& s) {
  const int f = spec.feature_dim;
  const int C = spec.num_classes;
  s.logits.assign(C, 0.0);
  if (spec.kind == ModelKind::logreg) {
    const double* W = params.data();
    const double* b = params.data() + std::size_t(C) * f;
    for (int c = 0; c < C; ++c) {
      double z = b[c];
      const double* w = W + std::size_t(c) * f;
      for (int j = 0; j < f; ++j) z += w[j] * x[j];
      s.logits[c] = z;
    }
  } else {
    const int H = spec.hidden;
    const double* W1 = params.data();
    const double* b1 = params.data() + std::size_t(H) * f;
    const double* W2 = b1 + H;
    const double* b2 = W2 + std::size_t(C) * H;
    s.h.assign(H, 0.0);
    for (int u = 0; u < H; ++u) {
      double a = b1[u];
      const double* w = W1 + std::size_t(u) * f;
      for (int j = 0; j < f; ++j) a += w[j] * x[j];
      s.h[u] = std::tanh(a);
    }
    for (int c = 0; c < C; ++c) {
      double z = b2[c];
      const double* w = W2 + std::size_t(c) * H;
      for (int u = 0; u < H; ++u) z += w[u] * s.h[u];
      s.logits[c] = z;
    }
  }
}

// softmax with max subtraction; returns cross entropy for the given label
double softmax_loss(Scratch& s, int y) {
  const std::size_t C = s.logits.size();
  double zmax = s.logits[0];
  for (double z : s.logits) zmax = std::max(zmax, z);
  s.probs.assign(C, 0.0);
  double sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    s.probs[c] = std::exp(s.logits[c] - zmax);
    sum += s.probs[c];
  }
  for (auto& p : s.probs) p /= sum;
  return -std::log(std::max(s.probs[y], 1e-300));
}

void check_batch(const Dataset& ds, const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("model: batch must not be empty");
  for (auto i : batch)
    if (i >= ds.num_samples())
      throw std::invalid_argument("model: batch index " + std::to_string(i) + " out of range");
}

}  // namespace

std::size_t param_count(const ModelSpec& spec) {
  validate_spec(spec);
  const std::size_t f = spec.feature_dim, C = spec.num_classes, H = spec.hidden;
  if (spec.kind == ModelKind::logreg) return C * f + C;
  return H * f + H + C * H + C;
}

Vec init_params(const ModelSpec& spec) {
  const std::size_t d = param_count(spec);
  Vec params(d, 0.0);
  if (spec.kind == ModelKind::logreg) return params;

  const int f = spec.feature_dim, C = spec.num_classes, H = spec.hidden;
  Rng rng(spec.init_seed);
  const double s1 = std::sqrt(6.0 / (f + H));
  const double s2 = std::sqrt(6.0 / (H + C));
  double* W1 = params.data();
  double* W2 = params.data() + std::size_t(H) * f + H;
  for (std::size_t i = 0; i < std::size_t(H) * f; ++i) W1[i] = rng.uniform_open(-s1, s1);
  for (std::size_t i = 0; i < std::size_t(C) * H; ++i) W2[i] = rng.uniform_open(-s2, s2);
  return params;  // biases stay zero
}

double forward_loss(const ModelSpec& spec, const Vec& params, const Dataset& ds,
                    const Batch& batch) {
  validate_inputs(spec, params, ds);
  check_batch(ds, batch);
  Scratch s;
  double total = 0.0;
  for (auto i : batch) {
    forward(spec, params, ds.row(i), s);
    total += softmax_loss(s, ds.labels[i]);
  }
  return total / static_cast<double>(batch.size());
}

Vec gradient_with_loss(const ModelSpec& spec, const Vec& params, const Dataset& ds,
                       const Batch& batch, double* loss_out) {
  validate_inputs(spec, params, ds);
  check_batch(ds, batch);
  const int f = spec.feature_dim;
  const int C = spec.num_classes;
  Vec grad(params.size(), 0.0);
  Scratch s;
  std::vector<double> dh;
  double total_loss = 0.0;

  for (auto i : batch) {
    const double* x = ds.row(i);
    forward(spec, params, x, s);
    total_loss += softmax_loss(s, ds.labels[i]);
    s.probs[ds.labels[i]] -= 1.0;  // q = softmax - onehot

    if (spec.kind == ModelKind::logreg) {
      double* gW = grad.data();
      double* gb = grad.data() + std::size_t(C) * f;
      for (int c = 0; c < C; ++c) {
        const double q = s.probs[c];
        double* gw = gW + std::size_t(c) * f;
        for (int j = 0; j < f; ++j) gw[j] += q * x[j];
        gb[c] += q;
      }
    } else {
      const int H = spec.hidden;
      const double* W2 = params.data() + std::size_t(H) * f + H;
      double* gW1 = grad.data();
      double* gb1 = grad.data() + std::size_t(H) * f;
      double* gW2 = gb1 + H;
      double* gb2 = gW2 + std::size_t(C) * H;
      for (int c = 0; c < C; ++c) {
        const double q = s.probs[c];
        double* gw = gW2 + std::size_t(c) * H;
        for (int u = 0; u < H; ++u) gw[u] += q * s.h[u];
        gb2[c] += q;
      }
      dh.assign(H, 0.0);
      for (int c = 0; c < C; ++c) {
        const double q = s.probs[c];
        const double* w = W2 + std::size_t(c) * H;
        for (int u = 0; u < H; ++u) dh[u] += q * w[u];
      }
      for (int u = 0; u < H; ++u) {
        const double g = dh[u] * (1.0 - s.h[u] * s.h[u]);
        double* gw = gW1 + std::size_t(u) * f;
        for (int j = 0; j < f; ++j) gw[j] += g * x[j];
        gb1[u] += g;
      }
    }
  }

  const double n = static_cast<double>(batch.size());
  for (auto& g : grad) g /= n;
  if (loss_out) *loss_out = total_loss / n;
  return grad;
}

Vec gradient(const ModelSpec& spec, const Vec& params, const Dataset& ds, const Batch& batch) {
  return gradient_with_loss(spec, params, ds, batch, nullptr);
}

EvalResult evaluate(const ModelSpec& spec, const Vec& params, const Dataset& ds) {
  validate_inputs(spec, params, ds);
  EvalResult out;
  if (ds.num_samples() == 0) return out;
  Scratch s;
  std::size_t correct = 0;
  double total_loss = 0.0;
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    forward(spec, params, ds.row(i), s);
    int best = 0;
    for (int c = 1; c < spec.num_classes; ++c)
      if (s.logits[c] > s.logits[best]) best = c;  // ties keep the lower class
    if (best == ds.labels[i]) ++correct;
    total_loss += softmax_loss(s, ds.labels[i]);
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(ds.num_samples());
  out.mean_loss = total_loss / static_cast<double>(ds.num_samples());
  return out;
}

}  // namespace fedsim
