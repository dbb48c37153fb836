#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/vecmath.hpp"

namespace fedsim {

enum class ModelKind { logreg, mlp };

struct ModelSpec {
  ModelKind kind = ModelKind::logreg;
  int feature_dim = 0;
  int num_classes = 0;
  int hidden = 0;  // mlp only
  std::uint64_t init_seed = 0;
};

// sample indices into a Dataset
using Batch = std::vector<std::size_t>;

std::size_t param_count(const ModelSpec& spec);

// logreg starts at zero; mlp weights are Glorot uniform per layer (open
// interval), biases zero
Vec init_params(const ModelSpec& spec);

// mean cross-entropy over the batch, softmax with max subtraction
double forward_loss(const ModelSpec& spec, const Vec& params, const Dataset& ds,
                    const Batch& batch);

Vec gradient(const ModelSpec& spec, const Vec& params, const Dataset& ds, const Batch& batch);

// same as gradient but also reports the batch loss computed in the same pass
Vec gradient_with_loss(const ModelSpec& spec, const Vec& params, const Dataset& ds,
                       const Batch& batch, double* loss_out);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// full-set accuracy (argmax ties go to the lower class index) and mean loss
EvalResult evaluate(const ModelSpec& spec, const Vec& params, const Dataset& ds);

}  // namespace fedsim
