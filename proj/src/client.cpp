#include "fedsim/client.hpp"

#include <numeric>
#include <stdexcept>

namespace fedsim {

Batch sample_batch(ClientState& state, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("sample_batch: batch_size must be >= 1");
  const std::size_t n = state.shard.size();
  if (n == 0) throw std::invalid_argument("sample_batch: client shard is empty");

  Batch batch;
  const std::size_t b = static_cast<std::size_t>(batch_size);
  batch.reserve(b);
  if (n < b) {
    // shard smaller than the batch: draw with replacement
    for (std::size_t i = 0; i < b; ++i) batch.push_back(state.shard[state.rng.uniform_below(n)]);
    return batch;
  }
  // partial Fisher-Yates over shard positions
  std::vector<std::size_t> pos(n);
  std::iota(pos.begin(), pos.end(), 0);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t j = i + state.rng.uniform_below(n - i);
    std::swap(pos[i], pos[j]);
    batch.push_back(state.shard[pos[i]]);
  }
  return batch;
}

Vec sample_gradient(ClientState& state, const Vec& global_params, int batch_size,
                    const ModelSpec& spec, const Dataset& ds) {
  const Batch batch = sample_batch(state, batch_size);
  return gradient_with_loss(spec, global_params, ds, batch, &state.last_batch_loss);
}

const Vec& apply_momentum(ClientState& state, const Vec& g, double beta) {
  if (beta < 0.0 || beta >= 1.0) throw std::invalid_argument("apply_momentum: beta must be in [0,1)");
  if (g.size() != state.momentum.size())
    throw std::invalid_argument("apply_momentum: gradient dim mismatch");
  for (std::size_t j = 0; j < g.size(); ++j)
    state.momentum[j] = (1.0 - beta) * g[j] + beta * state.momentum[j];
  return state.momentum;
}

Vec local_step(ClientState& state, const Vec& global_params, double beta, int batch_size,
               const ModelSpec& spec, const Dataset& ds) {
  if (state.byzantine)
    throw std::invalid_argument("local_step: client " + std::to_string(state.id) +
                                " is byzantine; submissions come from the attack path");
  const Vec g = sample_gradient(state, global_params, batch_size, spec, ds);
  return apply_momentum(state, g, beta);
}

void reset(ClientState& state) {
  state.momentum.assign(state.momentum.size(), 0.0);
  state.rng = Rng(derive_seed(state.experiment_seed, Stream::client,
                              static_cast<std::uint64_t>(state.id)));
  state.last_batch_loss = 0.0;
}

}  // namespace fedsim
