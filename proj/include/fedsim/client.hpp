#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/vecmath.hpp"

namespace fedsim {

struct ClientState {
  int id = 0;
  bool byzantine = false;
  Vec momentum;  // m_{i,t}, zero before round 1
  std::vector<std::size_t> shard;
  Rng rng;  // stream keyed by (experiment_seed, id)
  std::uint64_t experiment_seed = 0;
  double last_batch_loss = 0.0;

  ClientState(int id_, bool byzantine_, std::vector<std::size_t> shard_, std::size_t dim,
              std::uint64_t experiment_seed_)
      : id(id_),
        byzantine(byzantine_),
        momentum(dim, 0.0),
        shard(std::move(shard_)),
        rng(derive_seed(experiment_seed_, Stream::client, static_cast<std::uint64_t>(id_))),
        experiment_seed(experiment_seed_) {}
};

// batch drawn from the client's own stream: without replacement, unless the
// shard is smaller than batch_size
Batch sample_batch(ClientState& state, int batch_size);

// fresh batch gradient of the global parameters; advances the client stream
// and records the batch loss. No role check: the data-level attacks reuse it.
Vec sample_gradient(ClientState& state, const Vec& global_params, int batch_size,
                    const ModelSpec& spec, const Dataset& ds);

// m <- (1 - beta) * g + beta * m
const Vec& apply_momentum(ClientState& state, const Vec& g, double beta);

// benign round step: sample, gradient, momentum update
Vec local_step(ClientState& state, const Vec& global_params, double beta, int batch_size,
               const ModelSpec& spec, const Dataset& ds);

// momentum back to zero, stream back to its (seed, id) origin
void reset(ClientState& state);

}  // namespace fedsim
