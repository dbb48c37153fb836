#pragma once

#include <vector>

#include "fedsim/client.hpp"
#include "fedsim/vecmath.hpp"

namespace fedsim {

// The omniscient adversary's view of round t, assembled by the harness from
// the current round's benign submissions and the stored server reference.
struct RoundKnowledge {
  int t = 1;
  Vec benign_mean;     // index-wise mean of benign momenta
  Vec benign_std;      // index-wise population std of benign momenta
  Vec prev_aggregate;  // reference the server will clip against this round
  double eta = 0.0;
  int k = 0;
  int k_m = 0;
};

enum class AttackKind { none, alie, ipm, rop, bitflip, labelflip };

struct AttackSpec {
  AttackKind kind = AttackKind::none;
  double z = 1.0;
  double lambda = 0.9;
  double rho = 1.0;
  double angle_deg = 90.0;
  double epsilon = 0.2;
  bool alternate_sign = false;
};

// largest z such that floor(k/2+1)-k_m benign "supporters" are expected
// beyond the shifted mean; inverse normal CDF by bisection
double alie_zmax(int k, int k_m);

// mean-shift attack: benign_mean - z_eff * benign_std, optionally flipping
// the sign on odd rounds
Vec alie(const RoundKnowledge& kn, double z, bool alternate);

// scaled inversion of the benign mean
Vec ipm(const RoundKnowledge& kn, double epsilon);

// relocated orthogonal perturbation around the reference point
Vec rop(const RoundKnowledge& kn, double z, double lambda, double rho, double angle_deg);

// momentum update with the gradient sign flipped, stored in the client state
Vec bit_flip(const Vec& own_gradient, ClientState& state, double beta);

// one submission per byzantine client, in the order the states are given.
// ds must already carry flipped labels when the configured kind needs them.
std::vector<Vec> dispatch(const AttackSpec& spec, const RoundKnowledge& kn,
                          const std::vector<ClientState*>& byz_states, const Vec& global_params,
                          double beta, int batch_size, const ModelSpec& mspec, const Dataset& ds);

}  // namespace fedsim
