#include "fedsim/attacks.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

namespace fedsim {

namespace {

double normal_cdf(double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); }

void check_knowledge(const RoundKnowledge& kn) {
  if (kn.t < 1) throw std::invalid_argument("attack: round index must be >= 1");
  if (kn.benign_mean.size() != kn.benign_std.size() ||
      kn.benign_mean.size() != kn.prev_aggregate.size())
    throw std::invalid_argument("attack: knowledge vectors disagree in dim");
  if (kn.benign_mean.empty()) throw std::invalid_argument("attack: empty knowledge vectors");
  if (kn.k_m >= kn.k) throw std::invalid_argument("attack: k_m must be below k");
}

}  // namespace

double alie_zmax(int k, int k_m) {
  if (k_m < 1 || k_m >= k) throw std::invalid_argument("alie_zmax: need 1 <= k_m < k");
  const int s = static_cast<int>(std::floor(k / 2.0 + 1.0)) - k_m;
  const double q = static_cast<double>(k - k_m - s) / static_cast<double>(k - k_m);
  if (q <= 0.0 || q >= 1.0)
    throw std::invalid_argument("alie_zmax: degenerate supporter count (quantile " +
                                std::to_string(q) + ")");
  // bisection on the erf-based CDF; 100 halvings of [-10,10] land far below
  // the 1e-10 contract
  double lo = -10.0, hi = 10.0;
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

Vec alie(const RoundKnowledge& kn, double z, bool alternate) {
  check_knowledge(kn);
  const double z_eff = (!alternate || kn.t % 2 == 0) ? z : -z;
  Vec out = kn.benign_mean;
  axpy(out, -z_eff, kn.benign_std);
  return out;
}

Vec ipm(const RoundKnowledge& kn, double epsilon) {
  check_knowledge(kn);
  if (epsilon < 0.0) throw std::invalid_argument("ipm: epsilon must be >= 0");
  return scale(kn.benign_mean, -epsilon);
}

Vec rop(const RoundKnowledge& kn, double z, double lambda, double rho, double angle_deg) {
  check_knowledge(kn);
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("rop: lambda must be in [0,1]");
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("rop: rho must be in [0,1]");

  // in round 1 there is no previous aggregate yet; the attack substitutes the
  // current benign mean
  const Vec& ref = (kn.t == 1) ? kn.benign_mean : kn.prev_aggregate;
  const std::size_t d = ref.size();

  // target point between the reference and the benign mean
  Vec mhat = scale(ref, lambda);
  axpy(mhat, 1.0 - lambda, kn.benign_mean);

  const Vec p(d, 1.0);
  const double nm = norm(mhat);
  const double theta = angle_deg * 3.14159265358979323846 / 180.0;

  Vec delta(d, 0.0);
  if (nm <= 1e-12) {
    std::cerr << "rop: degenerate target at round " << kn.t << ", using the raw perturbation direction\n";
    delta = scale(p, 1.0 / norm(p));
  } else {
    Vec phat = orthogonal_rejection(p, mhat).rej;
    double np = norm(phat);
    if (np <= 1e-12) {
      // perturbation parallel to the target: fall back to the first basis vector
      std::cerr << "rop: perturbation parallel to target at round " << kn.t
                << ", falling back to e1\n";
      Vec e1(d, 0.0);
      e1[0] = 1.0;
      phat = orthogonal_rejection(e1, mhat).rej;
      np = norm(phat);
    }
    if (np > 1e-12) axpy(delta, std::sin(theta) / np, phat);
    axpy(delta, std::cos(theta) / nm, mhat);
  }

  Vec attack = scale(delta, z);
  axpy(attack, rho, ref);
  axpy(attack, 1.0 - rho, kn.benign_mean);
  return attack;
}

Vec bit_flip(const Vec& own_gradient, ClientState& state, double beta) {
  return apply_momentum(state, scale(own_gradient, -1.0), beta);
}

std::vector<Vec> dispatch(const AttackSpec& spec, const RoundKnowledge& kn,
                          const std::vector<ClientState*>& byz_states, const Vec& global_params,
                          double beta, int batch_size, const ModelSpec& mspec, const Dataset& ds) {
  check_knowledge(kn);
  std::vector<Vec> subs;
  subs.reserve(byz_states.size());

  switch (spec.kind) {
    case AttackKind::none:
    case AttackKind::labelflip: {
      // honest step; for labelflip the caller hands the flipped dataset
      for (auto* st : byz_states) {
        const Vec g = sample_gradient(*st, global_params, batch_size, mspec, ds);
        subs.push_back(apply_momentum(*st, g, beta));
      }
      break;
    }
    case AttackKind::bitflip: {
      for (auto* st : byz_states) {
        const Vec g = sample_gradient(*st, global_params, batch_size, mspec, ds);
        subs.push_back(bit_flip(g, *st, beta));
      }
      break;
    }
    case AttackKind::alie: {
      const Vec v = alie(kn, alie_zmax(kn.k, kn.k_m), spec.alternate_sign);
      for (auto* st : byz_states) {
        st->momentum = v;
        subs.push_back(v);
      }
      break;
    }
    case AttackKind::ipm: {
      const Vec v = ipm(kn, spec.epsilon);
      for (auto* st : byz_states) {
        st->momentum = v;
        subs.push_back(v);
      }
      break;
    }
    case AttackKind::rop: {
      const Vec v = rop(kn, spec.z, spec.lambda, spec.rho, spec.angle_deg);
      for (auto* st : byz_states) {
        st->momentum = v;
        subs.push_back(v);
      }
      break;
    }
    default:
      throw std::invalid_argument("dispatch: unknown attack kind");
  }
  return subs;
}

}  // namespace fedsim
