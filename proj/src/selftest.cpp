#include "fedsim/selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/aggregators.hpp"
#include "fedsim/attacks.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/vecmath.hpp"

namespace fedsim {

namespace {

struct Reporter {
  std::ostream& out;
  int failures = 0;
  int total = 0;

  void check(const std::string& name, const std::function<void()>& body) {
    ++total;
    try {
      body();
      out << "ok   " << name << "\n";
    } catch (const std::exception& e) {
      ++failures;
      out << "FAIL " << name << ": " << e.what() << "\n";
    }
  }
};

void expect(bool cond, const std::string& detail) {
  if (!cond) throw std::runtime_error(detail);
}

std::string num(double x) {
  std::ostringstream s;
  s.precision(12);
  s << x;
  return s.str();
}

}  // namespace

int run_selftest(std::ostream& out) {
  Reporter r{out};

  r.check("alie z-max frozen values", [] {
    expect(std::abs(alie_zmax(25, 5) - 0.2533471031) < 1e-9,
           "zmax(25,5) = " + num(alie_zmax(25, 5)));
    expect(std::abs(alie_zmax(10, 4) - 0.4307272993) < 1e-9,
           "zmax(10,4) = " + num(alie_zmax(10, 4)));
    expect(std::abs(alie_zmax(8, 2)) < 1e-12, "zmax(8,2) = " + num(alie_zmax(8, 2)));
  });

  r.check("ipm mean-aggregation identity", [] {
    const int k = 25, k_m = 5;
    RoundKnowledge kn;
    kn.benign_mean = {0.3, -1.2, 2.0};
    kn.benign_std = Vec(3, 0.0);
    kn.prev_aggregate = kn.benign_mean;
    kn.k = k;
    kn.k_m = k_m;
    std::vector<Vec> subs(static_cast<std::size_t>(k - k_m), kn.benign_mean);
    const Vec bad = ipm(kn, 0.2);
    for (int i = 0; i < k_m; ++i) subs.push_back(bad);
    const Vec agg = mean_agg(subs).aggregate;
    for (std::size_t d = 0; d < agg.size(); ++d)
      expect(std::abs(agg[d] - 0.76 * kn.benign_mean[d]) < 1e-12,
             "coordinate " + std::to_string(d) + " = " + num(agg[d]));
  });

  r.check("centered clip scales and respects the boundary", [] {
    const Vec center(4, 0.0);
    ClipResult far = cc_clip({2.0, 0.0, 0.0, 0.0}, center, 1.0);
    expect(std::abs(far.factor - 0.5) < 1e-15, "factor = " + num(far.factor));
    ClipResult edge = cc_clip({1.0, 0.0, 0.0, 0.0}, center, 1.0);
    expect(edge.factor == 1.0, "boundary factor = " + num(edge.factor));
  });

  r.check("trimmed mean drops the outlier", [] {
    const Vec agg = trimmed_mean_agg({{1.0}, {2.0}, {100.0}}, 1).aggregate;
    expect(agg.size() == 1 && agg[0] == 2.0, "got " + num(agg[0]));
  });

  r.check("geometric median finds the Fermat point", [] {
    const Vec med = rfa_agg({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}).aggregate;
    for (double v : med)
      expect(std::abs(v - 0.2113248654) < 1e-4, "coordinate = " + num(v));
  });

  r.check("orthogonal relocation lands on the escape radius", [] {
    RoundKnowledge kn;
    kn.t = 2;
    kn.benign_mean = {0.4, -0.3, 0.9, 0.1};
    kn.benign_std = Vec(4, 0.0);
    kn.prev_aggregate = {0.5, -0.2, 0.8, 0.0};
    kn.k = 25;
    kn.k_m = 5;
    const double z = 1.0;
    const Vec attack = rop(kn, z, 0.9, 1.0, 90.0);
    const double dist = norm(sub(attack, kn.prev_aggregate));
    expect(std::abs(dist - z) < 1e-12, "distance = " + num(dist));
  });

  r.check("cluster sizes put the remainder at the tail", [] {
    const std::vector<int> sizes = scc_cluster_sizes(25, 3);
    expect(sizes == std::vector<int>{8, 8, 9},
           "got {" + std::to_string(sizes[0]) + "," + std::to_string(sizes[1]) + "," +
               std::to_string(sizes[2]) + "}");
  });

  r.check("logreg gradient matches finite differences", [] {
    Dataset ds = generate_blobs(3, 8, 4, 0.5, 99);
    ModelSpec spec;
    spec.kind = ModelKind::logreg;
    spec.feature_dim = ds.feature_dim;
    spec.num_classes = ds.num_classes;
    Vec params(param_count(spec), 0.0);
    Rng rng(7);
    for (double& p : params) p = rng.normal() * 0.1;
    Batch batch{0, 5, 11, 17, 23};
    const Vec g = gradient(spec, params, ds, batch);
    const double h = 1e-5;
    for (std::size_t d = 0; d < params.size(); d += 3) {
      Vec lo = params, hi = params;
      lo[d] -= h;
      hi[d] += h;
      const double fd =
          (forward_loss(spec, hi, ds, batch) - forward_loss(spec, lo, ds, batch)) / (2 * h);
      expect(std::abs(g[d] - fd) <= 1e-4 * (std::abs(fd) + 1e-6),
             "coordinate " + std::to_string(d) + ": " + num(g[d]) + " vs " + num(fd));
    }
  });

  r.check("mlp init stays inside the per-layer bounds with zero biases", [] {
    ModelSpec spec;
    spec.kind = ModelKind::mlp;
    spec.feature_dim = 6;
    spec.num_classes = 3;
    spec.hidden = 5;
    spec.init_seed = 13;
    const Vec p = init_params(spec);
    const double s1 = std::sqrt(6.0 / (6 + 5));
    const double s2 = std::sqrt(6.0 / (5 + 3));
    std::size_t i = 0;
    for (; i < 30; ++i) expect(std::abs(p[i]) < s1, "W1 out of bounds");
    for (; i < 35; ++i) expect(p[i] == 0.0, "b1 not zero");
    for (; i < 50; ++i) expect(std::abs(p[i]) < s2, "W2 out of bounds");
    for (; i < 53; ++i) expect(p[i] == 0.0, "b2 not zero");
  });

  r.check("tiny run repeats byte-identically", [] {
    ExperimentConfig cfg;
    cfg.blobs_classes = 3;
    cfg.blobs_per_class = 12;
    cfg.blobs_feature_dim = 4;
    cfg.k = 3;
    cfg.k_m = 1;
    cfg.attack.kind = AttackKind::alie;
    cfg.rounds = 3;
    cfg.batch_size = 4;
    cfg.eval_every = 1;
    cfg.seed = 5;
    const std::string a = metrics_to_csv(run_experiment(cfg).metrics);
    const std::string b = metrics_to_csv(run_experiment(cfg).metrics);
    expect(a == b, "two runs of the same config diverged");
  });

  if (r.failures == 0)
    out << "selftest: all " << r.total << " checks ok\n";
  else
    out << "selftest: " << r.failures << " of " << r.total << " checks failed\n";
  return r.failures;
}

}  // namespace fedsim
