#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedsim/aggregators.hpp"
#include "fedsim/attacks.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/selftest.hpp"

#include <iostream>

namespace py = pybind11;

namespace {

py::dict row_to_dict(const fedsim::MetricsRow& r) {
  py::dict d;
  d["round"] = r.round;
  d["eta"] = r.eta;
  d["test_accuracy"] = r.test_accuracy;
  d["test_loss"] = r.test_loss;
  d["train_loss"] = r.train_loss;
  d["clip_fraction_benign"] = r.clip_fraction_benign;
  d["clip_fraction_byz"] = r.clip_fraction_byz;
  d["cos_ref_benign"] = r.cos_ref_benign;
  d["cos_ref_byz"] = r.cos_ref_byz;
  d["cos_delta_prev"] = r.cos_delta_prev;
  return d;
}

}  // namespace

PYBIND11_MODULE(_fedsim, m) {
  m.doc() = "deterministic simulator of federated learning under model poisoning";

  m.def(
      "run",
      [](const std::string& config_json) {
        const fedsim::ExperimentConfig cfg = fedsim::parse_config_json(config_json);
        const fedsim::ExperimentResult res = fedsim::run_experiment(cfg);
        py::list metrics;
        for (const auto& row : res.metrics) metrics.append(row_to_dict(row));
        py::dict out;
        out["final_params"] = res.final_params;
        out["final_test_accuracy"] =
            res.metrics.empty() ? 0.0 : res.metrics.back().test_accuracy;
        out["metrics"] = metrics;
        out["metrics_csv"] = fedsim::metrics_to_csv(res.metrics);
        return out;
      },
      py::arg("config_json"),
      "Run one experiment from a flat JSON config string; returns final params, "
      "per-round metrics and the exact CSV text.");

  m.def(
      "sweep",
      [](const std::string& config_json, const std::string& grid_json,
         const std::string& out_dir) {
        const fedsim::ExperimentConfig base = fedsim::parse_config_json(config_json);
        const std::vector<fedsim::SweepRow> rows = fedsim::run_sweep(base, grid_json, out_dir);
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["cell"] = r.cell;
          d["seed"] = r.cfg.seed;
          d["final_test_accuracy"] = r.final_test_accuracy;
          d["status"] = r.status;
          d["attack"] = fedsim::attack_kind_name(r.cfg.attack.kind);
          d["aggregator"] = fedsim::agg_kind_name(r.cfg.aggregator.kind);
          out.append(d);
        }
        return out;
      },
      py::arg("config_json"), py::arg("grid_json"), py::arg("out_dir"),
      "Cartesian sweep over a flat JSON grid; writes per-cell CSVs plus summary.csv "
      "under out_dir and returns one record per cell.");

  m.def(
      "validate_config",
      [](const std::string& config_json) {
        fedsim::validate_config(fedsim::parse_config_json(config_json));
      },
      py::arg("config_json"), "Parse and validate a config string; raises on any problem.");

  m.def(
      "selftest", [] { return fedsim::run_selftest(std::cout); },
      "Run the frozen oracle checks, printing one line each; returns the failure count.");

  m.def("alie_zmax", &fedsim::alie_zmax, py::arg("k"), py::arg("k_m"),
        "Largest mean-shift multiple that still keeps a majority of expected supporters.");

  m.def(
      "cc_clip",
      [](const fedsim::Vec& m, const fedsim::Vec& center, double tau) {
        const fedsim::ClipResult res = fedsim::cc_clip(m, center, tau);
        return py::make_tuple(res.value, res.factor);
      },
      py::arg("m"), py::arg("center"), py::arg("tau"),
      "Pull m toward center onto the tau-ball; returns (value, factor).");

  m.def(
      "trimmed_mean",
      [](const std::vector<fedsim::Vec>& ms, int trim_k) {
        return fedsim::trimmed_mean_agg(ms, trim_k).aggregate;
      },
      py::arg("ms"), py::arg("trim_k"),
      "Coordinate-wise mean with trim_k values dropped from each end.");

  m.def(
      "geometric_median",
      [](const std::vector<fedsim::Vec>& ms, int max_iters, double tol) {
        return fedsim::rfa_agg(ms, max_iters, tol).aggregate;
      },
      py::arg("ms"), py::arg("max_iters") = 100, py::arg("tol") = 1e-8,
      "Smoothed Weiszfeld geometric median of the given points.");

  m.def("scc_cluster_sizes", &fedsim::scc_cluster_sizes, py::arg("k"), py::arg("n"),
        "Contiguous near-equal cluster sizes with the +1 remainders at the tail.");
}
