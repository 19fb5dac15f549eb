// Command-line front end for the scenario harness.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bvpc/errors.hpp"
#include "bvpc/harness.hpp"

using namespace bvpc;
using namespace bvpc::harness;

namespace {

struct Common {
  std::string out = "bvpc_out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool timing = false;
};

void print_result(const ScenarioResult& res) {
  for (const RunRecord& r : res.runs) {
    const Metrics& m = r.metrics;
    std::printf("%-20s %-13s rms_d=%.3f m  alt_dev=%.3f m  margin=%.3f  final_d_err=%.3f  final_img_err=%.4f",
                r.name.c_str(), to_string(m.outcome), m.rms_distance_error, m.max_altitude_deviation,
                m.min_border_margin, m.final_distance_error, m.final_image_error);
    if (std::isfinite(m.mean_solve_ms)) std::printf("  solve=%.2f/%.2f ms", m.mean_solve_ms, m.max_solve_ms);
    std::printf("\n");
  }
  if (!res.sweep.empty()) {
    std::printf("%8s %12s %10s\n", "speed", "perception", "success");
    for (const SweepCell& c : res.sweep) {
      std::printf("%8.2f %12s %5d/%-4d (%.0f%%)\n", c.speed, c.perception ? "on" : "off", c.successes, c.trials,
                  100.0 * c.rate());
    }
  }
  if (res.predict) {
    std::printf("max error  bearing=%.3e  homogeneous=%.3e  discrepancy=%.3e\n", res.predict->max_bearing_error,
                res.predict->max_homogeneous_error, res.predict->max_discrepancy);
  }
}

int execute(const std::string& path, const Common& opt, std::optional<ScenarioKind> required) {
  ScenarioConfig cfg = load_config(path);
  if (required && cfg.kind != *required) {
    throw ConfigError(path + ": scenario must be '" + to_string(*required) + "' for this subcommand");
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.timing) cfg.record_timing = true;
  const ScenarioResult res = run_scenario(cfg);
  const auto files = emit_outputs(res, opt.out);
  if (!opt.quiet) {
    print_result(res);
    std::printf("wrote %zu files to %s\n", files.size(), opt.out.c_str());
  }
  return 0;
}

int selftest(bool quiet) {
  ScenarioConfig hover = default_config(ScenarioKind::Hover);
  hover.duration = 2.0;
  const RunRecord h = scenario_hover(hover);
  const double drift = (h.metrics.final_position - hover.initial_poses.front().position).norm();
  const PredictReport p = predict_compare(PredictSettings{});
  const bool ok = h.metrics.outcome == RunOutcome::Completed && drift < 0.1 && p.max_discrepancy < 1e-4;
  if (!quiet) {
    std::printf("hover: outcome=%s drift=%.2e m\n", to_string(h.metrics.outcome), drift);
    std::printf("predict: discrepancy=%.2e\n", p.max_discrepancy);
    std::printf("selftest %s\n", ok ? "passed" : "FAILED");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bearing-based visual predictive control: scenarios, sweeps and prediction studies"};
  app.require_subcommand(1);
  Common opt;
  std::string config_path;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_flag("--quiet", opt.quiet, "Suppress the console summary");
    sub->add_flag("--timing", opt.timing, "Record wall-clock solve times (outputs become non-reproducible)");
  };
  CLI::App* run = app.add_subcommand("run", "Run any scenario described by a config file");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "Run a success_sweep config");
  add_common(sweep);
  CLI::App* predict = app.add_subcommand("predict", "Run a predict_compare config");
  add_common(predict);

  CLI::App* self = app.add_subcommand("selftest", "Quick hover and prediction check, or print defaults");
  std::string dump_kind;
  bool quiet_self = false;
  self->add_option("--dump-config", dump_kind, "Print the default config of a scenario kind and exit")
      ->expected(0, 1)
      ->default_str("gate_reaching");
  self->add_flag("--quiet", quiet_self, "Only report through the exit code");

  CLI11_PARSE(app, argc, argv);

  try {
    for (CLI::App* sub : {run, sweep, predict}) {
      if (sub->parsed() && sub->count("--seed") > 0) opt.seed = seed;
    }
    if (run->parsed()) return execute(config_path, opt, std::nullopt);
    if (sweep->parsed()) return execute(config_path, opt, ScenarioKind::SuccessSweep);
    if (predict->parsed()) return execute(config_path, opt, ScenarioKind::PredictCompare);
    if (self->parsed()) {
      if (self->count("--dump-config") > 0) {
        std::cout << config_to_json(default_config(parse_kind(dump_kind.empty() ? "gate_reaching" : dump_kind)));
        return 0;
      }
      return selftest(quiet_self);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
