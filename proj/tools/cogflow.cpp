// cogflow: configuration-driven experiment runner for the coupled
// thought/cognition process. Subcommands: validate, simulate, verify,
// breadth, export. All behavior comes from the JSON config; flags only
// override paths, seed and worker count.
//
// Exit codes: 0 ok, 1 verification failure, 2 config error, 3 runtime error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "cogflow/cogflow.hpp"

namespace {

int resolve_workers(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("COGFLOW_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void print_reports(const cogflow::ExperimentResult& result) {
  for (const auto& rep : result.reports) {
    std::cout << (rep.pass ? "[pass] " : "[FAIL] ") << rep.theorem_id
              << ": L1 residual " << cogflow::format_g17(rep.l1) << " vs noise floor "
              << cogflow::format_g17(rep.noise_l1) << " (k=" << rep.k_noise << ")\n";
    if (rep.has_atom_check)
      std::cout << "        atom weight measured " << cogflow::format_g17(rep.atom_weight_measured)
                << ", survival exp(-lambda t) "
                << cogflow::format_g17(rep.atom_weight_survival) << "\n";
  }
  if (result.breadth) {
    const auto& b = *result.breadth;
    std::cout << (b.pass ? "[pass] " : "[FAIL] ") << "breadth-expectation: distance "
              << cogflow::format_g17(b.frobenius_distance) << " vs 3x SE "
              << cogflow::format_g17(3.0 * b.mc_se) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cogflow: piecewise-deterministic reasoning-model laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int workers_flag = 0;
  std::optional<uint64_t> seed_override;

  auto* validate_cmd = app.add_subcommand("validate", "validate a config and its model");
  auto* simulate_cmd = app.add_subcommand("simulate", "run the simulation stages only");
  auto* verify_cmd = app.add_subcommand("verify", "run simulate + density verification");
  auto* breadth_cmd = app.add_subcommand("breadth", "run the switching-density stage only");
  auto* export_cmd = app.add_subcommand("export", "convert a written artifact between formats");

  for (CLI::App* sub : {validate_cmd, simulate_cmd, verify_cmd, breadth_cmd}) {
    sub->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("-o,--output", out_dir, "output directory override");
    sub->add_option("-w,--workers", workers_flag,
                    "worker threads (default: COGFLOW_WORKERS, then hardware)");
    sub->add_option_function<uint64_t>(
        "--seed", [&](const uint64_t& s) { seed_override = s; }, "master seed override");
  }

  std::string export_in, export_format = "csv", export_out;
  export_cmd->add_option("--in", export_in, "artifact file to convert")->required();
  export_cmd->add_option("--format", export_format, "target format: csv or json");
  export_cmd->add_option("--out", export_out, "output file")->required();

  CLI11_PARSE(app, argc, argv);

  const int workers = resolve_workers(workers_flag);

  try {
    if (export_cmd->parsed()) {
      cogflow::export_artifact(export_in, export_format, export_out);
      std::cout << "wrote " << export_out << "\n";
      return 0;
    }

    cogflow::ExperimentConfig cfg = cogflow::load_experiment_config(config_path);

    if (validate_cmd->parsed()) {
      cogflow::validate_experiment(cfg);
      if (cfg.model) std::cout << cogflow::validate_model(*cfg.model).summary();
      std::cout << "config ok (digest " << cogflow::hex64(cogflow::fnv1a64(cfg.raw.dump()))
                << ")\n";
      return 0;
    }

    if (simulate_cmd->parsed()) {
      cfg.verify.reset();  // simulation artifacts only
      cfg.breadth.reset();
      if (!cfg.model) throw cogflow::ConfigError("simulate: config has no model");
    } else if (breadth_cmd->parsed()) {
      cfg.model.reset();
      if (!cfg.breadth) throw cogflow::ConfigError("breadth: config has no breadth stage");
    }

    const auto result = cogflow::run_experiment(cfg, workers, out_dir, seed_override);
    print_reports(result);
    const std::string dir = out_dir.empty() ? cfg.output.dir : out_dir;
    std::cout << "artifacts in " << dir << " (" << result.manifest.files.size()
              << " files)\n";
    if (verify_cmd->parsed() || breadth_cmd->parsed())
      return result.verification_pass ? 0 : 1;
    return 0;
  } catch (const cogflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
}
