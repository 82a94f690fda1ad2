#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogflow/breadth.hpp"
#include "cogflow/density.hpp"
#include "cogflow/jsonutil.hpp"
#include "cogflow/model.hpp"
#include "cogflow/pdmp.hpp"

namespace cogflow {

// Configuration-driven experiment runner: simulate -> estimate -> verify ->
// export, with a manifest recording digests of everything written. All
// stages stream particles in fixed-size blocks, so memory stays flat and
// outputs are identical for any worker count.

struct RunConfig {
  uint64_t particles = 0;
  double horizon = 0;
  double step = 1e-2;
  double snapshot_dt = 0;
  double h_div = 1e-4;
  uint64_t seed = 0;
};

struct VerifyConfig {
  bool check_kernel = false;
  bool check_continuity = false;
  int x_bins = 50;
  int tau_bins = 10;
  double tau_max = 1.0;
  double k_noise = 4.0;
  double dt_continuity = 0.01;
  int scaling_factor = 0;  // 0 disables the N-scaling comparison
};

struct BreadthRunConfig {
  SwitchingGeneratorSet generators;
  uint64_t paths = 1000;
  double dt = 1e-3;
  int steps = 1000;
  uint64_t seed = 1;
  int phi0 = 0;
  int compare_paths_factor = 0;  // 0 disables the M-scaling comparison
  int record_every = 0;          // 0 -> endpoints only
};

struct OutputConfig {
  std::string dir = "out";
  bool grids = true;
  bool reports = true;
  bool snapshot = false;
  bool jumps = false;
  bool breadth_path = true;
};

struct ExperimentConfig {
  std::optional<ModelSpec> model;
  RunConfig run;
  std::optional<VerifyConfig> verify;
  std::optional<BreadthRunConfig> breadth;
  OutputConfig output;
  json raw;  // canonical source document (digested into the manifest)
};

inline ExperimentConfig experiment_from_json(const json& j, bool strict = true) {
  using detail::require;
  ExperimentConfig cfg;
  cfg.raw = j;
  if (strict)
    detail::reject_unknown_keys(j, {"model", "run", "verify", "breadth", "output"}, "config");

  if (j.contains("model")) {
    cfg.model = model_from_json(j["model"], strict);
    const json& r = require(j, "run", "config");
    if (strict)
      detail::reject_unknown_keys(
          r, {"particles", "horizon", "step", "snapshot_dt", "seed", "h_div"}, "run");
    cfg.run.particles = require(r, "particles", "run").get<uint64_t>();
    cfg.run.horizon = require(r, "horizon", "run").get<double>();
    cfg.run.step = require(r, "step", "run").get<double>();
    cfg.run.snapshot_dt = r.value("snapshot_dt", cfg.run.horizon);
    cfg.run.seed = require(r, "seed", "run").get<uint64_t>();
    cfg.run.h_div = r.value("h_div", 1e-4);
  }

  if (j.contains("verify")) {
    const json& v = j["verify"];
    if (strict)
      detail::reject_unknown_keys(v,
                                  {"checks", "x_bins", "tau_bins", "tau_max", "k_noise",
                                   "dt_continuity", "scaling_factor"},
                                  "verify");
    VerifyConfig vc;
    for (const json& c : require(v, "checks", "verify")) {
      const std::string name = c.get<std::string>();
      if (name == "kernel")
        vc.check_kernel = true;
      else if (name == "continuity")
        vc.check_continuity = true;
      else
        throw ConfigError("unknown check '" + name + "' (use \"kernel\" or \"continuity\")");
    }
    vc.x_bins = require(v, "x_bins", "verify").get<int>();
    vc.tau_bins = v.value("tau_bins", 10);
    vc.tau_max = v.value("tau_max", cfg.run.horizon);
    vc.k_noise = v.value("k_noise", 4.0);
    vc.dt_continuity = v.value("dt_continuity", 0.01);
    vc.scaling_factor = v.value("scaling_factor", 0);
    cfg.verify = vc;
  }

  if (j.contains("breadth")) {
    const json& b = j["breadth"];
    if (strict) detail::reject_unknown_keys(b, {"generators", "run"}, "breadth");
    BreadthRunConfig bc;
    bc.generators = generator_set_from_json(require(b, "generators", "breadth"), strict);
    const json& r = require(b, "run", "breadth");
    if (strict)
      detail::reject_unknown_keys(
          r, {"paths", "dt", "steps", "seed", "phi0", "compare_paths_factor", "record_every"},
          "breadth.run");
    bc.paths = require(r, "paths", "breadth.run").get<uint64_t>();
    bc.dt = require(r, "dt", "breadth.run").get<double>();
    bc.steps = require(r, "steps", "breadth.run").get<int>();
    bc.seed = r.value("seed", uint64_t{1});
    bc.phi0 = r.value("phi0", 0);
    bc.compare_paths_factor = r.value("compare_paths_factor", 0);
    bc.record_every = r.value("record_every", 0);
    cfg.breadth = bc;
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    if (strict) detail::reject_unknown_keys(o, {"dir", "artifacts"}, "output");
    cfg.output.dir = o.value("dir", "out");
    if (o.contains("artifacts")) {
      cfg.output.grids = cfg.output.reports = cfg.output.snapshot = cfg.output.jumps = false;
      cfg.output.breadth_path = false;
      for (const json& a : o["artifacts"]) {
        const std::string name = a.get<std::string>();
        if (name == "grids")
          cfg.output.grids = true;
        else if (name == "reports")
          cfg.output.reports = true;
        else if (name == "snapshot")
          cfg.output.snapshot = true;
        else if (name == "jumps")
          cfg.output.jumps = true;
        else if (name == "breadth-path")
          cfg.output.breadth_path = true;
        else
          throw ConfigError("unknown artifact '" + name + "'");
      }
    }
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path, bool strict = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return experiment_from_json(j, strict);
}

/// Numeric preconditions of every stage, checked before any computation.
inline void validate_experiment(const ExperimentConfig& cfg) {
  if (cfg.model) {
    const ValidationReport rep = validate_model(*cfg.model);
    if (!rep.ok()) throw ConfigError("model validation failed:\n" + rep.summary());
    if (cfg.run.particles < 1) throw ConfigError("run.particles must be >= 1");
    if (cfg.run.horizon <= 0) throw ConfigError("run.horizon must be > 0");
    if (cfg.run.step <= 0) throw ConfigError("run.step must be > 0");
    if (cfg.run.snapshot_dt <= 0 || cfg.run.snapshot_dt > cfg.run.horizon)
      throw ConfigError("run.snapshot_dt must lie in (0, horizon]");
    const double legs = cfg.run.horizon / cfg.run.snapshot_dt;
    if (std::abs(legs - std::llround(legs)) > 1e-9)
      throw ConfigError("run.snapshot_dt must divide run.horizon");
    if (cfg.verify) {
      if (cfg.verify->x_bins < 3) throw ConfigError("verify.x_bins must be >= 3");
      if (cfg.verify->tau_bins < 1) throw ConfigError("verify.tau_bins must be >= 1");
      if (cfg.verify->tau_max < cfg.run.horizon)
        throw ConfigError("verify.tau_max must cover the horizon (elapsed times reach it)");
      if (cfg.verify->k_noise <= 0) throw ConfigError("verify.k_noise must be > 0");
      if (cfg.verify->check_continuity && cfg.verify->dt_continuity <= 0)
        throw ConfigError("verify.dt_continuity must be > 0");
    }
  } else if (!cfg.breadth) {
    throw ConfigError("config names neither a model nor a breadth stage");
  }
  if (cfg.breadth) {
    if (!(cfg.breadth->generators.switch_rate * cfg.breadth->dt < 1.0))
      throw ConfigError("breadth: switch_rate * dt must be < 1");
    if (cfg.breadth->paths < 2) throw ConfigError("breadth.run.paths must be >= 2");
    if (cfg.breadth->phi0 < 0 ||
        cfg.breadth->phi0 >= cfg.breadth->generators.generator_count())
      throw ConfigError("breadth.run.phi0 out of range");
  }
}

// ---------------------------------------------------------------------------
// Manifest

struct FileRecord {
  std::string path;  // relative to the output directory
  uint64_t bytes = 0;
  uint64_t digest = 0;
};

struct StageTiming {
  std::string name;
  double seconds = 0;
};

struct RunManifest {
  std::string status = "ok";
  uint64_t config_digest = 0;
  uint64_t seed = 0;
  int workers = 1;
  bool verification_pass = true;
  std::vector<StageTiming> stages;
  std::vector<FileRecord> files;
  std::string error;

  json to_json() const {
    json j;
    j["status"] = status;
    j["version"] = kVersion;
    j["config_digest"] = hex64(config_digest);
    j["seed"] = seed;
    j["workers"] = workers;
    j["verification_pass"] = verification_pass;
    json st = json::array();
    for (const auto& s : stages) st.push_back({{"name", s.name}, {"seconds", s.seconds}});
    j["stages"] = st;
    json fs = json::array();
    for (const auto& f : files)
      fs.push_back({{"path", f.path}, {"bytes", f.bytes}, {"fnv1a64", hex64(f.digest)}});
    j["files"] = fs;
    if (!error.empty()) j["error"] = error;
    return j;
  }
};

namespace detail {

class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, RunManifest& manifest)
      : dir_(std::move(dir)), manifest_(manifest) {
    std::filesystem::create_directories(dir_);
  }

  template <typename Fn>
  void write(const std::string& name, Fn&& emit) {
    const std::filesystem::path p = dir_ / name;
    {
      std::ofstream os(p, std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + p.string());
      emit(os);
    }
    std::ifstream is(p, std::ios::binary);
    std::ostringstream buf;
    buf << is.rdbuf();
    const std::string content = buf.str();
    manifest_.files.push_back({name, content.size(), fnv1a64(content)});
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  RunManifest& manifest_;
};

class StageClock {
 public:
  explicit StageClock(RunManifest& m) : manifest_(m) {}
  template <typename Fn>
  void run(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    manifest_.stages.push_back(
        {name, std::chrono::duration<double>(t1 - t0).count()});
  }

 private:
  RunManifest& manifest_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Depth pipeline (simulate -> estimate -> verify), streamed over blocks

struct DepthResult {
  RhoHistory history;
  DensityGrid joint;
  DensityGrid pair_a, pair_b;  // continuity pair (single tau slot)
  bool has_pair = false;
  uint64_t particles = 0;
};

/// Simulate `particles` trajectories through every stored time, accumulating
/// marginal grids (the rho history), the joint grid at the horizon, and the
/// continuity pair. Optional sinks receive the final snapshot rows and the
/// jump log block by block in particle order.
inline DepthResult run_depth_pipeline(
    const ModelSpec& m, const RunConfig& run, const VerifyConfig* verify, uint64_t particles,
    int workers, std::ostream* snapshot_sink = nullptr, std::ostream* jumps_sink = nullptr) {
  DepthResult out;
  out.particles = particles;

  const int legs = static_cast<int>(std::llround(run.horizon / run.snapshot_dt));
  const std::array<int, kMaxDim> xbins{verify ? verify->x_bins : 50,
                                       m.dim > 1 ? (verify ? verify->x_bins : 50) : 0,
                                       m.dim > 2 ? (verify ? verify->x_bins : 50) : 0};

  GridConfig joint_cfg;
  joint_cfg.x_bins = xbins;
  joint_cfg.tau_bins = verify ? verify->tau_bins : 10;
  joint_cfg.tau_max = verify ? verify->tau_max : run.horizon;

  const bool want_pair = verify && verify->check_continuity;
  GridConfig pair_cfg = joint_cfg;
  pair_cfg.tau_bins = 1;
  pair_cfg.tau_max = run.horizon + (verify ? verify->dt_continuity : 0.0);

  std::vector<MarginalAccumulator> hist_acc(static_cast<size_t>(legs + 1));
  for (auto& acc : hist_acc) acc = MarginalAccumulator(m, xbins);
  JointAccumulator joint_acc(m, joint_cfg);
  JointAccumulator pair_a_acc(m, pair_cfg), pair_b_acc(m, pair_cfg);

  SimulateOptions opt;
  opt.step = run.step;
  opt.workers = workers;
  opt.record_jumps = jumps_sink != nullptr;

  if (snapshot_sink) write_snapshot_csv_header(*snapshot_sink, m.dim);
  if (jumps_sink) write_jumps_csv_header(*jumps_sink, m.dim);

  const uint64_t block_size = std::min<uint64_t>(particles, 262144);
  for (uint64_t first = 0; first < particles; first += block_size) {
    const uint64_t n = std::min(block_size, particles - first);
    auto snap = sample_initial(m, n, run.seed, first, workers);
    std::vector<JumpEvent> jumps;
    hist_acc[0].add(snap, workers);
    for (int k = 0; k < legs; ++k) {
      snap = simulate_continuous(m, std::move(snap), run.snapshot_dt, opt,
                                 jumps_sink ? &jumps : nullptr);
      hist_acc[static_cast<size_t>(k + 1)].add(snap, workers);
    }
    joint_acc.add(snap, workers);
    if (want_pair) pair_a_acc.add(snap, workers);
    if (snapshot_sink) write_snapshot_csv_rows(*snapshot_sink, snap, m.dim);
    if (jumps_sink) {
      std::sort(jumps.begin(), jumps.end(), [](const JumpEvent& a, const JumpEvent& b) {
        return a.particle != b.particle ? a.particle < b.particle : a.time < b.time;
      });
      write_jumps_csv_rows(*jumps_sink, jumps, m.dim);
    }
    if (want_pair) {
      snap = simulate_continuous(m, std::move(snap), verify->dt_continuity, opt);
      pair_b_acc.add(snap, workers);
    }
  }

  for (int k = 0; k <= legs; ++k)
    out.history.push(hist_acc[static_cast<size_t>(k)].finalize(
        m, static_cast<double>(k) * run.snapshot_dt));
  out.joint = joint_acc.finalize(m, run.horizon, 0.0);
  if (want_pair) {
    out.pair_a = pair_a_acc.finalize(m, run.horizon, 0.0);
    out.pair_b = pair_b_acc.finalize(m, run.horizon + verify->dt_continuity, 0.0);
    out.has_pair = true;
  }
  return out;
}

namespace detail {

inline void attach_scaling(json& report, double l1_base, double l1_scaled, int factor) {
  json s;
  s["factor"] = factor;
  s["residual_l1_base"] = l1_base;
  s["residual_l1_scaled"] = l1_scaled;
  const double ratio = l1_scaled > 0 ? l1_base / l1_scaled : 0.0;
  s["shrink_ratio"] = ratio;
  s["pass"] = ratio >= 1.4;
  report["scaling"] = s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Breadth pipeline

struct BreadthReport {
  double frobenius_distance = 0;
  double mc_se = 0;
  bool pass = false;
  double hermiticity_defect_max = 0;
  double trace_drift_expected = 0;
  uint64_t paths = 0;
  double scaled_distance = -1;
  double scale_ratio = -1;
  bool scaling_pass = true;

  json to_json() const {
    json j;
    j["kind"] = "breadth-expectation";
    j["paths"] = paths;
    j["frobenius_distance"] = frobenius_distance;
    j["mc_standard_error"] = mc_se;
    j["pass"] = pass;
    j["hermiticity_defect_max"] = hermiticity_defect_max;
    j["trace_drift_expected_path"] = trace_drift_expected;
    if (scaled_distance >= 0) {
      j["scaled"] = {{"frobenius_distance", scaled_distance},
                     {"shrink_ratio", scale_ratio},
                     {"pass", scaling_pass}};
    }
    return j;
  }
};

/// Expected-vs-Monte-Carlo comparison at the endpoint: deterministic RK4
/// path against the mean of `paths` stochastic matrix-SDE paths, judged at
/// 3x the estimated MC standard error.
inline BreadthReport run_breadth_comparison(const BreadthRunConfig& bc, int workers,
                                            DensityPath* expected_out = nullptr) {
  const CMat rho0 = [&] {
    CMat r(bc.generators.n);
    r(0, 0) = 1.0;
    return r;
  }();

  const auto expected = evolve_density_expected(
      rho0, bc.generators, {{0.0, bc.phi0}}, bc.dt, bc.steps,
      bc.record_every > 0 ? bc.record_every : bc.steps);
  if (expected_out) *expected_out = expected;

  BreadthReport rep;
  rep.paths = bc.paths;
  rep.trace_drift_expected =
      std::abs(expected.states.back().trace() - rho0.trace());

  const auto mc = mc_expected_density(rho0, bc.generators, bc.phi0, bc.dt, bc.steps, bc.paths,
                                      bc.seed, workers);
  CMat diff = mc.mean;
  diff -= expected.states.back();
  rep.frobenius_distance = diff.frobenius();
  rep.mc_se = mc.se_frobenius;
  rep.pass = rep.frobenius_distance < 3.0 * rep.mc_se;
  rep.hermiticity_defect_max = mc.max_hermiticity_defect;

  if (bc.compare_paths_factor > 1) {
    const auto mc_big =
        mc_expected_density(rho0, bc.generators, bc.phi0, bc.dt, bc.steps,
                            bc.paths * static_cast<uint64_t>(bc.compare_paths_factor), bc.seed,
                            workers);
    CMat diff_big = mc_big.mean;
    diff_big -= expected.states.back();
    rep.scaled_distance = diff_big.frobenius();
    rep.scale_ratio = rep.scaled_distance > 0 ? rep.frobenius_distance / rep.scaled_distance : 0;
    rep.scaling_pass = rep.scale_ratio >= 1.4;
    rep.pass = rep.pass && rep.scaling_pass;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Full experiment

struct ExperimentResult {
  RunManifest manifest;
  bool verification_pass = true;
  std::vector<ResidualReport> reports;
  std::optional<BreadthReport> breadth;
};

inline void run_experiment_stages(ExperimentConfig& local, int workers, const std::string& dir,
                                  ExperimentResult& result);

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int workers,
                                       const std::string& out_dir_override = "",
                                       std::optional<uint64_t> seed_override = {}) {
  ExperimentResult result;
  RunManifest& manifest = result.manifest;
  manifest.config_digest = fnv1a64(cfg.raw.dump());
  manifest.workers = workers;

  ExperimentConfig local = cfg;
  if (seed_override) {
    local.run.seed = *seed_override;
    if (local.breadth) local.breadth->seed = *seed_override;
  }
  manifest.seed = local.model ? local.run.seed : (local.breadth ? local.breadth->seed : 0);

  const std::string dir = out_dir_override.empty() ? local.output.dir : out_dir_override;

  // A failing stage still leaves a manifest behind, marked failed.
  const auto write_manifest = [&] {
    std::sort(manifest.files.begin(), manifest.files.end(),
              [](const FileRecord& a, const FileRecord& b) { return a.path < b.path; });
    std::filesystem::create_directories(dir);
    std::ofstream os(std::filesystem::path(dir) / "manifest.json", std::ios::binary);
    os << manifest.to_json().dump(2) << '\n';
  };

  try {
    run_experiment_stages(local, workers, dir, result);
  } catch (const std::exception& e) {
    manifest.status = "failed";
    manifest.error = e.what();
    manifest.verification_pass = false;
    write_manifest();
    throw;
  }
  manifest.verification_pass = result.verification_pass;
  write_manifest();
  return result;
}

namespace detail {

inline json reproduce_block(const RunManifest& manifest) {
  return json{{"seed", manifest.seed},
              {"config_digest", hex64(manifest.config_digest)},
              {"version", kVersion}};
}

}  // namespace detail

inline void run_experiment_stages(ExperimentConfig& local, int workers, const std::string& dir,
                                  ExperimentResult& result) {
  RunManifest& manifest = result.manifest;
  detail::StageClock clock(manifest);
  clock.run("validate", [&] { validate_experiment(local); });

  detail::ArtifactWriter files(dir, manifest);

  if (local.model) {
    const ModelSpec& m = *local.model;
    const VerifyConfig* verify = local.verify ? &*local.verify : nullptr;

    DepthResult depth;
    clock.run("simulate", [&] {
      std::optional<std::ofstream> snap_os, jump_os;
      std::filesystem::path snap_p = files.dir() / "snapshot_final.csv";
      std::filesystem::path jump_p = files.dir() / "jumps.csv";
      if (local.output.snapshot) snap_os.emplace(snap_p, std::ios::binary);
      if (local.output.jumps) jump_os.emplace(jump_p, std::ios::binary);
      depth = run_depth_pipeline(m, local.run, verify, local.run.particles, workers,
                                 snap_os ? &*snap_os : nullptr, jump_os ? &*jump_os : nullptr);
      // register streamed files with the manifest
      auto note = [&](const std::filesystem::path& p, const std::string& name) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream buf;
        buf << is.rdbuf();
        const std::string content = buf.str();
        manifest.files.push_back({name, content.size(), fnv1a64(content)});
      };
      if (snap_os) {
        snap_os->close();
        note(snap_p, "snapshot_final.csv");
      }
      if (jump_os) {
        jump_os->close();
        note(jump_p, "jumps.csv");
      }
    });

    if (local.output.grids) {
      clock.run("export-grids", [&] {
        files.write("grid_joint.csv", [&](std::ostream& os) { write_joint_csv(os, depth.joint); });
        files.write("grid_marginal.csv", [&](std::ostream& os) {
          write_marginal_csv(os, depth.joint.marginal());
        });
      });
    }

    if (verify) {
      clock.run("verify", [&] {
        KernelCheckParams prm;
        prm.flow_step = local.run.step;
        prm.h_div = local.run.h_div;
        prm.k_noise = verify->k_noise;
        prm.history_tol = local.run.snapshot_dt / 2;

        std::optional<DepthResult> scaled;
        if (verify->scaling_factor > 1) {
          scaled = run_depth_pipeline(
              m, local.run, verify,
              local.run.particles * static_cast<uint64_t>(verify->scaling_factor), workers);
        }

        if (verify->check_kernel) {
          ResidualReport rep = kernel_equation_check(m, depth.joint, depth.history, prm, workers);
          json rj = rep.to_json();
          if (scaled) {
            const ResidualReport big =
                kernel_equation_check(m, scaled->joint, scaled->history, prm, workers);
            detail::attach_scaling(rj, rep.l1, big.l1, verify->scaling_factor);
            rep.pass = rep.pass && rj["scaling"]["pass"].get<bool>();
          }
          result.verification_pass = result.verification_pass && rep.pass;
          rj["pass"] = rep.pass;
          rj["reproduce"] = detail::reproduce_block(manifest);
          result.reports.push_back(rep);
          if (local.output.reports)
            files.write("report_" + rep.theorem_id + ".json",
                        [&](std::ostream& os) { os << rj.dump(2) << '\n'; });
        }
        if (verify->check_continuity) {
          ResidualReport rep = continuity_residual(m, depth.pair_a, depth.pair_b,
                                                   verify->k_noise);
          json rj = rep.to_json();
          if (scaled) {
            const ResidualReport big =
                continuity_residual(m, scaled->pair_a, scaled->pair_b, verify->k_noise);
            detail::attach_scaling(rj, rep.l1, big.l1, verify->scaling_factor);
            rep.pass = rep.pass && rj["scaling"]["pass"].get<bool>();
          }
          result.verification_pass = result.verification_pass && rep.pass;
          rj["pass"] = rep.pass;
          rj["reproduce"] = detail::reproduce_block(manifest);
          result.reports.push_back(rep);
          if (local.output.reports)
            files.write("report_" + rep.theorem_id + ".json",
                        [&](std::ostream& os) { os << rj.dump(2) << '\n'; });
        }
      });
    }
  }

  if (local.breadth) {
    clock.run("breadth", [&] {
      DensityPath expected;
      BreadthReport rep = run_breadth_comparison(*local.breadth, workers, &expected);
      result.breadth = rep;
      result.verification_pass = result.verification_pass && rep.pass;
      if (local.output.reports) {
        json rj = rep.to_json();
        rj["reproduce"] = detail::reproduce_block(manifest);
        files.write("report_breadth.json",
                    [&](std::ostream& os) { os << rj.dump(2) << '\n'; });
      }
      if (local.output.breadth_path) {
        files.write("breadth_expected_path.csv",
                    [&](std::ostream& os) { write_density_path_csv(os, expected); });
        files.write("breadth_expected_path_long.csv",
                    [&](std::ostream& os) { write_density_path_long_csv(os, expected); });
      }
    });
  }
}

// ---------------------------------------------------------------------------
// Export: convert written artifacts between formats

/// Flatten a JSON document into long-format CSV rows (path,value).
inline void write_json_as_csv(std::ostream& os, const json& j) {
  os << "key,value\n";
  std::function<void(const json&, const std::string&)> walk = [&](const json& node,
                                                                  const std::string& prefix) {
    if (node.is_object()) {
      for (auto it = node.begin(); it != node.end(); ++it)
        walk(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key());
    } else if (node.is_array()) {
      for (size_t i = 0; i < node.size(); ++i)
        walk(node[i], prefix + "[" + std::to_string(i) + "]");
    } else if (node.is_number_float()) {
      os << prefix << ',' << format_g17(node.get<double>()) << '\n';
    } else {
      os << prefix << ',' << node.dump() << '\n';
    }
  };
  walk(j, "");
}

/// Convert an existing artifact: JSON reports re-emit as JSON or long CSV;
/// CSV artifacts (grids, logs, paths) pass through.
inline void export_artifact(const std::string& in_path, const std::string& format,
                            const std::string& out_path) {
  std::ifstream is(in_path, std::ios::binary);
  if (!is) throw ConfigError("export: cannot open '" + in_path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::string content = buf.str();

  const bool is_json = !content.empty() && (content[0] == '{' || content[0] == '[');
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw ConfigError("export: cannot write '" + out_path + "'");
  if (format == "json") {
    if (!is_json) throw ConfigError("export: '" + in_path + "' is not a JSON artifact");
    os << content;
  } else if (format == "csv") {
    if (is_json)
      write_json_as_csv(os, json::parse(content));
    else
      os << content;  // grid/log CSVs are already long-format
  } else {
    throw ConfigError("export: unsupported format '" + format + "' (use csv or json)");
  }
}

}  // namespace cogflow
