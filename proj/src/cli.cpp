#include "eslab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eslab/common.hpp"
#include "eslab/io.hpp"
#include "eslab/verify.hpp"

namespace eslab {

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitError = 2;

struct CommonOptions {
  std::string scenario;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon;
  std::optional<long> steps;
  std::optional<long> cells;
  std::optional<long> particles;
  std::optional<double> temperature;
  std::optional<std::string> backend;
  std::optional<double> tol_esl;
  std::optional<double> tol_diss;
  std::optional<int> workers;
};

void add_common_options(CLI::App* cmd, CommonOptions& opts, bool scenario_needed) {
  auto* scenario = cmd->add_option("--scenario", opts.scenario, "preset scenario name");
  auto* config = cmd->add_option("--config", opts.config_path, "scenario config or manifest JSON");
  if (scenario_needed) {
    scenario->excludes(config);
  }
  cmd->add_option("--out", opts.out_dir, "output directory")->required();
  cmd->add_option("--seed", opts.seed, "random seed override");
  cmd->add_option("--horizon", opts.horizon, "physical horizon override");
  cmd->add_option("--steps", opts.steps, "integrator steps override (0 = derive)");
  cmd->add_option("--cells", opts.cells, "grid cells per axis override");
  cmd->add_option("--particles", opts.particles, "particle count override");
  cmd->add_option("--temperature", opts.temperature, "temperature override");
  cmd->add_option("--backend", opts.backend, "transport backend override");
  cmd->add_option("--tol-esl", opts.tol_esl, "speed-limit slack tolerance override");
  cmd->add_option("--tol-diss", opts.tol_diss, "dissipation residual tolerance override");
  cmd->add_option("--workers", opts.workers, "worker threads");
}

ScenarioConfig resolve_config(const CommonOptions& opts) {
  ScenarioConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = scenario_from_json(Json::parse(read_file(opts.config_path)));
  } else if (!opts.scenario.empty()) {
    cfg = preset(opts.scenario);
  } else {
    throw InputError("pass --scenario <name> or --config <file>");
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.horizon) cfg.horizon = *opts.horizon;
  if (opts.steps) cfg.steps = *opts.steps;
  if (opts.cells) {
    for (long& c : cfg.cells) c = *opts.cells;
  }
  if (opts.particles) cfg.particles = *opts.particles;
  if (opts.temperature) cfg.temperature = *opts.temperature;
  if (opts.backend) cfg.backend = *opts.backend;
  if (opts.tol_esl) {
    cfg.tolerances.esl_closed_form = *opts.tol_esl;
    cfg.tolerances.esl_grid = *opts.tol_esl;
  }
  if (opts.tol_diss) {
    cfg.tolerances.dissipation_closed_form = *opts.tol_diss;
    cfg.tolerances.dissipation_grid = *opts.tol_diss;
  }
  if (opts.workers) cfg.workers = *opts.workers;
  cfg.validate();
  return cfg;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Buffered output set: nothing touches the disk until the run succeeded.
struct OutputSet {
  std::vector<std::pair<std::string, std::string>> files;
  void add(const std::string& path, const std::string& content) {
    files.emplace_back(path, content);
  }
  void flush() const {
    for (const auto& [path, content] : files) write_file(path, content);
  }
};

int cmd_presets() {
  for (const std::string& name : preset_names()) {
    const ScenarioConfig cfg = preset(name);
    std::printf("%-18s carrier=%-9s potential=%s\n", name.c_str(),
                carrier_name(cfg.carrier).c_str(), cfg.potential.kind_name().c_str());
  }
  return kExitPass;
}

int cmd_simulate(const CommonOptions& opts, bool dump_snapshots) {
  const ScenarioConfig cfg = resolve_config(opts);

  TrajectoryRecord traj;
  std::optional<DissipationLedger> ledger;
  switch (cfg.carrier) {
    case Carrier::Grid: {
      GaussianDensity g0;
      g0.mean = cfg.mean0;
      g0.covariance = cfg.cov0;
      GridDensity grid0 = grid_from_gaussian(g0, cfg.domain, cfg.cells);
      Schedule sched;
      sched.horizon = cfg.horizon;
      sched.steps = cfg.steps > 0
                        ? cfg.steps
                        : static_cast<long>(
                              std::ceil(cfg.horizon /
                                        cfl_time_step(grid0, cfg.potential, cfg.temperature)));
      sched.record_every = cfg.record_every > 0 ? cfg.record_every
                                                : std::max<long>(1, sched.steps / 256);
      traj = simulate_fp(grid0, cfg.potential, cfg.temperature, sched, cfg.flux);
      ledger = accumulate_sigma(traj);
      break;
    }
    case Carrier::Particle: {
      GaussianDensity g0;
      g0.mean = cfg.mean0;
      g0.covariance = cfg.cov0;
      const ParticleEnsemble e0 = sample(g0, cfg.particles, cfg.seed);
      Schedule sched;
      sched.horizon = cfg.horizon;
      sched.steps = cfg.steps > 0 ? cfg.steps : 1000;
      sched.record_every = cfg.record_every > 0 ? cfg.record_every
                                                : std::max<long>(1, sched.steps / 256);
      traj = simulate_langevin(e0, cfg.potential, cfg.temperature, sched, cfg.seed, cfg.workers);
      break;
    }
    case Carrier::GaussianClosedForm: {
      GaussianDensity g0;
      g0.mean = cfg.mean0;
      g0.covariance = cfg.cov0;
      Schedule sched;
      sched.horizon = cfg.horizon;
      sched.steps = cfg.steps > 0 ? cfg.steps : 512;
      sched.record_every = cfg.record_every > 0 ? cfg.record_every : 8;
      traj = ou_closed_form_trajectory(g0, cfg.potential, cfg.temperature, sched);
      ledger = gaussian_ou_ledger(g0, cfg.potential, cfg.temperature, cfg.horizon);
      break;
    }
    case Carrier::Geodesic:
      throw InputError("simulate: geodesic scenarios carry no dynamics; use verify");
  }

  // Manifest carries the fully resolved configuration: steps/record_every as
  // actually used, so a rerun reproduces every byte.
  ScenarioConfig resolved = cfg;
  resolved.steps = traj.schedule.steps;
  resolved.record_every = traj.schedule.record_every;

  OutputSet out;
  Json manifest = scenario_to_json(resolved);
  manifest["command"] = "simulate";
  out.add(join_path(opts.out_dir, "manifest.json"), manifest.dump(2) + "\n");
  out.add(join_path(opts.out_dir, "trajectory.csv"), trajectory_to_csv(traj));
  if (ledger) {
    out.add(join_path(opts.out_dir, "ledger.json"), ledger_to_json(*ledger).dump(2) + "\n");
  }

  const DensityState& last = traj.snapshots.back();
  if (const auto* grid = std::get_if<GridDensity>(&last)) {
    out.add(join_path(opts.out_dir, "final_density.json"), grid_header_to_json(*grid).dump(2) + "\n");
    out.add(join_path(opts.out_dir, "final_density.csv"), grid_values_to_csv(*grid));
  } else if (const auto* pts = std::get_if<ParticleEnsemble>(&last)) {
    out.add(join_path(opts.out_dir, "final_density.csv"), particles_to_csv(*pts));
  } else {
    out.add(join_path(opts.out_dir, "final_density.json"),
            gaussian_to_json(std::get<GaussianDensity>(last)).dump(2) + "\n");
  }
  if (dump_snapshots) {
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
      char name[48];
      std::snprintf(name, sizeof(name), "snapshot_%04zu", k);
      const DensityState& snap = traj.snapshots[k];
      if (const auto* grid = std::get_if<GridDensity>(&snap)) {
        out.add(join_path(opts.out_dir, std::string(name) + ".json"),
                grid_header_to_json(*grid).dump(2) + "\n");
        out.add(join_path(opts.out_dir, std::string(name) + ".csv"), grid_values_to_csv(*grid));
      } else if (const auto* pts = std::get_if<ParticleEnsemble>(&snap)) {
        out.add(join_path(opts.out_dir, std::string(name) + ".csv"), particles_to_csv(*pts));
      } else {
        out.add(join_path(opts.out_dir, std::string(name) + ".json"),
                gaussian_to_json(std::get<GaussianDensity>(snap)).dump(2) + "\n");
      }
    }
  }
  out.flush();
  std::printf("simulate %s: wrote %zu files to %s\n", cfg.name.c_str(), out.files.size(),
              opts.out_dir.c_str());
  return kExitPass;
}

void print_report_line(const EslReport& r) {
  const auto flag = [](const CheckResult& c) {
    return !c.applicable ? "-" : (c.pass ? "pass" : "FAIL");
  };
  std::printf(
      "%-18s Sigma=%-12.6g W2^2=%-12.6g slack=%-12.6g | dissipation=%s esl=%s objective=%s "
      "scaling=%s tightness=%s\n",
      r.scenario.c_str(), r.sigma_total, r.w2_squared, r.slack, flag(r.dissipation), flag(r.esl),
      flag(r.objective), flag(r.scaling), flag(r.tightness));
}

int cmd_verify(const CommonOptions& opts) {
  std::vector<ScenarioConfig> configs;
  if (opts.scenario == "all" || (opts.scenario.empty() && opts.config_path.empty())) {
    CommonOptions each = opts;
    for (const std::string& name : preset_names()) {
      each.scenario = name;
      configs.push_back(resolve_config(each));
    }
  } else {
    configs.push_back(resolve_config(opts));
  }

  bool all_pass = true;
  OutputSet out;
  for (const ScenarioConfig& cfg : configs) {
    const ScenarioRun run = run_scenario(cfg);
    print_report_line(run.report);
    all_pass = all_pass && run.report.all_pass();
    out.add(join_path(opts.out_dir, "report_" + cfg.name + ".json"),
            report_to_json(run.report).dump(2) + "\n");
  }
  out.flush();
  return all_pass ? kExitPass : kExitCheckFailure;
}

int cmd_transport(const std::string& file_a, const std::string& file_b,
                  const std::string& backend, const std::string& out_dir) {
  const DensityState a = load_density(file_a);
  const DensityState b = load_density(file_b);

  double distance = 0.0;
  std::optional<TransportPlan> plan;
  if (backend == "auto") {
    distance = w2_auto(a, b).first;
  } else if (backend == "gaussian") {
    distance = w2_gaussian(std::get<GaussianDensity>(a), std::get<GaussianDensity>(b));
  } else if (backend == "quantile") {
    distance = w2_1d(a, b);
  } else if (backend == "exact") {
    auto [d, p] = w2_discrete_exact(std::get<ParticleEnsemble>(a), std::get<ParticleEnsemble>(b));
    distance = d;
    plan = std::move(p);
  } else if (backend == "sinkhorn") {
    const auto& ea = std::get<ParticleEnsemble>(a);
    const auto& eb = std::get<ParticleEnsemble>(b);
    const SinkhornResult res =
        sinkhorn(ea.positions, ea.weights, eb.positions, eb.weights, 1e-3);
    distance = std::sqrt(std::max(res.cost, 0.0));
    plan = res.plan;
  } else {
    throw InputError("transport: unknown backend '" + backend + "'");
  }

  std::printf("%s\n", fmt_double(distance).c_str());
  if (plan && !out_dir.empty()) {
    write_file(join_path(out_dir, "plan.csv"), plan_to_csv(*plan));
  }
  return kExitPass;
}

int cmd_sweep(const CommonOptions& opts, const std::vector<double>& horizons) {
  const ScenarioConfig cfg = resolve_config(opts);
  if (horizons.empty()) throw InputError("sweep: pass at least one --horizon");
  const std::vector<SweepRow> rows = check_time_scaling(cfg, horizons);

  double ref = rows.front().sigma_physical_times_horizon;
  double spread = 0.0;
  bool rows_pass = true;
  for (const SweepRow& row : rows) {
    spread = std::max(spread, std::abs(row.sigma_physical_times_horizon - ref) /
                                  std::max(1.0, std::abs(ref)));
    rows_pass = rows_pass && row.pass;
  }
  const double tol = cfg.carrier == Carrier::Grid ? cfg.tolerances.scaling_grid
                                                  : cfg.tolerances.scaling_closed_form;

  OutputSet out;
  out.add(join_path(opts.out_dir, "sweep.csv"), sweep_to_csv(rows));
  out.flush();
  std::printf("sweep %s: %zu horizons, action x horizon spread %s (tol %s)\n", cfg.name.c_str(),
              rows.size(), fmt_double(spread).c_str(), fmt_double(tol).c_str());
  return (rows_pass && spread <= tol) ? kExitPass : kExitCheckFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"ensemble learning dynamics: transport costs, dissipation, and speed-limit checks"};
  app.require_subcommand(1);

  CommonOptions sim_opts;
  bool dump_snapshots = false;
  auto* sim = app.add_subcommand("simulate", "run a scenario and write trajectory files");
  add_common_options(sim, sim_opts, true);
  sim->add_flag("--snapshots", dump_snapshots, "write every recorded density snapshot");

  CommonOptions verify_opts;
  auto* verify = app.add_subcommand("verify", "run scenario checks and write reports");
  add_common_options(verify, verify_opts, false);

  std::string file_a, file_b, transport_backend = "auto", transport_out;
  auto* transport = app.add_subcommand("transport", "distance between two density files");
  transport->add_option("file_a", file_a, "first density file")->required();
  transport->add_option("file_b", file_b, "second density file")->required();
  transport->add_option("--backend", transport_backend, "gaussian|quantile|exact|sinkhorn|auto");
  transport->add_option("--out", transport_out, "directory for the plan CSV");

  CommonOptions sweep_opts;
  std::vector<double> horizons;
  auto* sweep = app.add_subcommand("sweep", "horizon scaling table for a fixed path");
  add_common_options(sweep, sweep_opts, false);
  sweep->add_option("--horizon", horizons, "horizon (repeatable)");

  auto* presets_cmd = app.add_subcommand("presets", "list built-in scenarios");

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(sim_opts, dump_snapshots);
    if (verify->parsed()) return cmd_verify(verify_opts);
    if (transport->parsed()) {
      return cmd_transport(file_a, file_b, transport_backend, transport_out);
    }
    if (sweep->parsed()) return cmd_sweep(sweep_opts, horizons);
    if (presets_cmd->parsed()) return cmd_presets();
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitError;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}

}  // namespace eslab
