#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "bench/experiment.hpp"
#include "bench/trajectories.hpp"

namespace fs = std::filesystem;
using namespace gthmc::bench;

namespace {

constexpr int kOk = 0, kRuntime = 1, kConfig = 2;

int cmd_run(const fs::path& config_path, bool quiet) {
  ExperimentConfig config = load_config(config_path);
  config.output_dir = resolve_output_dir(config.output_dir);
  fs::create_directories(config.output_dir);
  const std::string stem = config.name.empty() ? config_path.stem().string() : config.name;

  const auto rows = run_experiment(config, [&](const CellResult& r) {
    if (!quiet) {
      std::fprintf(stderr, "[%zu] %s T=%g delta=%g: min ess/100 %.4g, accept %.3f\n", r.index,
                   r.label.c_str(), r.temperature, r.delta, r.ess.ess_per_100_samples,
                   r.accept_rate);
    }
  });
  int warnings = 0;
  for (const CellResult& r : rows) {
    if (r.failure_rate > 0.5) {
      std::printf("warning: cell %zu (%s, T=%g) step failures in %.0f%% of iterations\n", r.index,
                  r.label.c_str(), r.temperature, 100.0 * r.failure_rate);
      ++warnings;
    }
    if (config.save_chains) {
      write_chain_csv(config.output_dir / (stem + "_chain" + std::to_string(r.index) + ".csv"),
                      r.chain);
    }
  }
  const fs::path out = config.output_dir / (stem + ".csv");
  write_results_csv(out, rows);
  std::printf("%zu cells -> %s\n", rows.size(), out.string().c_str());
  return kOk;
}

int cmd_trajectories(const fs::path& config_path) {
  TrajectoryConfig config = load_trajectory_config(config_path);
  config.output_dir = resolve_output_dir(config.output_dir);
  fs::create_directories(config.output_dir);
  const auto trajs = simulate_trajectories(config);
  write_trajectory_csv(config.output_dir / "trajectories.csv", trajs);
  write_marker_csv(config.output_dir / "markers.csv", trajs);
  if (config.dynamics.empty()) {
    plot_trajectories(config.output_dir / "trajectories.svg", config, trajs, "");
  }
  for (const DynamicsSpec& d : config.dynamics) {
    int crossed = 0, failed = 0, n = 0;
    for (const Trajectory& t : trajs) {
      if (t.label != d.label) continue;
      ++n;
      crossed += t.crossed;
      failed += t.failed;
    }
    plot_trajectories(config.output_dir / ("trajectories_" + d.label + ".svg"), config, trajs,
                      d.label);
    std::printf("%s: %d/%d crossed%s\n", d.label.c_str(), crossed, n,
                failed ? (", " + std::to_string(failed) + " failed").c_str() : "");
  }
  return kOk;
}

int cmd_trace(const fs::path& chain_path, int coord, fs::path out) {
  const gthmc::ChainRecord chain = read_chain_csv(chain_path);
  if (coord < 0 || chain.samples.empty() || coord >= chain.samples.front().size()) {
    throw ConfigError("--coord out of range for " + chain_path.string());
  }
  if (out.empty()) {
    out = resolve_output_dir(chain_path.parent_path()) /
          (chain_path.stem().string() + "_trace" + std::to_string(coord) + ".svg");
  }
  plot_trace(out, chain, coord, chain_path.stem().string());
  std::printf("%d sign changes -> %s\n", sign_changes(chain, coord), out.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampler benchmark runner"};
  app.require_subcommand(1);

  std::string run_config, traj_config, chain_file, trace_out;
  int coord = 0;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run an experiment grid and write a results CSV");
  run->add_option("config", run_config, "experiment config (JSON)")->required();
  run->add_flag("-q,--quiet", quiet, "no per-cell progress");
  auto* traj = app.add_subcommand("trajectories", "simulate and plot 2-d trajectories");
  traj->add_option("config", traj_config, "trajectory config (JSON)")->required();
  auto* trace = app.add_subcommand("trace", "traceplot of one coordinate of a saved chain");
  trace->add_option("chain", chain_file, "chain CSV written by `bench run`")->required();
  trace->add_option("--coord", coord, "coordinate index (0-based)")->required();
  trace->add_option("--out", trace_out, "output SVG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(run_config, quiet);
    if (*traj) return cmd_trajectories(traj_config);
    if (*trace) return cmd_trace(chain_file, coord, trace_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
