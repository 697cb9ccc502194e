#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bench/experiment.hpp"

namespace gthmc::bench {

struct DynamicsSpec {
  std::string label;
  std::string metric = "identity";
  double temperature = 1.0;
  double gamma = 1.0;
  Vector direction;  // empty = first axis
  std::string color = "black";
};

struct TrajectoryConfig {
  std::uint64_t seed = 0;
  nlohmann::json target_spec;
  std::filesystem::path output_dir = "bench-out";
  Vector start;                 // empty = first mode
  double start_jitter = 0.25;   // sd of the Gaussian offset from `start`
  double kinetic_energy = 0.8;
  double time = 3.0;            // physical time
  int count = 8;                // trajectories per dynamics
  int markers = 15;             // equal-time intervals
  double eps = 1e-3;            // step (physical time for HMC, rescaled otherwise)
  long max_steps = 2000000;
  std::vector<DynamicsSpec> dynamics;
};

TrajectoryConfig parse_trajectory_config(const nlohmann::json& j);
TrajectoryConfig load_trajectory_config(const std::filesystem::path& path);

struct Trajectory {
  std::string label;
  int index = 0;
  std::vector<double> t;        // physical time
  std::vector<Vector> theta;
  std::vector<Vector> markers;  // theta(t_i), t_i = i * time / n
  double initial_kinetic = 0.0;
  bool failed = false;
  bool crossed = false;         // ever reached x > 0 (first coordinate)
};

/// Integrates config.count trajectories per dynamics from jittered starts with
/// K(theta0, p0) = kinetic_energy. Start draws are shared across dynamics.
std::vector<Trajectory> simulate_trajectories(const TrajectoryConfig& config);

/// Markers with |x| < half_width over markers within half_width of either mode
/// (+-separation along x), each count per unit width.
double valley_marker_density_ratio(const std::vector<Trajectory>& trajs, double separation,
                                   double half_width = 1.0);

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);
void write_marker_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);

/// One plot per dynamics label, mode circles included for mixtures.
void plot_trajectories(const std::filesystem::path& path, const TrajectoryConfig& config,
                       const std::vector<Trajectory>& trajs, const std::string& label);

void plot_trace(const std::filesystem::path& path, const ChainRecord& chain, Eigen::Index coord,
                const std::string& title);

}  // namespace gthmc::bench
