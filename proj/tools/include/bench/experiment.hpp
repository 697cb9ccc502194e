#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gthmc/gthmc.hpp"

namespace gthmc::bench {

/// Bad or inconsistent configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A target plus the exact moments ESS needs.
struct TargetSetup {
  std::string key;
  TargetPtr target;
  Vector true_mean;
  Vector true_var;
  std::optional<double> radial_mean;  // shell targets only
};

TargetSetup make_target(const nlohmann::json& spec);

struct KernelSpec {
  std::string label;
  std::string kernel;              // hmc | nuts | chmc | vlt-chmc | mmala
  std::string metric = "identity"; // identity | isometric | directional
  double gamma = 1.0;
  Vector direction;                // empty = first axis
  bool random_direction = false;
  double eps = 0.1;
  double tau = 1.0;
  int max_depth = 10;
  VltOptions vlt;
};

/// One grid cell: a kernel at one temperature and one tuning target.
struct CellSpec {
  KernelSpec kernel;
  double temperature = 1.0;
  double delta = 0.8;
};

struct TuningSpec {
  bool enabled = true;
  TuneOptions options;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  nlohmann::json target_spec;
  int n_samples = 10000;
  int burn_in = 1000;
  std::filesystem::path output_dir = "bench-out";
  int workers = 0;  // 0 = hardware concurrency
  double gradient_budget = 0.0;
  bool radial = false;
  bool save_chains = false;
  TuningSpec tuning;
  std::vector<CellSpec> cells;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// GTHMC_OUTPUT_DIR, if set, replaces the configured output directory.
std::filesystem::path resolve_output_dir(const std::filesystem::path& configured);

struct CellResult {
  std::size_t index = 0;
  std::string label;
  std::string kernel;
  std::string metric;
  double temperature = 1.0;
  double gamma = 0.0;
  double delta = 0.0;
  double step_size = 0.0;
  double path_length = 0.0;
  EssReport ess;
  double radial_ess_per_100 = -1.0;
  double radial_ess_per_budget = -1.0;
  double accept_rate = 0.0;
  double failure_rate = 0.0;
  std::uint64_t seed = 0;
  ChainRecord chain;  // kept only when chains are saved
};

KernelPtr make_kernel(const TargetSetup& target, const CellSpec& cell);

/// Tune (unless disabled), sample and diagnose one cell. Seeded by
/// split_seed(config.seed, index), so the result does not depend on which
/// worker runs it.
CellResult run_cell(const ExperimentConfig& config, const TargetSetup& target,
                    const CellSpec& cell, std::size_t index, bool keep_chain);

using ProgressFn = std::function<void(const CellResult&)>;

/// Runs every cell on a worker pool; results come back in config order.
std::vector<CellResult> run_experiment(const ExperimentConfig& config,
                                       const ProgressFn& progress = {});

/// Column order of the results table.
const std::vector<std::string>& result_columns();
void write_results_csv(const std::filesystem::path& path, const std::vector<CellResult>& rows);

void write_chain_csv(const std::filesystem::path& path, const ChainRecord& chain);
/// Samples only; accept flags and energies are restored when present.
ChainRecord read_chain_csv(const std::filesystem::path& path);

/// Number of times the coordinate changes sign along the chain.
int sign_changes(const ChainRecord& chain, Eigen::Index coord);

}  // namespace gthmc::bench
