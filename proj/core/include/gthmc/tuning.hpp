#pragma once

#include <cstdint>
#include <vector>

#include "gthmc/samplers.hpp"

namespace gthmc {

struct DualAveragingParams {
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
};

/// Dual-averaging controller on log(eps). `mu` is the shrinkage point,
/// log(10 eps_0) by default.
struct DualAveragingState {
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  double mu = 0.0;
  int m = 0;
  double delta = 0.8;
  DualAveragingParams params;

  static DualAveragingState start(double eps0, double delta, DualAveragingParams params = {});
  double step_size() const;
  double final_step_size() const;
};

/// One recursion step with the observed statistic (clamped to [0, 1]).
DualAveragingState dual_averaging_update(DualAveragingState state, double observed_stat);

struct StepSizeTuning {
  double step_size = 0.0;
  Vector theta;  // chain state after adaptation
  double mean_stat = 0.0;
  long long grad_evals = 0;
};

/// Runs `iters` transitions, adapting the kernel's step size toward its
/// tuning target; leaves the kernel at the averaged step size.
StepSizeTuning tune_step_size(Kernel& kernel, Vector theta, int iters, Rng& rng,
                              DualAveragingParams params = {});

/// Mean squared jump per gradient evaluation. `theta_before` is the state the
/// first recorded sample was generated from.
double normalized_esjd(const ChainRecord& chain, const Vector& theta_before);

struct EsjdSearch {
  double best_tau = 0.0;
  std::vector<double> tau_grid;
  std::vector<double> scores;
};

/// Pilot chain per grid point; argmax of normalized ESJD, ties to the smaller
/// tau. Pilots are seeded split_seed(seed, index).
EsjdSearch esjd_pathlength_search(const Kernel& kernel, const Vector& theta0,
                                  const std::vector<double>& tau_grid, int pilot_iters,
                                  std::uint64_t seed);

/// n points geometrically spaced on [lo, hi].
std::vector<double> log_spaced_grid(double lo, double hi, int n);

struct TuneOptions {
  int rounds = 3;
  int adapt_iters = 500;
  int pilot_iters = 200;
  std::vector<double> tau_grid;
  DualAveragingParams params;
};

struct TuneResult {
  double step_size = 0.0;
  double path_length = 0.0;
  Vector theta;
  std::vector<double> step_size_history;  // after each round
  std::vector<double> path_length_history;
};

/// `rounds` passes of (step size by dual averaging, then path length by ESJD
/// when the kernel has one). The kernel is left at the tuned values.
TuneResult alternate_tune(Kernel& kernel, const Vector& theta0, const TuneOptions& options,
                          std::uint64_t seed);

}  // namespace gthmc
