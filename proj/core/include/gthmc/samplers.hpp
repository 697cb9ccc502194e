#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gthmc/integrators.hpp"

namespace gthmc {

/// What one transition did. `tuning_stat` is the quantity dual averaging
/// drives toward the kernel's target.
struct Transition {
  bool accepted = false;
  double accept_prob = 0.0;
  double tuning_stat = 0.0;
  double energy = 0.0;  // Hamiltonian of the retained state
  int grad_evals = 0;
  int steps = 0;        // integrator steps
  int tree_depth = 0;
  bool max_depth_hit = false;
  bool failed = false;  // step failure or truncation
};

struct ChainRecord {
  std::vector<Vector> samples;
  std::vector<bool> accept_flags;
  std::vector<double> energies;
  std::vector<int> grad_evals;  // per recorded iteration
  long long grad_eval_total = 0;
  long long burn_in_grad_evals = 0;
  int failures = 0;
  std::uint64_t seed = 0;
  std::string kernel_name;

  std::size_t size() const { return samples.size(); }
  void append(const Vector& theta, const Transition& t);
  double accept_rate() const;
};

/// Random-per-iteration draws a fresh uniform unit vector before each momentum
/// refresh; Fixed keeps the metric's own direction.
enum class DirectionPolicy { Fixed, RandomPerIteration };

Vector random_unit_vector(Rng& rng, Eigen::Index dim);

// Stateless single transitions. `theta` is updated in place; reject = unchanged.

Transition hmc_iteration(const Target& target, double eps, int n_steps, Vector& theta,
                         Rng& rng);

Transition nuts_iteration(const Target& target, double eps, Vector& theta, Rng& rng,
                          int max_depth = 10);

Transition chmc_iteration(const TemperedMetric& m, double eps, int n_steps, Vector& theta,
                          Rng& rng);

Transition mmala_iteration(const TemperedMetric& m, double eps_l, Vector& theta, Rng& rng);

/// Energy increase beyond which a NUTS leaf counts as divergent.
inline constexpr double kNutsDivergence = 1000.0;

/// Full NUTS trajectory for a given sequence of doubling directions (+1/-1).
/// Deterministic apart from which state gets selected, so it can be replayed
/// from any member state.
struct NutsTrajectory {
  std::vector<Vector> theta;        // left to right in integration time
  std::vector<Vector> p;
  std::vector<double> log_weight;   // -H
  int origin = 0;                   // index of the initial state
  int depth = 0;                    // completed doublings
  bool u_turn = false;
  bool divergent = false;
};

NutsTrajectory build_nuts_trajectory(const Target& target, double eps, const Vector& theta0,
                                     const Vector& p0, const std::vector<int>& directions,
                                     int max_depth = 10);

/// Smallest n with tau < sum_{i<=n} eps (eta_{i-1} + eta_i) / 2, or n_max + 1
/// if not reached within n_max steps.
int vlt_step_count(const TemperedMetric& m, const Vector& theta0, const Vector& v0,
                   double eps, double tau, int n_max = 10000);

/// Bookkeeping of one VLT-CHMC transition. Orbit indices are relative to the
/// starting state (z_i = F^i z_0, negative i from integrating R z_0).
struct VltSets {
  int forward_step_count = 0;   // N
  int backward_step_count = 0;  // steps integrated from R z_0
  int s_begin = 0, s_end = 0;            // S = {z_i : s_begin <= i <= s_end}
  int s_star_begin = 0, s_star_end = 0;  // S* = {R z_j : ...}
  int total_steps = 0;
  double eta0 = 1.0;
  double eta_star = 1.0;  // eta at z_N
  double log_weight_s = 0.0;
  double log_weight_s_star = 0.0;
  double accept_prob = 0.0;
  bool truncated = false;
  bool verified = false;
  bool inclusions_hold = true;
};

struct VltOptions {
  int n_max = 10000;
  bool verify = false;  // re-integrate every state of S, S* and their boundary
};

Transition vlt_chmc_iteration(const TemperedMetric& m, double eps, double tau,
                              Vector& theta, Rng& rng, const VltOptions& options = {},
                              VltSets* sets = nullptr);

/// Same transition from a given starting velocity (no randomness except the
/// accept draw and the choice within S*).
Transition vlt_chmc_from(const TemperedMetric& m, const MetricPoint& pt0, const Vector& v0,
                         double eps, double tau, Vector& theta, Rng& rng,
                         const VltOptions& options, VltSets* sets,
                         MetricPoint* selected = nullptr);

/// Markov kernel with tunable step size (and path length where it applies).
class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual std::string name() const = 0;
  virtual Transition transition(Vector& theta, Rng& rng) = 0;
  virtual std::unique_ptr<Kernel> clone() const = 0;
  virtual const Target& target() const = 0;

  double step_size() const { return eps_; }
  void set_step_size(double eps);
  virtual bool uses_path_length() const { return false; }
  double path_length() const { return tau_; }
  void set_path_length(double tau);
  /// Target value of Transition::tuning_stat for dual averaging.
  double tuning_target() const { return delta_; }
  void set_tuning_target(double delta);

 protected:
  Kernel(double eps, double tau, double delta);

  double eps_;
  double tau_;
  double delta_;
};

using KernelPtr = std::unique_ptr<Kernel>;

/// Number of leapfrog / adaptive steps used for path length tau.
int steps_for_path_length(double tau, double eps);

class HmcKernel final : public Kernel {
 public:
  HmcKernel(TargetPtr target, double eps, double tau, double delta = 0.8);
  std::string name() const override { return "hmc"; }
  Transition transition(Vector& theta, Rng& rng) override;
  std::unique_ptr<Kernel> clone() const override;
  const Target& target() const override { return *target_; }
  bool uses_path_length() const override { return true; }

 private:
  TargetPtr target_;
  std::optional<LeapfrogState> cache_;
};

class NutsKernel final : public Kernel {
 public:
  NutsKernel(TargetPtr target, double eps, double delta = 0.8, int max_depth = 10);
  std::string name() const override { return "nuts"; }
  Transition transition(Vector& theta, Rng& rng) override;
  std::unique_ptr<Kernel> clone() const override;
  const Target& target() const override { return *target_; }
  int max_depth() const { return max_depth_; }

 private:
  TargetPtr target_;
  int max_depth_;
  std::optional<LeapfrogState> cache_;
};

/// Shared by the tempered kernels.
class TemperedKernel : public Kernel {
 public:
  const Target& target() const override { return metric_.target(); }
  const TemperedMetric& metric() const { return metric_; }
  DirectionPolicy direction_policy() const { return policy_; }

 protected:
  TemperedKernel(TemperedMetric metric, DirectionPolicy policy, double eps, double tau,
                 double delta);
  /// Metric for this iteration (fresh direction under RandomPerIteration).
  TemperedMetric iteration_metric(Rng& rng) const;
  const MetricPoint& point_at(const TemperedMetric& m, const Vector& theta, int& grads);

  TemperedMetric metric_;
  DirectionPolicy policy_;
  std::optional<MetricPoint> cache_;
};

class ChmcKernel final : public TemperedKernel {
 public:
  ChmcKernel(TemperedMetric metric, double eps, double tau,
             DirectionPolicy policy = DirectionPolicy::Fixed, double delta = 0.9);
  std::string name() const override { return "chmc"; }
  Transition transition(Vector& theta, Rng& rng) override;
  std::unique_ptr<Kernel> clone() const override;
  bool uses_path_length() const override { return true; }
};

class VltChmcKernel final : public TemperedKernel {
 public:
  VltChmcKernel(TemperedMetric metric, double eps, double tau,
                DirectionPolicy policy = DirectionPolicy::Fixed, double delta = 0.9,
                VltOptions options = {});
  std::string name() const override { return "vlt-chmc"; }
  Transition transition(Vector& theta, Rng& rng) override;
  std::unique_ptr<Kernel> clone() const override;
  bool uses_path_length() const override { return true; }
  const VltSets& last_sets() const { return last_; }
  int verification_failures() const { return verify_failures_; }

 private:
  VltOptions options_;
  VltSets last_;
  int verify_failures_ = 0;
};

class MmalaKernel final : public TemperedKernel {
 public:
  MmalaKernel(TemperedMetric metric, double eps, double delta = 0.574);
  std::string name() const override { return "mmala"; }
  Transition transition(Vector& theta, Rng& rng) override;
  std::unique_ptr<Kernel> clone() const override;
};

/// Runs burn_in unrecorded then n_samples recorded transitions with an RNG
/// seeded from `seed`.
ChainRecord run_chain(Kernel& kernel, Vector theta0, int n_samples, int burn_in,
                      std::uint64_t seed);

}  // namespace gthmc
