#pragma once

#include <vector>

#include "gthmc/metrics.hpp"

namespace gthmc {

/// Position, momentum and the cached log density / gradient at the position.
struct LeapfrogState {
  Vector theta;
  Vector p;
  double log_pi = 0.0;
  Vector grad_log_pi;
};

LeapfrogState make_leapfrog_state(const Target& target, Vector theta, Vector p);

/// Half kick, drift, half kick for H = -log pi + |p|^2 / 2. One gradient
/// evaluation (the one at the new position).
LeapfrogState leapfrog_step(const Target& target, const LeapfrogState& s, double eps);

/// Uncached form; costs two gradient evaluations.
PhaseState leapfrog_step(const Target& target, const Vector& theta, const Vector& p,
                         double eps);

struct IntegratorStepResult {
  PhaseState state1;  // velocity representation
  MetricPoint point1;
  double log_jacobian = 0.0;
  int grad_evals = 0;
};

/// One step of the explicit reversible integrator for the time-rescaled
/// dynamics with potential -log(pi)/T. The cached form reuses `pt0` and costs
/// one gradient evaluation.
IntegratorStepResult adaptive_step(const TemperedMetric& m, const MetricPoint& pt0,
                                   const Vector& v0, double eps);
IntegratorStepResult adaptive_step(const TemperedMetric& m, const Vector& theta0,
                                   const Vector& v0, double eps);

/// Velocity half kick at a fixed position; returns v* and adds the
/// log-Jacobian of v -> v* to `log_jacobian`.
Vector half_kick(const TemperedMetric& m, const MetricPoint& pt, const Vector& v,
                 double eps, double& log_jacobian);

struct PathResult {
  std::vector<PhaseState> trajectory;  // n_steps + 1 states if kept, else empty
  std::vector<double> log_pi;          // along the trajectory, if kept
  PhaseState final_state;
  MetricPoint final_point;
  double total_log_jacobian = 0.0;
  int grad_evals = 0;
};

/// Thrown by integrate_path; `step` is the 0-based index of the failing step.
class PathStepFailure : public StepFailure {
 public:
  PathStepFailure(int step, const std::string& what);
  int step() const { return step_; }

 private:
  int step_;
};

PathResult integrate_path(const TemperedMetric& m, const Vector& theta0, const Vector& v0,
                          double eps, int n_steps, bool keep_trajectory = false);

/// Leapfrog for H = U(theta) + p^T M^{-1} p / 2 with a constant mass matrix.
struct MassLeapfrogPath {
  std::vector<Vector> theta;
  std::vector<Vector> p;
};
MassLeapfrogPath leapfrog_path_with_mass(const Target& target, const Matrix& inverse_mass,
                                         const Vector& theta0, const Vector& p0,
                                         double eps, int n_steps);

/// Runs identity-mass leapfrog on pi(Sigma^{1/2} x) from (Sigma^{-1/2} theta0,
/// Sigma^{1/2} p0) and leapfrog with G = Sigma^{-1} on pi from (theta0, p0),
/// maps the former back and returns the largest coordinate difference.
double reparametrization_check(const Matrix& sigma, const TargetPtr& target,
                               const Vector& theta0, const Vector& p0, double eps,
                               int n_steps);

/// pi(A x) for a fixed linear map A.
class LinearPullback final : public Target {
 public:
  LinearPullback(TargetPtr base, Matrix map);
  Eigen::Index dim() const override { return map_.cols(); }
  std::string name() const override { return base_->name() + "-pullback"; }
  double log_density_and_grad(const Vector& x, Vector& grad) const override;

 private:
  TargetPtr base_;
  Matrix map_;
};

}  // namespace gthmc
