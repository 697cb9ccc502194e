#pragma once

#include <vector>

#include <Eigen/LU>

#include "gthmc/targets.hpp"
#include "gthmc/types.hpp"

namespace gthmc {

enum class MetricKind { Identity, Isometric, Directional };

const char* to_string(MetricKind kind);

/// Position-dependent mass matrix of the geometrically tempered family
///
///   G(theta) = g_perp(theta) I + (g_par(theta) - g_perp(theta)) u u^T,
///   g_par  = pi(theta)^(2 gamma (1 - 1/T)),
///   g_perp = pi(theta)^(2 (1 - gamma) / (d - 1) (1 - 1/T)),
///
/// with time rescaling eta = sqrt(g_par). The isometric metric is the case
/// g_par = g_perp = pi^((2/d)(1 - 1/T)); the identity metric is T = 1.
/// All proportionality constants are 1, so |G|^(1/2) = pi^(1 - 1/T) exactly.
/// Scalar fields are held in log space.
class TemperedMetric {
 public:
  static TemperedMetric identity(TargetPtr target);
  static TemperedMetric isometric(TargetPtr target, double temperature);
  static TemperedMetric directional(TargetPtr target, double temperature,
                                    double gamma, Vector direction);

  MetricKind kind() const { return kind_; }
  double temperature() const { return temperature_; }
  double gamma() const { return gamma_; }
  const Vector& direction() const { return direction_; }
  const Target& target() const { return *target_; }
  const TargetPtr& target_ptr() const { return target_; }
  Eigen::Index dim() const { return target_->dim(); }

  /// log g_par = exponent_parallel() * log pi, same for perp.
  double exponent_parallel() const { return exp_par_; }
  double exponent_perp() const { return exp_perp_; }
  bool is_flat() const { return exp_par_ == 0.0 && exp_perp_ == 0.0; }

  /// Same metric with a different tempering direction (normalized here).
  TemperedMetric with_direction(Vector direction) const;

 private:
  TemperedMetric(TargetPtr target, MetricKind kind, double temperature,
                 double gamma, Vector direction);

  TargetPtr target_;
  MetricKind kind_;
  double temperature_;
  double gamma_;
  Vector direction_;
  double exp_par_;
  double exp_perp_;
};

/// Everything the integrator needs at one position; building one costs
/// exactly one gradient evaluation.
struct MetricPoint {
  Vector theta;
  double log_pi = 0.0;
  Vector grad_log_pi;
  double log_g_par = 0.0;
  double log_g_perp = 0.0;

  /// g_par / g_perp
  double ratio() const;
  double log_eta() const { return 0.5 * log_g_par; }
  double eta() const;
};

/// Throws TemperingSingularity if pi(theta) = 0 under a tempered metric and
/// StepFailure if the gradient is not finite.
MetricPoint evaluate(const TemperedMetric& m, const Vector& theta);

struct MetricScalars {
  double log_g_par;
  double log_g_perp;
  double log_pi;
  double g_par() const;
  double g_perp() const;
};

MetricScalars metric_scalars(const TemperedMetric& m, const Vector& theta);

/// log |G(theta)|
double log_det_metric(const TemperedMetric& m, const MetricPoint& pt);
Matrix dense_metric(const TemperedMetric& m, const MetricPoint& pt);

Vector apply_metric(const TemperedMetric& m, const MetricPoint& pt, const Vector& x);
Vector apply_inverse_metric(const TemperedMetric& m, const MetricPoint& pt, const Vector& x);
/// eta^2 G^{-1} x, the preconditioner in front of the force.
Vector apply_eta2_inverse_metric(const TemperedMetric& m, const MetricPoint& pt,
                                 const Vector& x);

/// p ~ N(0, G(theta)).
Vector sample_momentum(const TemperedMetric& m, const MetricPoint& pt, Rng& rng);
Vector sample_momentum(const TemperedMetric& m, const Vector& theta, Rng& rng);

double kinetic_energy(const TemperedMetric& m, const MetricPoint& pt, const Vector& p);
double kinetic_energy(const TemperedMetric& m, const Vector& theta, const Vector& p);
/// Same quantity written in the velocity variable v = eta G^{-1} p.
double kinetic_energy_velocity(const TemperedMetric& m, const MetricPoint& pt,
                               const Vector& v);

double eta(const TemperedMetric& m, const Vector& theta);

/// H(theta, p) = -log pi + 1/2 log|G| + 1/2 p^T G^{-1} p.
double hamiltonian(const TemperedMetric& m, const MetricPoint& pt, const Vector& p);

/// log density of (theta, v) under the augmented target, including the
/// |dp/dv| = |G| / eta^d change of variables.
double log_joint_velocity(const TemperedMetric& m, const MetricPoint& pt,
                          const Vector& v);

enum class Representation { Momentum, Velocity };

struct PhaseState {
  Vector theta;
  Vector conjugate;
  Representation representation = Representation::Momentum;
};

/// v = eta G^{-1} p and its inverse.
Vector momentum_to_velocity(const TemperedMetric& m, const MetricPoint& pt, const Vector& p);
Vector velocity_to_momentum(const TemperedMetric& m, const MetricPoint& pt, const Vector& v);
PhaseState to_velocity(const TemperedMetric& m, const MetricPoint& pt, const PhaseState& s);
PhaseState to_momentum(const TemperedMetric& m, const MetricPoint& pt, const PhaseState& s);

/// The matrix I - (eps/2) v^T Gamma(theta), where row k of v^T Gamma is
/// v^T Gamma^k, held as  alpha I + C B^T  with at most three columns. Solves
/// use Woodbury and determinants the matrix determinant lemma, both O(d).
class KahanSystem {
 public:
  static KahanSystem make(const TemperedMetric& m, const MetricPoint& pt,
                          const Vector& v, double eps);

  Vector solve(const Vector& rhs) const;
  double log_abs_det() const;
  Matrix to_dense() const;

  double alpha() const { return alpha_; }
  Eigen::Index rank() const { return cols_.cols(); }

 private:
  void factor();

  Eigen::Index dim_ = 0;
  double alpha_ = 1.0;
  Matrix cols_;
  Matrix rows_;
  Matrix capacitance_;  // I + B^T C / alpha
  Eigen::PartialPivLU<Matrix> lu_;
  double log_abs_det_ = 0.0;
};

/// Smallest |alpha| or capacitance determinant treated as nonsingular.
inline constexpr double kSingularThreshold = 1e-12;

/// x with (I - (eps/2) v^T Gamma(theta)) x = rhs.
Vector solve_kahan_system(const TemperedMetric& m, const Vector& theta, const Vector& v,
                          double eps, const Vector& rhs);

/// log |det dv*/dv| = log|I + (eps/2) v*^T Gamma| - log|I - (eps/2) v^T Gamma|.
double kahan_system_log_det(const TemperedMetric& m, const MetricPoint& pt,
                            const Vector& v, const Vector& v_star, double eps);
double kahan_system_log_det(const TemperedMetric& m, const Vector& theta,
                            const Vector& v, const Vector& v_star, double eps);

/// Gamma^1..Gamma^d assembled entrywise from the symmetrized Christoffel-type
/// definition with analytic dG/dtheta. O(d^4); for tests and small d only.
std::vector<Matrix> dense_gamma(const TemperedMetric& m, const Vector& theta);

/// Row k of the result is v^T Gamma^k.
Matrix contract_gamma(const std::vector<Matrix>& gamma, const Vector& v);

}  // namespace gthmc
