#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "gthmc/types.hpp"

namespace gthmc {

/// Unnormalized log-density with an analytic gradient.
///
/// Implementations are immutable after construction and safe to share
/// between threads.
class Target {
 public:
  virtual ~Target() = default;

  virtual Eigen::Index dim() const = 0;
  virtual std::string name() const = 0;

  /// log pi(theta) and its gradient in one pass; this is what samplers count
  /// as one gradient evaluation.
  virtual double log_density_and_grad(const Vector& theta,
                                      Vector& grad) const = 0;

  virtual double log_density(const Vector& theta) const {
    Vector unused;
    return log_density_and_grad(theta, unused);
  }

  Vector grad_log_density(const Vector& theta) const {
    Vector grad;
    log_density_and_grad(theta, grad);
    return grad;
  }
};

using TargetPtr = std::shared_ptr<const Target>;

struct TargetMoments {
  Vector mean;
  Vector variance;
};

/// Finite mixture of multivariate normals, evaluated with log-sum-exp.
class GaussianMixture final : public Target {
 public:
  /// Components with identity covariance.
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means);
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                  std::vector<Matrix> covariances);

  Eigen::Index dim() const override { return dim_; }
  std::string name() const override { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  double log_density_and_grad(const Vector& theta,
                              Vector& grad) const override;
  double log_density(const Vector& theta) const override;

  std::size_t num_components() const { return means_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Matrix>& covariances() const { return covariances_; }

  TargetMoments moments() const;

  /// CDF of the marginal of coordinate `coord`.
  double marginal_cdf(Eigen::Index coord, double x) const;

  /// Exact draw (used by tests and stationarity checks).
  Vector sample(Rng& rng) const;

 private:
  double component_log_density(std::size_t k, const Vector& theta,
                               Vector* precision_times_residual) const;

  Eigen::Index dim_ = 0;
  std::string name_ = "gaussian-mixture";
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covariances_;
  std::vector<Eigen::LLT<Matrix>> cholesky_;
  std::vector<double> log_norm_;
  bool identity_cov_ = true;
};

/// Spherically symmetric mixture of Gaussian shells:
///   pi(theta) = sum_i w_i / sigma * exp(-(|theta| - mu_i)^2 / (2 sigma^2)).
class ShellMixture final : public Target {
 public:
  ShellMixture(Eigen::Index dim, std::vector<double> radii, double sigma,
               std::vector<double> weights = {});

  Eigen::Index dim() const override { return dim_; }
  std::string name() const override { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  double log_density_and_grad(const Vector& theta,
                              Vector& grad) const override;
  double log_density(const Vector& theta) const override;

  const std::vector<double>& radii() const { return radii_; }
  double sigma() const { return sigma_; }

  /// Coordinate means/variances from 1-d radial quadrature.
  TargetMoments moments() const;
  /// E|theta|.
  double radial_mean() const;
  /// E|theta|^2.
  double radial_second_moment() const;

 private:
  double log_radial(double r, double* dlog_dr) const;
  double radial_moment(int power) const;

  Eigen::Index dim_;
  std::string name_ = "shell-mixture";
  std::vector<double> radii_;
  double sigma_;
  std::vector<double> log_weights_;
};

std::shared_ptr<GaussianMixture> make_standard_gaussian(Eigen::Index dim);

/// Two unit-covariance components at -/+ separation * e_axis, equal weights.
std::shared_ptr<GaussianMixture> make_bimodal(double separation = 4.0,
                                              Eigen::Index axis = 0,
                                              Eigen::Index dim = 2);

struct SwissRollParams {
  int components = 32;
  double sigma = 0.35;
  double inner_radius = 0.5;    // r = inner_radius + growth * phi
  double growth = 0.35;
  double max_angle = 3.0 * 3.14159265358979323846;
};

std::shared_ptr<GaussianMixture> make_swiss_roll(
    const SwissRollParams& params = {});

std::shared_ptr<ShellMixture> make_donut(Eigen::Index dim = 25,
                                         double sigma = 0.1);

/// Options for the string-keyed target registry. Unused fields are ignored
/// by targets that do not take them.
struct TargetOptions {
  Eigen::Index dim = 0;  // 0 = target default
  double separation = 4.0;
  Eigen::Index axis = 0;
  double sigma = 0.0;    // 0 = target default
  SwissRollParams swiss_roll;
};

/// "gaussian", "bimodal", "swissroll", "donut<d>" (e.g. "donut25").
TargetPtr make_named_target(const std::string& key,
                            const TargetOptions& options = {});

}  // namespace gthmc
