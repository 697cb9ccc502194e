#pragma once

#include <functional>
#include <vector>

#include "gthmc/samplers.hpp"

namespace gthmc {

/// a(k) = (1/M) sum_{m=1}^{M-k} (g_{m+k} - mu)(g_m - mu)
double autocovariance_true_mean(const std::vector<double>& series, double mu, std::size_t k);

/// a(0), a(1), ..., a(M-1) in one FFT pass.
std::vector<double> autocovariances_true_mean(const std::vector<double>& series, double mu);

/// Initial monotone sequence estimate around the known mean. Raw value: it can
/// exceed M, and is +inf when the estimated asymptotic variance is not
/// positive. A series with zero variance about mu returns M.
double ess_geyer(const std::vector<double>& series, double mu);

struct EssReport {
  std::vector<double> ess_mean;      // per coordinate, capped at M
  std::vector<double> ess_variance;  // per coordinate, capped at M
  std::vector<double> raw_ess_mean;
  std::vector<double> raw_ess_variance;
  double min_ess = 0.0;
  double ess_per_100_samples = 0.0;
  /// min ESS per `gradient_budget` gradient evaluations.
  double ess_per_gradient_budget = 0.0;
  double gradient_budget = 0.0;
  long long grad_evals = 0;
  std::size_t samples = 0;
};

/// ESS of the mean and variance estimators of every coordinate, using the
/// supplied true moments. gradient_budget <= 0 means "per gradient".
EssReport ess_report(const ChainRecord& chain, const Vector& true_means,
                     const Vector& true_vars, double gradient_budget);

/// ESS of the mean estimator of an arbitrary scalar statistic of the chain.
double ess_of_statistic(const ChainRecord& chain,
                        const std::function<double(const Vector&)>& statistic, double mu);

struct GridSpec {
  double x_lo = -8.0, x_hi = 8.0;
  double y_lo = -4.0, y_hi = 4.0;
  int nx = 400;
  int ny = 200;
};

/// Minimax-path barrier max_path U - U(theta1) on an 8-neighbour node grid,
/// with U = -log(pi) / temperature.
double energy_barrier_grid(const Target& target, const Vector& theta1, const Vector& theta2,
                           const GridSpec& grid = {}, double temperature = 1.0);

/// sup_x |F_n(x) - F(x)|.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

}  // namespace gthmc
