#include "gthmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <queue>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace gthmc {

double autocovariance_true_mean(const std::vector<double>& series, double mu, std::size_t k) {
  const std::size_t m = series.size();
  if (k >= m) throw std::invalid_argument("autocovariance: lag must be < series length");
  if (!std::isfinite(mu)) throw std::invalid_argument("autocovariance: mean must be finite");
  double s = 0.0;
  for (std::size_t i = 0; i + k < m; ++i) s += (series[i + k] - mu) * (series[i] - mu);
  return s / static_cast<double>(m);
}

std::vector<double> autocovariances_true_mean(const std::vector<double>& series, double mu) {
  const std::size_t m = series.size();
  if (m == 0) return {};
  std::size_t n = 1;
  while (n < 2 * m) n <<= 1;
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) x[i] = series[i] - mu;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> f;
  fft.fwd(f, x);
  for (auto& c : f) c = std::complex<double>(std::norm(c), 0.0);
  std::vector<double> r;
  fft.inv(r, f);
  std::vector<double> a(m);
  for (std::size_t k = 0; k < m; ++k) a[k] = r[k] / static_cast<double>(m);
  return a;
}

double ess_geyer(const std::vector<double>& series, double mu) {
  const std::size_t m = series.size();
  if (m < 4) throw std::invalid_argument("ess_geyer: need at least 4 draws");
  const std::vector<double> a = autocovariances_true_mean(series, mu);
  const double a0 = a[0];
  double scale = 0.0;
  for (double v : series) scale = std::max(scale, std::abs(v - mu));
  if (!(a0 > 1e-24 * std::max(1.0, scale * scale))) return static_cast<double>(m);

  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; 2 * j + 1 < m; ++j) {
    double pair = a[2 * j] + a[2 * j + 1];
    if (pair < 0.0) break;
    pair = std::min(pair, prev);
    sum += pair;
    prev = pair;
  }
  const double denom = -a0 + 2.0 * sum;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return static_cast<double>(m) * a0 / denom;
}

EssReport ess_report(const ChainRecord& chain, const Vector& true_means, const Vector& true_vars,
                     double gradient_budget) {
  if (chain.samples.empty()) throw std::invalid_argument("ess_report: empty chain");
  const Eigen::Index d = chain.samples.front().size();
  if (true_means.size() != d || true_vars.size() != d) {
    throw std::invalid_argument("ess_report: true moments missing or of the wrong dimension");
  }
  EssReport r;
  r.samples = chain.samples.size();
  r.grad_evals = chain.grad_eval_total;
  const double cap = static_cast<double>(r.samples);
  std::vector<double> series(r.samples);
  double min_ess = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < r.samples; ++i) series[i] = chain.samples[i][j];
    const double em = ess_geyer(series, true_means[j]);
    for (std::size_t i = 0; i < r.samples; ++i) {
      const double c = chain.samples[i][j] - true_means[j];
      series[i] = c * c;
    }
    const double ev = ess_geyer(series, true_vars[j]);
    r.raw_ess_mean.push_back(em);
    r.raw_ess_variance.push_back(ev);
    r.ess_mean.push_back(std::min(em, cap));
    r.ess_variance.push_back(std::min(ev, cap));
    min_ess = std::min({min_ess, r.ess_mean.back(), r.ess_variance.back()});
  }
  r.min_ess = min_ess;
  r.ess_per_100_samples = 100.0 * min_ess / cap;
  r.gradient_budget = gradient_budget > 0.0 ? gradient_budget : 1.0;
  r.ess_per_gradient_budget =
      chain.grad_eval_total > 0
          ? min_ess * r.gradient_budget / static_cast<double>(chain.grad_eval_total)
          : 0.0;
  return r;
}

double ess_of_statistic(const ChainRecord& chain,
                        const std::function<double(const Vector&)>& statistic, double mu) {
  std::vector<double> series;
  series.reserve(chain.samples.size());
  for (const Vector& s : chain.samples) series.push_back(statistic(s));
  return std::min(ess_geyer(series, mu), static_cast<double>(series.size()));
}

double energy_barrier_grid(const Target& target, const Vector& theta1, const Vector& theta2,
                           const GridSpec& grid, double temperature) {
  if (target.dim() != 2) throw std::invalid_argument("energy barrier: 2-d targets only");
  require_dim(theta1, 2, "barrier endpoint");
  require_dim(theta2, 2, "barrier endpoint");
  if (grid.nx < 2 || grid.ny < 2 || !(grid.x_hi > grid.x_lo) || !(grid.y_hi > grid.y_lo)) {
    throw std::invalid_argument("energy barrier: bad grid");
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("energy barrier: temperature <= 0");
  auto inside = [&](const Vector& t) {
    return t[0] >= grid.x_lo && t[0] <= grid.x_hi && t[1] >= grid.y_lo && t[1] <= grid.y_hi;
  };
  if (!inside(theta1) || !inside(theta2)) {
    throw std::invalid_argument("energy barrier: endpoints outside the grid");
  }
  auto potential = [&](const Vector& t) { return -target.log_density(t) / temperature; };
  const double u1 = potential(theta1);
  if (theta1 == theta2) return 0.0;
  const double u2 = potential(theta2);

  const double dx = (grid.x_hi - grid.x_lo) / (grid.nx - 1);
  const double dy = (grid.y_hi - grid.y_lo) / (grid.ny - 1);
  const std::size_t n = static_cast<std::size_t>(grid.nx) * grid.ny;
  std::vector<double> u(n);
  Vector p(2);
  for (int i = 0; i < grid.nx; ++i) {
    for (int j = 0; j < grid.ny; ++j) {
      p << grid.x_lo + i * dx, grid.y_lo + j * dy;
      const double v = potential(p);
      u[static_cast<std::size_t>(i) * grid.ny + j] =
          std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    }
  }
  auto nearest = [&](const Vector& t) {
    const int i = static_cast<int>(std::lround((t[0] - grid.x_lo) / dx));
    const int j = static_cast<int>(std::lround((t[1] - grid.y_lo) / dy));
    return static_cast<std::size_t>(std::clamp(i, 0, grid.nx - 1)) * grid.ny +
           static_cast<std::size_t>(std::clamp(j, 0, grid.ny - 1));
  };
  const std::size_t src = nearest(theta1);
  const std::size_t dst = nearest(theta2);

  // Dijkstra with path cost = running maximum of U.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(n, inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  best[src] = std::max(u1, u[src]);
  queue.push({best[src], src});
  while (!queue.empty()) {
    const auto [cost, node] = queue.top();
    queue.pop();
    if (cost > best[node]) continue;
    if (node == dst) break;
    const int i = static_cast<int>(node / grid.ny);
    const int j = static_cast<int>(node % grid.ny);
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        if (di == 0 && dj == 0) continue;
        const int a = i + di;
        const int b = j + dj;
        if (a < 0 || a >= grid.nx || b < 0 || b >= grid.ny) continue;
        const std::size_t next = static_cast<std::size_t>(a) * grid.ny + b;
        const double c = std::max(cost, u[next]);
        if (c < best[next]) {
          best[next] = c;
          queue.push({c, next});
        }
      }
    }
  }
  if (!std::isfinite(best[dst])) {
    throw std::runtime_error("energy barrier: endpoints are not connected on this grid");
  }
  return std::max(best[dst], u2) - u1;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace gthmc
