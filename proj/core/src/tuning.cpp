#include "gthmc/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gthmc {

DualAveragingState DualAveragingState::start(double eps0, double delta,
                                             DualAveragingParams params) {
  if (!(eps0 > 0.0)) throw std::invalid_argument("dual averaging: eps0 must be positive");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("dual averaging: delta must lie in (0, 1)");
  }
  DualAveragingState s;
  s.log_eps = std::log(eps0);
  s.log_eps_bar = 0.0;
  s.mu = std::log(10.0 * eps0);
  s.delta = delta;
  s.params = params;
  return s;
}

double DualAveragingState::step_size() const { return std::exp(log_eps); }
double DualAveragingState::final_step_size() const {
  return std::exp(m > 0 ? log_eps_bar : log_eps);
}

DualAveragingState dual_averaging_update(DualAveragingState s, double observed_stat) {
  double stat = std::isnan(observed_stat) ? 0.0 : std::clamp(observed_stat, 0.0, 1.0);
  s.m += 1;
  const double m = static_cast<double>(s.m);
  const double w = 1.0 / (m + s.params.t0);
  s.h_bar = (1.0 - w) * s.h_bar + w * (s.delta - stat);
  s.log_eps = s.mu - std::sqrt(m) / s.params.gamma * s.h_bar;
  const double decay = std::pow(m, -s.params.kappa);
  s.log_eps_bar = decay * s.log_eps + (1.0 - decay) * s.log_eps_bar;
  return s;
}

namespace {

// Keeps a wildly adapting controller from handing the kernel 0 or inf.
double usable_step(double log_eps) { return std::exp(std::clamp(log_eps, -18.0, 7.0)); }

}  // namespace

StepSizeTuning tune_step_size(Kernel& kernel, Vector theta, int iters, Rng& rng,
                              DualAveragingParams params) {
  StepSizeTuning out;
  if (iters <= 0) {
    out.step_size = kernel.step_size();
    out.theta = std::move(theta);
    return out;
  }
  DualAveragingState da = DualAveragingState::start(kernel.step_size(), kernel.tuning_target(),
                                                    params);
  double sum_stat = 0.0;
  for (int i = 0; i < iters; ++i) {
    const Transition t = kernel.transition(theta, rng);
    out.grad_evals += t.grad_evals;
    sum_stat += t.tuning_stat;
    da = dual_averaging_update(da, t.tuning_stat);
    kernel.set_step_size(usable_step(da.log_eps));
  }
  kernel.set_step_size(usable_step(da.log_eps_bar));
  out.step_size = kernel.step_size();
  out.theta = std::move(theta);
  out.mean_stat = sum_stat / iters;
  return out;
}

double normalized_esjd(const ChainRecord& chain, const Vector& theta_before) {
  if (chain.samples.empty()) return 0.0;
  double sq = 0.0;
  const Vector* prev = &theta_before;
  for (const Vector& s : chain.samples) {
    sq += (s - *prev).squaredNorm();
    prev = &s;
  }
  if (chain.grad_eval_total <= 0) return 0.0;
  const double n = static_cast<double>(chain.samples.size());
  return (sq / n) / (static_cast<double>(chain.grad_eval_total) / n);
}

EsjdSearch esjd_pathlength_search(const Kernel& kernel, const Vector& theta0,
                                  const std::vector<double>& tau_grid, int pilot_iters,
                                  std::uint64_t seed) {
  if (tau_grid.empty()) throw std::invalid_argument("esjd search: empty tau grid");
  if (!std::is_sorted(tau_grid.begin(), tau_grid.end())) {
    throw std::invalid_argument("esjd search: tau grid must be ascending");
  }
  if (pilot_iters < 1) throw std::invalid_argument("esjd search: pilot_iters must be >= 1");
  EsjdSearch out;
  out.tau_grid = tau_grid;
  double best = -1.0;
  for (std::size_t k = 0; k < tau_grid.size(); ++k) {
    auto pilot = kernel.clone();
    pilot->set_path_length(tau_grid[k]);
    const ChainRecord rec = run_chain(*pilot, theta0, pilot_iters, 0, split_seed(seed, k));
    double score = rec.accept_rate() > 0.0 ? normalized_esjd(rec, theta0) : 0.0;
    if (!std::isfinite(score)) score = 0.0;
    out.scores.push_back(score);
    if (score > best) {
      best = score;
      out.best_tau = tau_grid[k];
    }
  }
  return out;
}

std::vector<double> log_spaced_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) {
    throw std::invalid_argument("log_spaced_grid: need 0 < lo <= hi and n >= 1");
  }
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    g[i] = std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)));
  }
  return g;
}

TuneResult alternate_tune(Kernel& kernel, const Vector& theta0, const TuneOptions& options,
                          std::uint64_t seed) {
  if (options.rounds < 1) throw std::invalid_argument("alternate_tune: rounds must be >= 1");
  TuneResult out;
  Rng rng(seed);
  Vector theta = theta0;
  for (int r = 0; r < options.rounds; ++r) {
    StepSizeTuning st = tune_step_size(kernel, theta, options.adapt_iters, rng, options.params);
    theta = st.theta;
    out.step_size_history.push_back(kernel.step_size());
    if (kernel.uses_path_length() && !options.tau_grid.empty()) {
      const EsjdSearch es = esjd_pathlength_search(
          kernel, theta, options.tau_grid, options.pilot_iters,
          split_seed(seed, 1000 + static_cast<std::uint64_t>(r)));
      kernel.set_path_length(es.best_tau);
    }
    out.path_length_history.push_back(kernel.path_length());
  }
  out.step_size = kernel.step_size();
  out.path_length = kernel.path_length();
  out.theta = std::move(theta);
  return out;
}

}  // namespace gthmc
