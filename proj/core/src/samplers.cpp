#include "gthmc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gthmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

double sanitize_log_ratio(double r) { return std::isnan(r) ? kNegInf : r; }

bool metropolis(double log_ratio, Rng& rng) {
  return std::log(uniform01(rng)) < log_ratio;
}

double accept_probability(double log_ratio) {
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

double kinetic(const Vector& p) { return 0.5 * p.squaredNorm(); }

Transition hmc_core(const Target& target, double eps, int n_steps, Vector& theta, Rng& rng,
                    std::optional<LeapfrogState>& cache) {
  if (n_steps < 1) throw std::invalid_argument("hmc: n_steps must be >= 1");
  Transition t;
  Vector p = standard_normal(rng, target.dim());
  LeapfrogState s;
  if (cache && cache->theta == theta) {
    s = *cache;
    s.p = p;
  } else {
    s = make_leapfrog_state(target, theta, p);
    t.grad_evals += 1;
  }
  const LeapfrogState start = s;
  const double h0 = -s.log_pi + kinetic(s.p);
  double log_ratio = kNegInf;
  try {
    for (int i = 0; i < n_steps; ++i) {
      s = leapfrog_step(target, s, eps);
      t.grad_evals += 1;
      t.steps += 1;
    }
    log_ratio = sanitize_log_ratio(h0 - (-s.log_pi + kinetic(s.p)));
  } catch (const StepFailure&) {
    t.failed = true;
  }
  t.accept_prob = accept_probability(log_ratio);
  t.tuning_stat = t.accept_prob;
  t.accepted = metropolis(log_ratio, rng);
  if (t.accepted) {
    theta = s.theta;
    t.energy = -s.log_pi + kinetic(s.p);
    cache = s;
  } else {
    t.energy = h0;
    cache = start;
  }
  return t;
}

// NUTS (multinomial, identity mass).

struct NutsSubtree {
  LeapfrogState minus, plus, sample;
  double log_sum_w = kNegInf;
  Vector rho;
  bool valid = true;
  bool divergent = false;
  int n_steps = 0;
  double sum_accept = 0.0;
};

struct NutsLeafRecord {
  Vector theta, p;
  double log_weight;
};

bool no_u_turn(const Vector& rho, const Vector& p_minus, const Vector& p_plus) {
  return rho.dot(p_minus) > 0.0 && rho.dot(p_plus) > 0.0;
}

NutsSubtree build_tree(const Target& target, const LeapfrogState& edge, int dir, int depth,
                       double eps, double h0, Rng* rng,
                       std::vector<NutsLeafRecord>* leaves) {
  NutsSubtree out;
  if (depth == 0) {
    out.n_steps = 1;
    LeapfrogState s;
    double h = std::numeric_limits<double>::infinity();
    try {
      s = leapfrog_step(target, edge, dir * eps);
      h = -s.log_pi + kinetic(s.p);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
    } catch (const StepFailure&) {
      s = edge;
    }
    out.divergent = h - h0 > kNutsDivergence;
    out.valid = !out.divergent;
    out.sum_accept = std::min(1.0, std::exp(h0 - h));
    out.log_sum_w = -h;
    out.rho = s.p;
    out.minus = out.plus = out.sample = s;
    if (leaves) leaves->push_back({s.theta, s.p, -h});
    return out;
  }
  NutsSubtree first = build_tree(target, edge, dir, depth - 1, eps, h0, rng, leaves);
  if (!first.valid) return first;
  NutsSubtree second = build_tree(target, dir > 0 ? first.plus : first.minus, dir,
                                  depth - 1, eps, h0, rng, leaves);
  out.n_steps = first.n_steps + second.n_steps;
  out.sum_accept = first.sum_accept + second.sum_accept;
  if (!second.valid) {
    out.valid = false;
    out.divergent = second.divergent;
    return out;
  }
  out.log_sum_w = log_add_exp(first.log_sum_w, second.log_sum_w);
  out.sample = first.sample;
  if (rng && std::log(uniform01(*rng)) < second.log_sum_w - out.log_sum_w) {
    out.sample = second.sample;
  }
  out.rho = first.rho + second.rho;
  if (dir > 0) {
    out.minus = first.minus;
    out.plus = second.plus;
  } else {
    out.minus = second.minus;
    out.plus = first.plus;
  }
  out.valid = no_u_turn(out.rho, out.minus.p, out.plus.p);
  return out;
}

struct NutsRun {
  LeapfrogState selected;
  double h_selected = 0.0;
  int depth = 0;
  int n_steps = 0;
  double sum_accept = 0.0;
  bool u_turn = false;
  bool divergent = false;
};

NutsRun nuts_core(const Target& target, double eps, const LeapfrogState& start, int max_depth,
                  const std::function<int(int)>& direction, Rng* rng,
                  NutsTrajectory* record) {
  NutsRun run;
  const double h0 = -start.log_pi + kinetic(start.p);
  LeapfrogState minus = start, plus = start;
  run.selected = start;
  run.h_selected = h0;
  double log_sum_w = -h0;
  Vector rho = start.p;
  if (record) {
    record->theta = {start.theta};
    record->p = {start.p};
    record->log_weight = {-h0};
    record->origin = 0;
  }
  while (run.depth < max_depth) {
    const int dir = direction(run.depth);
    if (dir == 0) break;
    std::vector<NutsLeafRecord> leaves;
    NutsSubtree sub = build_tree(target, dir > 0 ? plus : minus, dir, run.depth, eps, h0, rng,
                                 record ? &leaves : nullptr);
    run.n_steps += sub.n_steps;
    run.sum_accept += sub.sum_accept;
    if (!sub.valid) {
      run.divergent = sub.divergent;
      run.u_turn = !sub.divergent;
      break;
    }
    if (rng && std::log(uniform01(*rng)) < sub.log_sum_w - log_sum_w) {
      run.selected = sub.sample;
      run.h_selected = -sub.sample.log_pi + kinetic(sub.sample.p);
    }
    log_sum_w = log_add_exp(log_sum_w, sub.log_sum_w);
    rho += sub.rho;
    if (dir > 0) {
      plus = sub.plus;
    } else {
      minus = sub.minus;
    }
    if (record) {
      for (auto& leaf : leaves) {
        if (dir > 0) {
          record->theta.push_back(leaf.theta);
          record->p.push_back(leaf.p);
          record->log_weight.push_back(leaf.log_weight);
        } else {
          record->theta.insert(record->theta.begin(), leaf.theta);
          record->p.insert(record->p.begin(), leaf.p);
          record->log_weight.insert(record->log_weight.begin(), leaf.log_weight);
          record->origin += 1;
        }
      }
    }
    run.depth += 1;
    if (!no_u_turn(rho, minus.p, plus.p)) {
      run.u_turn = true;
      break;
    }
  }
  if (record) {
    record->depth = run.depth;
    record->u_turn = run.u_turn;
    record->divergent = run.divergent;
  }
  return run;
}

Transition nuts_transition(const Target& target, double eps, Vector& theta, Rng& rng,
                           int max_depth, std::optional<LeapfrogState>& cache) {
  Transition t;
  Vector p = standard_normal(rng, target.dim());
  LeapfrogState s;
  if (cache && cache->theta == theta) {
    s = *cache;
    s.p = p;
  } else {
    s = make_leapfrog_state(target, theta, p);
    t.grad_evals += 1;
  }
  auto direction = [&rng](int) { return uniform01(rng) < 0.5 ? -1 : 1; };
  const NutsRun run = nuts_core(target, eps, s, max_depth, direction, &rng, nullptr);
  t.grad_evals += run.n_steps;
  t.steps = run.n_steps;
  t.tree_depth = run.depth;
  t.max_depth_hit = !run.u_turn && !run.divergent && run.depth >= max_depth;
  t.failed = run.divergent;
  t.accept_prob = run.n_steps > 0 ? run.sum_accept / run.n_steps : 0.0;
  t.tuning_stat = t.accept_prob;
  t.accepted = run.selected.theta != theta;
  t.energy = run.h_selected;
  theta = run.selected.theta;
  cache = run.selected;
  return t;
}

// Tempered kernels.

double energy_of(const TemperedMetric& m, const MetricPoint& pt, const Vector& v) {
  return -pt.log_pi + 0.5 * log_det_metric(m, pt) + kinetic_energy_velocity(m, pt, v);
}

double accuracy_stat(double energy_error) {
  return std::isfinite(energy_error) ? std::exp(-std::abs(energy_error)) : 0.0;
}

Transition chmc_core(const TemperedMetric& m, const MetricPoint& pt0, double eps, int n_steps,
                     Vector& theta, Rng& rng, std::optional<MetricPoint>* cache) {
  if (n_steps < 1) throw std::invalid_argument("chmc: n_steps must be >= 1");
  Transition t;
  const Vector p0 = sample_momentum(m, pt0, rng);
  const Vector v0 = momentum_to_velocity(m, pt0, p0);
  const double lpv0 = log_joint_velocity(m, pt0, v0);
  const double h0 = energy_of(m, pt0, v0);
  double log_ratio = kNegInf;
  MetricPoint pt = pt0;
  Vector v = v0;
  double h1 = h0;
  try {
    double log_jac = 0.0;
    for (int i = 0; i < n_steps; ++i) {
      IntegratorStepResult r = adaptive_step(m, pt, v, eps);
      log_jac += r.log_jacobian;
      t.grad_evals += r.grad_evals;
      t.steps += 1;
      pt = std::move(r.point1);
      v = std::move(r.state1.conjugate);
    }
    log_ratio = sanitize_log_ratio(log_joint_velocity(m, pt, v) - lpv0 + log_jac);
    h1 = energy_of(m, pt, v);
  } catch (const StepFailure&) {
    t.failed = true;
  }
  t.accept_prob = accept_probability(log_ratio);
  t.tuning_stat = t.failed ? 0.0 : accuracy_stat(h1 - h0);
  t.accepted = metropolis(log_ratio, rng);
  if (t.accepted) {
    theta = pt.theta;
    t.energy = h1;
    if (cache) *cache = std::move(pt);
  } else {
    t.energy = h0;
    if (cache) *cache = pt0;
  }
  return t;
}

struct OrbitPoint {
  MetricPoint pt;
  Vector v;
  double t = 0.0;
  double log_jac = 0.0;
  double log_weight = 0.0;  // log pi_v + log_jac
  double eta = 1.0;
};

// Integrates one orbit (forward from its first point), accumulating the
// trapezoidal physical time.
class Orbit {
 public:
  Orbit(const TemperedMetric& m, double eps, double direction, OrbitPoint start)
      : m_(m), eps_(eps), sign_(direction) {
    points_.push_back(std::move(start));
  }

  void step() {
    const OrbitPoint& last = points_.back();
    IntegratorStepResult r = adaptive_step(m_, last.pt, last.v, eps_);
    OrbitPoint next;
    next.eta = r.point1.eta();
    next.t = last.t + sign_ * eps_ * 0.5 * (last.eta + next.eta);
    next.log_jac = last.log_jac + r.log_jacobian;
    next.v = std::move(r.state1.conjugate);
    next.pt = std::move(r.point1);
    next.log_weight = log_joint_velocity(m_, next.pt, next.v) + next.log_jac;
    points_.push_back(std::move(next));
  }

  const OrbitPoint& back() const { return points_.back(); }
  const OrbitPoint& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }
  int steps() const { return static_cast<int>(points_.size()) - 1; }

 private:
  const TemperedMetric& m_;
  double eps_;
  double sign_;
  std::vector<OrbitPoint> points_;
};

OrbitPoint orbit_origin(const TemperedMetric& m, const MetricPoint& pt, const Vector& v) {
  OrbitPoint o;
  o.pt = pt;
  o.v = v;
  o.eta = pt.eta();
  o.log_weight = log_joint_velocity(m, pt, v);
  return o;
}

class TruncatedTrajectory : public StepFailure {
 public:
  TruncatedTrajectory() : StepFailure("trajectory exceeded n_max steps") {}
};

// First n with t_n > tau from (pt, v); the final point is written to `end`.
int count_steps(const TemperedMetric& m, const MetricPoint& pt, const Vector& v, double eps,
                double tau, int n_max, Vector* end_theta) {
  Orbit orbit(m, eps, 1.0, orbit_origin(m, pt, v));
  while (orbit.back().t <= tau) {
    if (orbit.steps() >= n_max) return n_max + 1;
    orbit.step();
  }
  if (end_theta) *end_theta = orbit.back().pt.theta;
  return orbit.steps();
}

Vector mmala_drift_correction(const TemperedMetric& m, const MetricPoint& pt) {
  // D_i = sum_j d/dtheta_j (G^{-1})_ij
  const Vector& u = m.direction();
  const Vector& g = pt.grad_log_pi;
  const double ia = std::exp(-pt.log_g_par);
  const double ib = std::exp(-pt.log_g_perp);
  const Vector db = m.exponent_perp() * g;
  const double uda = m.exponent_parallel() * u.dot(g);
  return -ib * db + (ib * u.dot(db) - ia * uda) * u;
}

Vector inverse_sqrt_metric(const TemperedMetric& m, const MetricPoint& pt, const Vector& z) {
  const Vector& u = m.direction();
  const double sa = std::exp(-0.5 * pt.log_g_par);
  const double sb = std::exp(-0.5 * pt.log_g_perp);
  return sb * z + (sa - sb) * u.dot(z) * u;
}

// log N(x; mean, h G^{-1}) up to a constant common to both directions.
double mmala_log_proposal(const TemperedMetric& m, const MetricPoint& at, const Vector& x,
                          double h) {
  const Vector mean = at.theta + 0.5 * h *
                                     (apply_inverse_metric(m, at, at.grad_log_pi) +
                                      mmala_drift_correction(m, at));
  const Vector r = x - mean;
  return -0.5 * r.dot(apply_metric(m, at, r)) / h + 0.5 * log_det_metric(m, at);
}

Transition mmala_core(const TemperedMetric& m, const MetricPoint& pt0, double eps_l,
                      Vector& theta, Rng& rng, std::optional<MetricPoint>* cache) {
  Transition t;
  const double h = eps_l * eps_l;
  const Vector z = standard_normal(rng, m.dim());
  double log_ratio = kNegInf;
  std::optional<MetricPoint> pt1;
  try {
    const Vector mean = pt0.theta + 0.5 * h *
                                        (apply_inverse_metric(m, pt0, pt0.grad_log_pi) +
                                         mmala_drift_correction(m, pt0));
    const Vector prop = mean + std::sqrt(h) * inverse_sqrt_metric(m, pt0, z);
    if (!prop.allFinite()) throw StepFailure("mmala: proposal is not finite");
    pt1 = evaluate(m, prop);
    t.grad_evals += 1;
    log_ratio = sanitize_log_ratio(pt1->log_pi + mmala_log_proposal(m, *pt1, pt0.theta, h) -
                                   pt0.log_pi - mmala_log_proposal(m, pt0, prop, h));
  } catch (const StepFailure&) {
    t.failed = true;
  }
  t.steps = 1;
  t.accept_prob = accept_probability(log_ratio);
  t.tuning_stat = t.accept_prob;
  t.accepted = metropolis(log_ratio, rng);
  if (t.accepted) {
    theta = pt1->theta;
    t.energy = -pt1->log_pi;
    if (cache) *cache = std::move(*pt1);
  } else {
    t.energy = -pt0.log_pi;
    if (cache) *cache = pt0;
  }
  return t;
}

}  // namespace

void ChainRecord::append(const Vector& theta, const Transition& t) {
  samples.push_back(theta);
  accept_flags.push_back(t.accepted);
  energies.push_back(t.energy);
  grad_evals.push_back(t.grad_evals);
  grad_eval_total += t.grad_evals;
  if (t.failed) ++failures;
}

double ChainRecord::accept_rate() const {
  if (accept_flags.empty()) return 0.0;
  return static_cast<double>(std::count(accept_flags.begin(), accept_flags.end(), true)) /
         static_cast<double>(accept_flags.size());
}

Vector random_unit_vector(Rng& rng, Eigen::Index dim) {
  Vector z = standard_normal(rng, dim);
  double n = z.norm();
  while (!(n > 0.0)) {
    z = standard_normal(rng, dim);
    n = z.norm();
  }
  return z / n;
}

Transition hmc_iteration(const Target& target, double eps, int n_steps, Vector& theta,
                         Rng& rng) {
  std::optional<LeapfrogState> cache;
  return hmc_core(target, eps, n_steps, theta, rng, cache);
}

Transition nuts_iteration(const Target& target, double eps, Vector& theta, Rng& rng,
                          int max_depth) {
  std::optional<LeapfrogState> cache;
  return nuts_transition(target, eps, theta, rng, max_depth, cache);
}

NutsTrajectory build_nuts_trajectory(const Target& target, double eps, const Vector& theta0,
                                     const Vector& p0, const std::vector<int>& directions,
                                     int max_depth) {
  NutsTrajectory out;
  const LeapfrogState start = make_leapfrog_state(target, theta0, p0);
  auto direction = [&directions](int depth) {
    return depth < static_cast<int>(directions.size()) ? directions[depth] : 0;
  };
  nuts_core(target, eps, start, max_depth, direction, nullptr, &out);
  return out;
}

Transition chmc_iteration(const TemperedMetric& m, double eps, int n_steps, Vector& theta,
                          Rng& rng) {
  MetricPoint pt0;
  try {
    pt0 = evaluate(m, theta);
  } catch (const StepFailure&) {
    Transition t;
    t.failed = true;
    t.grad_evals = 1;
    return t;
  }
  Transition t = chmc_core(m, pt0, eps, n_steps, theta, rng, nullptr);
  t.grad_evals += 1;
  return t;
}

Transition mmala_iteration(const TemperedMetric& m, double eps_l, Vector& theta, Rng& rng) {
  const MetricPoint pt0 = evaluate(m, theta);
  Transition t = mmala_core(m, pt0, eps_l, theta, rng, nullptr);
  t.grad_evals += 1;
  return t;
}

int vlt_step_count(const TemperedMetric& m, const Vector& theta0, const Vector& v0,
                   double eps, double tau, int n_max) {
  if (!(tau > 0.0) || !(eps > 0.0)) {
    throw std::invalid_argument("vlt_step_count: tau and eps must be positive");
  }
  return count_steps(m, evaluate(m, theta0), v0, eps, tau, n_max, nullptr);
}

Transition vlt_chmc_from(const TemperedMetric& m, const MetricPoint& pt0, const Vector& v0,
                         double eps, double tau, Vector& theta, Rng& rng,
                         const VltOptions& options, VltSets* sets_out,
                         MetricPoint* selected) {
  if (!(tau > 0.0) || !(eps > 0.0)) {
    throw std::invalid_argument("vlt-chmc: tau and eps must be positive");
  }
  Transition t;
  VltSets sets;
  sets.eta0 = pt0.eta();

  const OrbitPoint origin = orbit_origin(m, pt0, v0);
  Orbit fwd(m, eps, 1.0, origin);
  // Integrating R z_0 forward gives z_{-1}, z_{-2}, ... with velocities negated.
  Orbit bwd(m, eps, -1.0, orbit_origin(m, pt0, -v0));
  const double h0 = energy_of(m, pt0, v0);

  auto budget = [&]() {
    if (fwd.steps() + bwd.steps() >= options.n_max) throw TruncatedTrajectory();
  };
  auto time_at = [&](int i) { return i >= 0 ? fwd[i].t : bwd[-i].t; };
  auto point_at = [&](int i) -> const OrbitPoint& { return i >= 0 ? fwd[i] : bwd[-i]; };

  double log_ratio = kNegInf;
  std::optional<int> chosen;
  try {
    while (fwd.back().t <= tau) {
      budget();
      fwd.step();
    }
    const int n = fwd.steps();
    sets.forward_step_count = n;
    sets.eta_star = fwd[n].eta;
    const double lo = fwd[n - 1].t - tau;
    const double hi = fwd[n].t - tau;

    int imax = 0;
    while (imax + 1 < n && fwd[imax + 1].t < hi) ++imax;
    while (bwd.back().t >= lo) {
      budget();
      bwd.step();
    }
    const int imin = -(bwd.steps() - 1);
    const double upper = time_at(imax + 1) + tau;
    while (fwd.back().t <= upper) {
      budget();
      fwd.step();
    }
    const int jmax = fwd.steps() - 1;

    sets.s_begin = imin;
    sets.s_end = imax;
    sets.s_star_begin = n;
    sets.s_star_end = jmax;
    sets.backward_step_count = bwd.steps();

    double log_w = kNegInf;
    for (int i = imin; i <= imax; ++i) log_w = log_add_exp(log_w, point_at(i).log_weight);
    double log_w_star = kNegInf;
    for (int j = n; j <= jmax; ++j) log_w_star = log_add_exp(log_w_star, fwd[j].log_weight);
    sets.log_weight_s = log_w;
    sets.log_weight_s_star = log_w_star;
    log_ratio = sanitize_log_ratio(log_w_star - log_w);

    t.tuning_stat = accuracy_stat(energy_of(m, fwd[n].pt, fwd[n].v) - h0);

    if (options.verify) {
      sets.verified = true;
      auto maps_into_star = [&](int i) {
        const OrbitPoint& z = point_at(i);
        const Vector v = i >= 0 ? z.v : Vector(-z.v);
        const int steps = count_steps(m, z.pt, v, eps, tau, options.n_max, nullptr);
        const int j = i + steps;
        return n <= j && j <= jmax;
      };
      auto maps_into_s = [&](int j) {
        const OrbitPoint& z = fwd[j];
        const int steps = count_steps(m, z.pt, -z.v, eps, tau, options.n_max, nullptr);
        const int k = j - steps;
        return imin <= k && k <= imax;
      };
      bool ok = true;
      for (int i = imin - 1; i <= imax + 1; ++i) {
        const bool in_s = imin <= i && i <= imax;
        if (maps_into_star(i) != in_s) ok = false;
      }
      for (int j = std::max(0, n - 1); j <= jmax + 1; ++j) {
        const bool in_star = n <= j && j <= jmax;
        if (maps_into_s(j) != in_star) ok = false;
      }
      sets.inclusions_hold = ok;
    }

    if (metropolis(log_ratio, rng)) {
      const double target_w = std::log(uniform01(rng)) + log_w_star;
      double acc = kNegInf;
      chosen = jmax;
      for (int j = n; j <= jmax; ++j) {
        acc = log_add_exp(acc, fwd[j].log_weight);
        if (target_w < acc) {
          chosen = j;
          break;
        }
      }
    }
  } catch (const StepFailure& e) {
    t.failed = true;
    sets.truncated = dynamic_cast<const TruncatedTrajectory*>(&e) != nullptr;
    // running out of budget says nothing about the step size being too big
    if (sets.truncated) {
      t.tuning_stat = accuracy_stat(energy_of(m, fwd.back().pt, fwd.back().v) - h0);
    }
    log_ratio = kNegInf;
    uniform01(rng);
  }

  sets.total_steps = fwd.steps() + bwd.steps();
  sets.accept_prob = accept_probability(log_ratio);
  t.accept_prob = sets.accept_prob;
  t.steps = sets.total_steps;
  t.grad_evals = sets.total_steps;
  t.accepted = chosen.has_value();
  if (t.accepted) {
    const OrbitPoint& z = fwd[*chosen];
    theta = z.pt.theta;
    t.energy = energy_of(m, z.pt, z.v);
    if (selected) *selected = z.pt;
  } else {
    t.energy = h0;
  }
  if (sets_out) *sets_out = sets;
  return t;
}

Transition vlt_chmc_iteration(const TemperedMetric& m, double eps, double tau, Vector& theta,
                              Rng& rng, const VltOptions& options, VltSets* sets) {
  const MetricPoint pt0 = evaluate(m, theta);
  const Vector v0 = momentum_to_velocity(m, pt0, sample_momentum(m, pt0, rng));
  Transition t = vlt_chmc_from(m, pt0, v0, eps, tau, theta, rng, options, sets);
  t.grad_evals += 1;
  return t;
}

// Kernels.

Kernel::Kernel(double eps, double tau, double delta) : eps_(eps), tau_(tau), delta_(delta) {
  set_step_size(eps);
  set_tuning_target(delta);
}

void Kernel::set_step_size(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw std::invalid_argument("kernel: step size must be positive and finite");
  }
  eps_ = eps;
}

void Kernel::set_path_length(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("kernel: path length must be positive and finite");
  }
  tau_ = tau;
}

void Kernel::set_tuning_target(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("kernel: tuning target must lie in (0, 1)");
  }
  delta_ = delta;
}

int steps_for_path_length(double tau, double eps) {
  const double n = std::ceil(tau / eps - 1e-9);
  if (!(n < 1e9)) throw std::invalid_argument("path length / step size is too large");
  return std::max(1, static_cast<int>(n));
}

HmcKernel::HmcKernel(TargetPtr target, double eps, double tau, double delta)
    : Kernel(eps, tau, delta), target_(std::move(target)) {
  set_path_length(tau);
}

Transition HmcKernel::transition(Vector& theta, Rng& rng) {
  return hmc_core(*target_, eps_, steps_for_path_length(tau_, eps_), theta, rng, cache_);
}

std::unique_ptr<Kernel> HmcKernel::clone() const {
  auto k = std::make_unique<HmcKernel>(*this);
  k->cache_.reset();
  return k;
}

NutsKernel::NutsKernel(TargetPtr target, double eps, double delta, int max_depth)
    : Kernel(eps, 1.0, delta), target_(std::move(target)), max_depth_(max_depth) {
  if (max_depth_ < 1) throw std::invalid_argument("nuts: max_depth must be >= 1");
}

Transition NutsKernel::transition(Vector& theta, Rng& rng) {
  return nuts_transition(*target_, eps_, theta, rng, max_depth_, cache_);
}

std::unique_ptr<Kernel> NutsKernel::clone() const {
  auto k = std::make_unique<NutsKernel>(*this);
  k->cache_.reset();
  return k;
}

TemperedKernel::TemperedKernel(TemperedMetric metric, DirectionPolicy policy, double eps,
                               double tau, double delta)
    : Kernel(eps, tau, delta), metric_(std::move(metric)), policy_(policy) {}

TemperedMetric TemperedKernel::iteration_metric(Rng& rng) const {
  if (policy_ == DirectionPolicy::RandomPerIteration &&
      metric_.kind() == MetricKind::Directional) {
    return metric_.with_direction(random_unit_vector(rng, metric_.dim()));
  }
  return metric_;
}

const MetricPoint& TemperedKernel::point_at(const TemperedMetric& m, const Vector& theta,
                                            int& grads) {
  // MetricPoint does not depend on the direction, so the cache survives a
  // per-iteration direction change.
  if (!cache_ || cache_->theta != theta) {
    cache_ = evaluate(m, theta);
    grads += 1;
  }
  return *cache_;
}

ChmcKernel::ChmcKernel(TemperedMetric metric, double eps, double tau, DirectionPolicy policy,
                       double delta)
    : TemperedKernel(std::move(metric), policy, eps, tau, delta) {
  set_path_length(tau);
}

Transition ChmcKernel::transition(Vector& theta, Rng& rng) {
  const TemperedMetric m = iteration_metric(rng);
  int grads = 0;
  const MetricPoint pt0 = point_at(m, theta, grads);
  Transition t = chmc_core(m, pt0, eps_, steps_for_path_length(tau_, eps_), theta, rng, &cache_);
  t.grad_evals += grads;
  return t;
}

std::unique_ptr<Kernel> ChmcKernel::clone() const {
  auto k = std::make_unique<ChmcKernel>(*this);
  k->cache_.reset();
  return k;
}

VltChmcKernel::VltChmcKernel(TemperedMetric metric, double eps, double tau,
                             DirectionPolicy policy, double delta, VltOptions options)
    : TemperedKernel(std::move(metric), policy, eps, tau, delta), options_(options) {
  set_path_length(tau);
}

Transition VltChmcKernel::transition(Vector& theta, Rng& rng) {
  const TemperedMetric m = iteration_metric(rng);
  int grads = 0;
  const MetricPoint pt0 = point_at(m, theta, grads);
  const Vector v0 = momentum_to_velocity(m, pt0, sample_momentum(m, pt0, rng));
  MetricPoint selected;
  Transition t =
      vlt_chmc_from(m, pt0, v0, eps_, tau_, theta, rng, options_, &last_, &selected);
  if (last_.verified && !last_.inclusions_hold) ++verify_failures_;
  t.grad_evals += grads;
  if (t.accepted) cache_ = std::move(selected);
  return t;
}

std::unique_ptr<Kernel> VltChmcKernel::clone() const {
  auto k = std::make_unique<VltChmcKernel>(*this);
  k->cache_.reset();
  return k;
}

MmalaKernel::MmalaKernel(TemperedMetric metric, double eps, double delta)
    : TemperedKernel(std::move(metric), DirectionPolicy::Fixed, eps, 1.0, delta) {}

Transition MmalaKernel::transition(Vector& theta, Rng& rng) {
  int grads = 0;
  const MetricPoint pt0 = point_at(metric_, theta, grads);
  Transition t = mmala_core(metric_, pt0, eps_, theta, rng, &cache_);
  t.grad_evals += grads;
  return t;
}

std::unique_ptr<Kernel> MmalaKernel::clone() const {
  auto k = std::make_unique<MmalaKernel>(*this);
  k->cache_.reset();
  return k;
}

ChainRecord run_chain(Kernel& kernel, Vector theta0, int n_samples, int burn_in,
                      std::uint64_t seed) {
  if (n_samples < 0 || burn_in < 0) {
    throw std::invalid_argument("run_chain: sample counts must be nonnegative");
  }
  require_dim(theta0, kernel.target().dim(), "initial state");
  ChainRecord rec;
  rec.seed = seed;
  rec.kernel_name = kernel.name();
  Rng rng(seed);
  Vector theta = std::move(theta0);
  for (int i = 0; i < burn_in; ++i) {
    rec.burn_in_grad_evals += kernel.transition(theta, rng).grad_evals;
  }
  rec.samples.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const Transition t = kernel.transition(theta, rng);
    rec.append(theta, t);
  }
  return rec;
}

}  // namespace gthmc
