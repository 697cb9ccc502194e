#include "doctest.h"

#include <cmath>

#include "gthmc/samplers.hpp"

using namespace gthmc;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments first_coordinate_moments(const std::vector<Vector>& xs) {
  Moments m;
  for (const Vector& x : xs) m.mean += x[0];
  m.mean /= static_cast<double>(xs.size());
  for (const Vector& x : xs) m.var += (x[0] - m.mean) * (x[0] - m.mean);
  m.var /= static_cast<double>(xs.size());
  return m;
}

Vector point(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

// Directions that make `k` (an index into a complete tree of 2^depth leaves)
// rebuild the same tree.
std::vector<int> directions_from(int k, int depth) {
  std::vector<int> dirs;
  for (int j = 0; j < depth; ++j) dirs.push_back(((k >> j) & 1) == 0 ? 1 : -1);
  return dirs;
}

double theorem_bound(double eta0, double eta_star) {
  const double r = eta_star / eta0;
  return r < 1.0 ? r * std::floor(1.0 / r) : std::floor(r) / r;
}

}  // namespace

TEST_CASE("hmc accepts everything as eps goes to zero") {
  auto t = make_standard_gaussian(1);
  Rng rng(11);
  Vector theta = Vector::Zero(1);
  int accepted = 0;
  for (int i = 0; i < 10000; ++i) accepted += hmc_iteration(*t, 1e-3, 100, theta, rng).accepted;
  CHECK(accepted / 1e4 > 0.999);
}

TEST_CASE("hmc on a 1-d gaussian") {
  auto t = make_standard_gaussian(1);
  HmcKernel k(t, 0.2, 0.2 * 25);
  CHECK(steps_for_path_length(0.2 * 25, 0.2) == 25);
  const ChainRecord c = run_chain(k, Vector::Zero(1), 100000, 1000, 4);
  const Moments m = first_coordinate_moments(c.samples);
  CHECK(std::abs(m.mean) < 0.05);
  CHECK(m.var > 0.93);
  CHECK(m.var < 1.07);
  CHECK(c.grad_eval_total >= 25LL * 100000);
}

TEST_CASE("plain dynamics cannot climb the valley barrier") {
  auto t = make_bimodal(4.0, 0, 2);
  // K0 = 7 < 8 - log 2, aimed straight at the saddle
  LeapfrogState s = make_leapfrog_state(*t, point(-4.0, 0.0), point(std::sqrt(14.0), 0.0));
  double max_x = s.theta[0];
  for (int i = 0; i < 20000; ++i) {
    s = leapfrog_step(*t, s, 1e-3);
    max_x = std::max(max_x, s.theta[0]);
  }
  CHECK(max_x < 0.0);
  CHECK(max_x > -1.5);  // it did get most of the way up
}

TEST_CASE("nuts on a 1-d gaussian") {
  auto t = make_standard_gaussian(1);
  NutsKernel k(t, 0.5);
  const ChainRecord c = run_chain(k, Vector::Zero(1), 100000, 1000, 8);
  const Moments m = first_coordinate_moments(c.samples);
  CHECK(std::abs(m.mean) < 0.05);
  CHECK(m.var > 0.93);
  CHECK(m.var < 1.07);
}

TEST_CASE("nuts tree is the same from every member state") {
  auto t = make_bimodal(4.0, 0, 2);
  Rng rng(21);
  int checked = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const Vector theta0 = t->sample(rng);
    const Vector p0 = standard_normal(rng, 2);
    std::vector<int> dirs;
    for (int j = 0; j < 6; ++j) dirs.push_back(uniform01(rng) < 0.5 ? -1 : 1);
    const NutsTrajectory tr = build_nuts_trajectory(*t, 0.2, theta0, p0, dirs);
    if (tr.divergent) continue;
    const int size = static_cast<int>(tr.theta.size());
    REQUIRE(size == (1 << tr.depth));
    CHECK(directions_from(tr.origin, tr.depth) ==
          std::vector<int>(dirs.begin(), dirs.begin() + tr.depth));
    for (int k = 0; k < size; ++k) {
      // plus the doubling that ended the original, which extends the same side
      std::vector<int> replay = directions_from(k, tr.depth);
      if (tr.depth < static_cast<int>(dirs.size())) replay.push_back(dirs[tr.depth]);
      const NutsTrajectory again = build_nuts_trajectory(*t, 0.2, tr.theta[k], tr.p[k], replay);
      REQUIRE(again.theta.size() == tr.theta.size());
      CHECK(again.origin == k);
      CHECK(again.depth == tr.depth);
      CHECK(again.u_turn == tr.u_turn);
      double worst = 0.0;
      for (int i = 0; i < size; ++i) {
        worst = std::max(worst, (again.theta[i] - tr.theta[i]).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(again.log_weight[i] - tr.log_weight[i]));
      }
      CHECK(worst < 1e-9);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("chmc at T = 1 is hmc seed for seed") {
  auto t = make_bimodal(4.0, 0, 2);
  const auto m = TemperedMetric::isometric(t, 1.0);
  REQUIRE(m.is_flat());
  Rng a(5), b(5);
  Vector x = point(-3.0, 0.5), y = x;
  for (int i = 0; i < 300; ++i) {
    const Transition ta = hmc_iteration(*t, 0.3, 12, x, a);
    const Transition tb = chmc_iteration(m, 0.3, 12, y, b);
    REQUIRE(ta.accepted == tb.accepted);
    CHECK(ta.accept_prob == doctest::Approx(tb.accept_prob).epsilon(1e-10));
    REQUIRE((x - y).cwiseAbs().maxCoeff() < 1e-12);
    y = x;  // keep roundoff from compounding
  }
}

TEST_CASE("chmc acceptance tends to the eta ratio") {
  auto t = make_bimodal(4.0, 0, 2);
  const auto m = TemperedMetric::isometric(t, 5.0);
  Rng rng(31);
  const double eps = 5e-4;
  const int n = 1000;
  int used = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 30; ++rep) {
    Vector theta = t->sample(rng);
    const MetricPoint pt0 = evaluate(m, theta);
    Rng replay = rng;
    const Vector v0 = momentum_to_velocity(m, pt0, sample_momentum(m, pt0, replay));
    const Transition tr = chmc_iteration(m, eps, n, theta, rng);
    if (tr.failed) continue;
    const PathResult path = integrate_path(m, pt0.theta, v0, eps, n);
    const double limit = std::min(1.0, path.final_point.eta() / pt0.eta());
    worst = std::max(worst, std::abs(tr.accept_prob - limit));
    ++used;
  }
  CHECK(used >= 25);
  CHECK(worst < 0.05);
}

TEST_CASE("chmc mode weights at T = 5") {
  auto t = make_bimodal(4.0, 0, 2);
  ChmcKernel k(TemperedMetric::isometric(t, 5.0), 0.25, 2.0);
  const ChainRecord c = run_chain(k, point(-4.0, 0.0), 200000, 2000, 17);
  double right = 0.0;
  for (const Vector& x : c.samples) right += x[0] > 0.0;
  right /= static_cast<double>(c.size());
  CHECK(right == doctest::Approx(0.5).epsilon(0.06));  // 0.5 +- 0.03
  CHECK(c.accept_rate() > 0.3);
}

TEST_CASE("vlt step count") {
  auto t = make_bimodal(4.0, 0, 2);
  const auto flat = TemperedMetric::isometric(t, 1.0);
  Rng rng(2);
  const Vector v0 = standard_normal(rng, 2);
  CHECK(vlt_step_count(flat, point(-4.0, 0.0), v0, 0.0625, 1.01) == 17);
  CHECK(vlt_step_count(flat, point(-4.0, 0.0), v0, 0.1, 0.95) == 10);
  CHECK(vlt_step_count(flat, point(-4.0, 0.0), v0, 0.1, 0.95, 5) == 6);  // n_max + 1
  CHECK_THROWS_AS(vlt_step_count(flat, point(-4.0, 0.0), v0, 0.1, 0.0), std::invalid_argument);

  const auto iso = TemperedMetric::isometric(t, 15.0);
  // heading from the mode into the valley, where eta shrinks
  const Vector theta0 = point(-3.0, 0.0);
  const Vector v_in = point(1.0, 0.0);
  const double eps = 0.01, tau = 1.0;
  const int n = vlt_step_count(iso, theta0, v_in, eps, tau);
  CHECK(n > std::ceil(tau / (eps * eta(iso, theta0))));

  // near a mode eta hardly moves; twice the step, half the count
  const Vector slow = point(0.05, 0.05);
  const int n1 = vlt_step_count(iso, point(-4.0, 0.0), slow, 0.005, 0.5);
  const int n2 = vlt_step_count(iso, point(-4.0, 0.0), slow, 0.01, 0.5);
  const double ratio = static_cast<double>(n1) / n2;
  CHECK(ratio >= 1.8);
  CHECK(ratio <= 2.2);
}

TEST_CASE("vlt at T = 1 is fixed-length chmc") {
  auto t = make_bimodal(4.0, 0, 2);
  const auto m = TemperedMetric::isometric(t, 1.0);
  Rng rng(13);
  const double eps = 0.1, tau = 0.95;
  for (int rep = 0; rep < 50; ++rep) {
    Vector a = t->sample(rng), b = a;
    Rng ra = rng, rb = rng;
    VltSets sets;
    const Transition tv = vlt_chmc_iteration(m, eps, tau, a, ra, {}, &sets);
    const Transition tc = chmc_iteration(m, eps, 10, b, rb);
    CHECK(sets.forward_step_count == 10);
    CHECK(sets.s_begin == 0);
    CHECK(sets.s_end == 0);
    CHECK(sets.s_star_begin == sets.s_star_end);
    CHECK(tv.accept_prob == doctest::Approx(tc.accept_prob).epsilon(1e-10));
    if (tv.accepted && tc.accepted) CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    rng.discard(3);
  }
}

TEST_CASE("vlt set relations hold under re-integration") {
  auto t = make_bimodal(4.0, 0, 2);
  int wide = 0;
  for (double gamma : {0.5, 1.0}) {
    const auto m = gamma == 0.5 ? TemperedMetric::isometric(t, 15.0)
                                : TemperedMetric::directional(t, 15.0, gamma, point(1, 0));
    VltOptions opt;
    opt.verify = true;
    VltChmcKernel k(m, 0.03, 1.0, DirectionPolicy::Fixed, 0.9, opt);
    Rng rng(99);
    Vector theta = point(-4.0, 0.0);
    int accepted = 0, failed = 0;
    for (int i = 0; i < 60; ++i) {
      const Transition tr = k.transition(theta, rng);
      accepted += tr.accepted;
      if (tr.failed) {
        ++failed;
        continue;
      }
      const VltSets& s = k.last_sets();
      CHECK(s.verified);
      CHECK(s.inclusions_hold);
      if (s.s_end - s.s_begin + s.s_star_end - s.s_star_begin > 2) ++wide;
    }
    CHECK(k.verification_failures() == 0);
    CHECK(failed < 5);
    CHECK(accepted > 40);
  }
  // near a mode the isometric sets are mostly singletons, directional ones are not
  CHECK(wide > 10);
}

TEST_CASE("vlt acceptance and cost against the theorem") {
  auto t = make_bimodal(4.0, 0, 2);
  const auto m = TemperedMetric::isometric(t, 15.0);
  Rng rng(3);
  double acc = 0.0, bound = 0.0;
  int n = 0, over = 0;
  for (int rep = 0; rep < 150; ++rep) {
    Vector theta = t->sample(rng);
    VltSets s;
    const Transition tr = vlt_chmc_iteration(m, 0.01, 1.0, theta, rng, {}, &s);
    if (tr.failed) continue;
    acc += s.accept_prob;
    bound += theorem_bound(s.eta0, s.eta_star);
    const double r = s.eta_star / s.eta0;
    const int extra = std::max(static_cast<int>(std::floor(1.0 / r)),
                               static_cast<int>(std::floor(r)));
    // states of S between z_0 and z_N come for free, so this is only an upper bound
    if (s.total_steps > s.forward_step_count + extra + 1 + 2) ++over;
    CHECK(tr.grad_evals == s.total_steps + 1);
    ++n;
  }
  REQUIRE(n > 140);
  CHECK(acc / n >= bound / n - 0.05);
  CHECK(over == 0);
}

TEST_CASE("vlt truncation rejects") {
  auto t = make_bimodal(4.0, 0, 2);
  const auto m = TemperedMetric::isometric(t, 15.0);
  VltOptions opt;
  opt.n_max = 20;
  Rng rng(1);
  Vector theta = point(-4.0, 0.0);
  VltSets s;
  const Transition tr = vlt_chmc_iteration(m, 0.01, 1.0, theta, rng, opt, &s);
  CHECK(tr.failed);
  CHECK(s.truncated);
  CHECK_FALSE(tr.accepted);
  CHECK(theta == point(-4.0, 0.0));
}

TEST_CASE("mmala with the identity metric is mala") {
  auto t = make_bimodal(4.0, 0, 2);
  const auto m = TemperedMetric::identity(t);
  Rng rng(8);
  const double eps_l = 0.7, h = eps_l * eps_l;
  auto log_q = [&](const Vector& to, const Vector& from) {
    const Vector r = to - from - 0.5 * h * t->grad_log_density(from);
    return -0.5 * r.squaredNorm() / h;
  };
  for (int rep = 0; rep < 200; ++rep) {
    Vector theta = t->sample(rng);
    const Vector start = theta;
    Rng replay = rng;
    const Vector z = standard_normal(replay, 2);
    const Vector prop = start + 0.5 * h * t->grad_log_density(start) + eps_l * z;
    const double log_ratio = t->log_density(prop) + log_q(start, prop) -
                             t->log_density(start) - log_q(prop, start);
    const Transition tr = mmala_iteration(m, eps_l, theta, rng);
    CHECK(tr.accept_prob == doctest::Approx(std::min(1.0, std::exp(log_ratio))).epsilon(1e-10));
    const Vector expected = tr.accepted ? prop : start;
    CHECK((theta - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mmala on a 1-d gaussian") {
  auto t = make_standard_gaussian(1);
  MmalaKernel k(TemperedMetric::identity(t), 0.1);
  const ChainRecord c = run_chain(k, Vector::Zero(1), 1000000, 1000, 6);
  const Moments m = first_coordinate_moments(c.samples);
  CHECK(std::abs(m.mean) < 0.05);
  CHECK(m.var > 0.93);
  CHECK(m.var < 1.07);
}

TEST_CASE("tempered mmala keeps the mode weights") {
  auto t = make_bimodal(4.0, 0, 2);
  MmalaKernel k(TemperedMetric::isometric(t, 5.0), 0.5);
  const ChainRecord c = run_chain(k, point(-4.0, 0.0), 200000, 2000, 23);
  double right = 0.0;
  for (const Vector& x : c.samples) right += x[0] > 0.0;
  right /= static_cast<double>(c.size());
  CHECK(right == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("same seed, same chain") {
  auto t = make_bimodal(4.0, 0, 2);
  std::vector<KernelPtr> kernels;
  kernels.push_back(std::make_unique<HmcKernel>(t, 0.3, 3.0));
  kernels.push_back(std::make_unique<NutsKernel>(t, 0.3));
  kernels.push_back(std::make_unique<ChmcKernel>(TemperedMetric::isometric(t, 10.0), 0.2, 2.0));
  kernels.push_back(std::make_unique<ChmcKernel>(
      TemperedMetric::directional(t, 10.0, 0.75, point(1, 0)), 0.2, 2.0,
      DirectionPolicy::RandomPerIteration));
  kernels.push_back(
      std::make_unique<VltChmcKernel>(TemperedMetric::isometric(t, 10.0), 0.05, 1.0));
  kernels.push_back(std::make_unique<MmalaKernel>(TemperedMetric::isometric(t, 10.0), 0.4));
  for (const auto& k : kernels) {
    auto k2 = k->clone();
    const ChainRecord a = run_chain(*k, point(-4.0, 0.0), 300, 50, 1234);
    const ChainRecord b = run_chain(*k2, point(-4.0, 0.0), 300, 50, 1234);
    const ChainRecord c = run_chain(*k, point(-4.0, 0.0), 300, 50, 1235);
    REQUIRE(a.size() == 300);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      same = same && a.samples[i] == b.samples[i] && a.energies[i] == b.energies[i];
      differs = differs || a.samples[i] != c.samples[i];
    }
    CHECK(same);
    CHECK(a.grad_eval_total == b.grad_eval_total);
    CHECK(a.accept_flags == b.accept_flags);
    CHECK(differs);
    CHECK(a.kernel_name == k->name());
  }
}

TEST_CASE("chain bookkeeping") {
  auto t = make_standard_gaussian(2);
  HmcKernel k(t, 0.2, 1.0);
  const ChainRecord c = run_chain(k, Vector::Zero(2), 100, 20, 1);
  long long sum = 0;
  for (int g : c.grad_evals) sum += g;
  CHECK(c.grad_eval_total == sum);
  CHECK(c.burn_in_grad_evals > 0);
  CHECK(c.accept_flags.size() == 100);
  CHECK(c.seed == 1);
  CHECK_THROWS_AS(k.set_step_size(0.0), std::invalid_argument);
  CHECK_THROWS_AS(k.set_step_size(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(run_chain(k, Vector::Zero(3), 10, 0, 1), std::invalid_argument);
}

TEST_CASE("random unit vectors") {
  Rng rng(4);
  Vector mean = Vector::Zero(3);
  for (int i = 0; i < 20000; ++i) {
    const Vector u = random_unit_vector(rng, 3);
    CHECK(u.norm() == doctest::Approx(1.0).epsilon(1e-12));
    mean += u;
  }
  CHECK((mean / 20000).norm() < 0.02);
}
