#include "doctest.h"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "gthmc/metrics.hpp"

using namespace gthmc;

namespace {

TargetPtr bimodal() { return make_bimodal(4.0, 0, 2); }

TargetPtr skewed_mixture(Eigen::Index d) {
  Vector m1 = Vector::Constant(d, -1.0);
  Vector m2 = Vector::LinSpaced(d, 0.5, 2.0);
  Matrix c1 = Matrix::Identity(d, d) * 0.7;
  Matrix c2 = Matrix::Identity(d, d);
  for (Eigen::Index i = 0; i + 1 < d; ++i) c2(i, i + 1) = c2(i + 1, i) = 0.3;
  return std::make_shared<GaussianMixture>(std::vector<double>{0.4, 0.6},
                                           std::vector<Vector>{m1, m2},
                                           std::vector<Matrix>{c1, c2});
}

// Gamma^k assembled from central differences of G and eta alone.
std::vector<Matrix> finite_difference_gamma(const TemperedMetric& m, const Vector& theta,
                                            double h = 1e-5) {
  const Eigen::Index d = m.dim();
  auto metric_at = [&](const Vector& t) { return dense_metric(m, evaluate(m, t)); };
  auto eta_at = [&](const Vector& t) { return evaluate(m, t).eta(); };
  std::vector<Matrix> dG(d);
  std::vector<Matrix> dGeta(d);  // d/dtheta_i (G / eta)
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    dG[i] = (metric_at(tp) - metric_at(tm)) / (2 * h);
    dGeta[i] = (metric_at(tp) / eta_at(tp) - metric_at(tm) / eta_at(tm)) / (2 * h);
  }
  const Matrix ginv = metric_at(theta).inverse();
  const double eta = eta_at(theta);
  std::vector<Matrix> gamma(d, Matrix::Zero(d, d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector w(d);
      for (Eigen::Index l = 0; l < d; ++l) {
        w[l] = 0.5 * dG[l](i, j) - 0.5 * eta * dGeta[i](l, j) - 0.5 * eta * dGeta[j](l, i);
      }
      const Vector col = ginv * w;
      for (Eigen::Index k = 0; k < d; ++k) gamma[k](i, j) = col[k];
    }
  }
  return gamma;
}

double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("metric exponents and log-space scalars") {
  auto t = bimodal();
  const auto iso = TemperedMetric::isometric(t, 5.0);
  CHECK(iso.exponent_parallel() == doctest::Approx(2.0 / 2.0 * (1.0 - 0.2)));
  CHECK(iso.exponent_perp() == iso.exponent_parallel());
  const auto dir = TemperedMetric::directional(t, 5.0, 0.75, Vector::Unit(2, 0));
  CHECK(dir.exponent_parallel() == doctest::Approx(2 * 0.75 * 0.8));
  CHECK(dir.exponent_perp() == doctest::Approx(2 * 0.25 / 1.0 * 0.8));

  Vector far(2);
  far << 40.0, 0.0;  // log pi about -650: pi itself underflows, the metric must not
  const MetricPoint pt = evaluate(dir, far);
  CHECK(std::isfinite(pt.log_g_par));
  CHECK(pt.log_g_par < -700.0);
  CHECK(std::isfinite(log_det_metric(dir, pt)));

  CHECK_THROWS_AS(TemperedMetric::isometric(t, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(TemperedMetric::directional(t, 2.0, 1.5, Vector::Unit(2, 0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(TemperedMetric::directional(make_standard_gaussian(1), 2.0, 0.5,
                                              Vector::Ones(1)),
                  std::invalid_argument);
}

TEST_CASE("log|G| / 2 - (1 - 1/T) log pi is identically zero") {
  auto t = skewed_mixture(4);
  Rng rng(3);
  for (const auto& m : {TemperedMetric::isometric(t, 7.0),
                        TemperedMetric::directional(t, 7.0, 0.6, Vector::Ones(4))}) {
    for (int rep = 0; rep < 20; ++rep) {
      const Vector theta = 2.0 * standard_normal(rng, 4);
      const MetricPoint pt = evaluate(m, theta);
      const double c = 0.5 * log_det_metric(m, pt) - (1.0 - 1.0 / 7.0) * pt.log_pi;
      CHECK(std::abs(c) < 1e-10);
      if (std::abs(pt.log_g_par - pt.log_g_perp) < 6.0) {
        const Matrix g = dense_metric(m, pt);
        CHECK(std::log(g.determinant()) ==
              doctest::Approx(log_det_metric(m, pt)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("identity metric has G = I and no connection term") {
  auto t = bimodal();
  const auto m = TemperedMetric::identity(t);
  Vector theta(2);
  theta << 0.3, -1.2;
  const MetricPoint pt = evaluate(m, theta);
  CHECK(dense_metric(m, pt).isApprox(Matrix::Identity(2, 2)));
  for (const Matrix& g : dense_gamma(m, theta)) CHECK(g.norm() == 0.0);
  const Vector v = Vector::Ones(2);
  const KahanSystem sys = KahanSystem::make(m, pt, v, 0.3);
  CHECK(sys.to_dense().isApprox(Matrix::Identity(2, 2)));
  CHECK(sys.log_abs_det() == 0.0);
}

TEST_CASE("analytic dense Gamma agrees with finite differences of G") {
  auto t = skewed_mixture(3);
  Rng rng(11);
  for (const auto& m : {TemperedMetric::isometric(t, 4.0),
                        TemperedMetric::directional(t, 4.0, 0.7, Vector::LinSpaced(3, 1, 2))}) {
    for (int rep = 0; rep < 5; ++rep) {
      const Vector theta = standard_normal(rng, 3);
      const auto exact = dense_gamma(m, theta);
      const auto fd = finite_difference_gamma(m, theta);
      for (std::size_t k = 0; k < exact.size(); ++k) {
        CHECK(rel_diff(exact[k], fd[k]) < 1e-6);
        CHECK((exact[k] - exact[k].transpose()).norm() < 1e-12);
      }
    }
  }
}

TEST_CASE("rank-structured I - (eps/2) v^T Gamma matches the dense oracle") {
  Rng rng(5);
  int compared = 0;
  for (Eigen::Index d : {2, 3, 6}) {
    auto t = skewed_mixture(d);
    std::vector<TemperedMetric> metrics = {TemperedMetric::isometric(t, 15.0)};
    for (double gamma : {1.0 / static_cast<double>(d), 0.5, 0.75, 0.95}) {
      metrics.push_back(
          TemperedMetric::directional(t, 15.0, gamma, standard_normal(rng, d)));
    }
    for (const auto& m : metrics) {
      for (int rep = 0; rep < 20; ++rep) {
        const Vector theta = 1.5 * standard_normal(rng, d);
        const Vector v = standard_normal(rng, d);
        const double eps = 0.3;
        const MetricPoint pt = evaluate(m, theta);
        const KahanSystem sys = KahanSystem::make(m, pt, v, eps);
        const Vector rhs = standard_normal(rng, d);
        const Vector x = sys.solve(rhs);
        const Matrix own = sys.to_dense();
        CHECK((own * x - rhs).norm() <= 1e-12 * own.norm() * std::max(1.0, x.norm()));
        // the dense oracle inverts G, so it is only trusted when G is tame
        if (std::abs(pt.log_g_par - pt.log_g_perp) > 6.0) continue;
        ++compared;
        const Matrix dense = Matrix::Identity(d, d) -
                             0.5 * eps * contract_gamma(dense_gamma(m, theta), v);
        CHECK(rel_diff(own, dense) < 1e-10);
        CHECK(sys.log_abs_det() ==
              doctest::Approx(std::log(std::abs(dense.determinant()))).epsilon(1e-10));
        CHECK((dense * x - rhs).norm() <= 1e-9 * rhs.norm());
      }
    }
  }
  CHECK(compared > 150);
}

TEST_CASE("v^T Gamma^k v* is symmetric in (v, v*)") {
  Rng rng(8);
  auto t = skewed_mixture(4);
  const auto m = TemperedMetric::directional(t, 9.0, 0.8, standard_normal(rng, 4));
  for (int rep = 0; rep < 20; ++rep) {
    const Vector theta = standard_normal(rng, 4);
    const MetricPoint pt = evaluate(m, theta);
    const Vector v = standard_normal(rng, 4);
    const Vector w = standard_normal(rng, 4);
    // eps = 2 makes the assembled matrix I - v^T Gamma
    const Matrix gv = Matrix::Identity(4, 4) - KahanSystem::make(m, pt, v, 2.0).to_dense();
    const Matrix gw = Matrix::Identity(4, 4) - KahanSystem::make(m, pt, w, 2.0).to_dense();
    CHECK((gv * w - gw * v).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, (gv * w).norm()));
  }
}

TEST_CASE("directional metric at gamma = 1/d coincides with the isometric one") {
  Rng rng(21);
  for (Eigen::Index d : {2, 3, 5}) {
    auto t = skewed_mixture(d);
    const auto iso = TemperedMetric::isometric(t, 6.0);
    const auto dir = TemperedMetric::directional(t, 6.0, 1.0 / static_cast<double>(d),
                                                 standard_normal(rng, d));
    const Vector theta = standard_normal(rng, d);
    const Vector v = standard_normal(rng, d);
    const MetricPoint pi = evaluate(iso, theta);
    const MetricPoint pd = evaluate(dir, theta);
    CHECK(rel_diff(dense_metric(dir, pd), dense_metric(iso, pi)) < 1e-10);
    CHECK(rel_diff(KahanSystem::make(dir, pd, v, 0.4).to_dense(),
                   KahanSystem::make(iso, pi, v, 0.4).to_dense()) < 1e-10);
  }
}

TEST_CASE("isometric v^T Gamma has the closed rank-2 form") {
  auto t = bimodal();
  const auto m = TemperedMetric::isometric(t, 15.0);
  Vector theta(2), v(2);
  theta << -1.0, 0.7;
  v << 0.4, -2.0;
  const MetricPoint pt = evaluate(m, theta);
  const Vector dl = m.exponent_parallel() * pt.grad_log_pi;
  const double eps = 0.2;
  const Matrix expected = (1.0 + eps / 8.0 * v.dot(dl)) * Matrix::Identity(2, 2) -
                          eps / 4.0 * dl * v.transpose() + eps / 8.0 * v * dl.transpose();
  CHECK(rel_diff(KahanSystem::make(m, pt, v, eps).to_dense(), expected) < 1e-14);
}

TEST_CASE("momentum / velocity conversions and kinetic energy") {
  Rng rng(2);
  auto t = skewed_mixture(3);
  const auto m = TemperedMetric::directional(t, 3.0, 0.75, standard_normal(rng, 3));
  for (int rep = 0; rep < 10; ++rep) {
    const Vector theta = 0.7 * standard_normal(rng, 3);
    const MetricPoint pt = evaluate(m, theta);
    const Vector p = standard_normal(rng, 3);
    const Matrix g = dense_metric(m, pt);
    const Vector v = momentum_to_velocity(m, pt, p);
    CHECK((v - pt.eta() * g.inverse() * p).norm() < 1e-10 * std::max(1.0, v.norm()));
    CHECK((velocity_to_momentum(m, pt, v) - p).norm() < 1e-10 * std::max(1.0, p.norm()));
    const double k = 0.5 * p.dot(g.inverse() * p);
    CHECK(kinetic_energy(m, pt, p) == doctest::Approx(k).epsilon(1e-10));
    CHECK(kinetic_energy_velocity(m, pt, v) == doctest::Approx(k).epsilon(1e-10));
    const Vector x = standard_normal(rng, 3);
    CHECK((apply_eta2_inverse_metric(m, pt, x) - pt.eta() * pt.eta() * g.inverse() * x).norm() <
          1e-10 * std::max(1.0, x.norm()));
    CHECK((apply_metric(m, pt, x) - g * x).norm() < 1e-10 * std::max(1.0, (g * x).norm()));
  }
}

TEST_CASE("momentum refresh has covariance G and mean kinetic energy d/2") {
  auto t = bimodal();
  Rng rng(99);
  Vector theta(2);
  theta << -2.0, 1.0;
  for (const auto& m : {TemperedMetric::identity(t), TemperedMetric::isometric(t, 10.0),
                        TemperedMetric::directional(t, 10.0, 0.75, Vector::Unit(2, 0))}) {
    const MetricPoint pt = evaluate(m, theta);
    const int n = 200000;
    Matrix cov = Matrix::Zero(2, 2);
    double k = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vector p = sample_momentum(m, pt, rng);
      cov += p * p.transpose();
      k += kinetic_energy(m, pt, p);
    }
    cov /= n;
    k /= n;
    CHECK(rel_diff(cov, dense_metric(m, pt)) < 0.02);
    CHECK(k == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("zero density under a tempered metric is a tempering singularity") {
  // uniform on the unit disc
  struct Disc final : Target {
    Eigen::Index dim() const override { return 2; }
    std::string name() const override { return "disc"; }
    double log_density_and_grad(const Vector& theta, Vector& grad) const override {
      grad = Vector::Zero(2);
      return theta.norm() < 1.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }
  };
  auto t = std::make_shared<Disc>();
  const Vector far = Vector::Constant(2, 3.0);
  CHECK_THROWS_AS(evaluate(TemperedMetric::isometric(t, 5.0), far), TemperingSingularity);
  CHECK_THROWS_AS(evaluate(TemperedMetric::identity(t), far), StepFailure);
}

TEST_CASE("singular implicit system raises a step failure") {
  auto t = bimodal();
  const auto m = TemperedMetric::isometric(t, 20.0);
  Vector theta(2);
  theta << -1.0, 0.0;
  const MetricPoint pt = evaluate(m, theta);
  // alpha = 1 + (eps/8) <v, grad log g> vanishes when eps is chosen to cancel it
  const Vector dl = m.exponent_parallel() * pt.grad_log_pi;
  Vector v = -dl.normalized();
  const double eps = -8.0 / v.dot(dl);
  CHECK_THROWS_AS(KahanSystem::make(m, pt, v, eps), StepFailure);
}

namespace {

// log pi = -8 + a . theta, so pi(0) = e^-8
struct Ramp final : Target {
  Vector a;
  explicit Ramp(Vector slope) : a(std::move(slope)) {}
  Eigen::Index dim() const override { return a.size(); }
  std::string name() const override { return "ramp"; }
  double log_density_and_grad(const Vector& theta, Vector& grad) const override {
    grad = a;
    return -8.0 + a.dot(theta);
  }
};

}  // namespace

TEST_CASE("metric scalars at pi = e^-8") {
  Vector slope(2);
  slope << 0.3, -0.2;
  auto t = std::make_shared<Ramp>(slope);
  const Vector origin = Vector::Zero(2);
  const auto iso = TemperedMetric::isometric(t, 15.0);
  CHECK(std::exp(evaluate(iso, origin).log_g_par) ==
        doctest::Approx(std::exp(-8.0 * 14.0 / 15.0)).epsilon(1e-12));
  const auto dir = TemperedMetric::directional(t, 15.0, 1.0, Vector::Unit(2, 0));
  CHECK(eta(dir, origin) == doctest::Approx(std::exp(-8.0 * 14.0 / 15.0)).epsilon(1e-12));
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    CHECK(evaluate(dir, 5.0 * standard_normal(rng, 2)).log_g_perp == 0.0);
  }
  const MetricScalars s = metric_scalars(iso, origin);
  CHECK(s.log_pi == -8.0);
  CHECK(s.log_g_par == doctest::Approx(-8.0 * 14.0 / 15.0));
}

TEST_CASE("T = 1 is the identity metric") {
  auto t = skewed_mixture(3);
  Rng rng(6);
  const Vector theta = standard_normal(rng, 3);
  const Vector p = standard_normal(rng, 3);
  for (const auto& m : {TemperedMetric::isometric(t, 1.0),
                        TemperedMetric::directional(t, 1.0, 0.8, Vector::Ones(3))}) {
    const MetricPoint pt = evaluate(m, theta);
    CHECK(pt.log_g_par == 0.0);
    CHECK(pt.log_g_perp == 0.0);
    CHECK(dense_metric(m, pt).isApprox(Matrix::Identity(3, 3)));
    CHECK(eta(m, theta) == 1.0);
    CHECK(kinetic_energy(m, pt, p) == doctest::Approx(0.5 * p.squaredNorm()));
    CHECK(solve_kahan_system(m, theta, p, 0.3, p).isApprox(p));
    CHECK(kahan_system_log_det(m, theta, p, -p, 0.3) == doctest::Approx(0.0));
    for (const Matrix& g : dense_gamma(m, theta)) CHECK(g.cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK(kinetic_energy(TemperedMetric::isometric(t, 4.0), theta, Vector::Zero(3)) == 0.0);
}

TEST_CASE("standard normal momentum at T = 1") {
  auto t = make_standard_gaussian(2);
  const auto m = TemperedMetric::isometric(t, 1.0);
  Rng rng(13);
  const Vector theta = Vector::Ones(2);
  const int n = 100000;
  Vector mean = Vector::Zero(2);
  Matrix cov = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const Vector p = sample_momentum(m, theta, rng);
    mean += p;
    cov += p * p.transpose();
  }
  mean /= n;
  cov = cov / n - mean * mean.transpose();
  CHECK(mean.cwiseAbs().maxCoeff() < 0.02);
  CHECK((cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("directional gamma = 1: u^T p has variance g_par") {
  auto t = make_bimodal(4.0, 0, 2);
  Rng rng(17);
  Vector theta(2);
  theta << -1.0, 0.5;
  const Vector u = Vector(Vector::Ones(2)).normalized();
  const auto m = TemperedMetric::directional(t, 15.0, 1.0, u);
  const MetricPoint pt = evaluate(m, theta);
  const int n = 100000;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double up = u.dot(sample_momentum(m, pt, rng));
    s2 += up * up;
  }
  CHECK(s2 / n == doctest::Approx(std::exp(pt.log_g_par)).epsilon(0.05));
}

TEST_CASE("isometric kinetic energy and eta against dense algebra") {
  auto t = make_bimodal(4.0, 0, 2);
  const auto m = TemperedMetric::isometric(t, 15.0);
  Vector theta(2);
  theta << 0.5, 1.0;
  const MetricPoint pt = evaluate(m, theta);
  const double g = std::exp(pt.log_g_par);
  const Vector p = std::sqrt(g) * Vector::Unit(2, 0);
  const Matrix gm = dense_metric(m, pt);
  CHECK(kinetic_energy(m, pt, p) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(kinetic_energy(m, pt, p) ==
        doctest::Approx(0.5 * p.dot(gm.partialPivLu().solve(p))).epsilon(1e-12));
  // spectral norm of G^{-1/2} is 1 / sqrt(smallest eigenvalue)
  Eigen::SelfAdjointEigenSolver<Matrix> es(gm);
  const double inv_sqrt_norm = 1.0 / std::sqrt(es.eigenvalues().minCoeff());
  CHECK(pt.eta() * pt.eta() * inv_sqrt_norm * inv_sqrt_norm == doctest::Approx(1.0));
}

TEST_CASE("phase-state round trip") {
  auto t = skewed_mixture(3);
  Rng rng(23);
  const auto m = TemperedMetric::directional(t, 4.0, 0.75, standard_normal(rng, 3));
  for (int rep = 0; rep < 10; ++rep) {
    const MetricPoint pt = evaluate(m, 0.5 * standard_normal(rng, 3));
    const PhaseState s{pt.theta, standard_normal(rng, 3), Representation::Momentum};
    const PhaseState v = to_velocity(m, pt, s);
    CHECK(v.representation == Representation::Velocity);
    const PhaseState back = to_momentum(m, pt, v);
    CHECK(back.representation == Representation::Momentum);
    CHECK((back.conjugate - s.conjugate).norm() <= 1e-12 * s.conjugate.norm());
    CHECK(to_velocity(m, pt, v).conjugate == v.conjugate);
  }
}

TEST_CASE("isometric dense Gamma equals its closed form") {
  auto t = make_bimodal(4.0, 0, 2);
  const auto m = TemperedMetric::isometric(t, 15.0);
  Rng rng(29);
  for (int rep = 0; rep < 10; ++rep) {
    const Vector theta = 2.0 * standard_normal(rng, 2);
    const Vector dl = m.exponent_parallel() * t->grad_log_density(theta);
    const auto gamma = dense_gamma(m, theta);
    for (Eigen::Index k = 0; k < 2; ++k) {
      const Vector ek = Vector::Unit(2, k);
      const Matrix expected = 0.5 * dl[k] * Matrix::Identity(2, 2) -
                              0.25 * dl * ek.transpose() - 0.25 * ek * dl.transpose();
      CHECK((gamma[k] - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("directional gamma = 1 v^T Gamma matches its published closed form") {
  Rng rng(31);
  for (Eigen::Index d : {2, 3, 5}) {
    auto t = skewed_mixture(d);
    const Vector u = standard_normal(rng, d).normalized();
    const auto m = TemperedMetric::directional(t, 5.0, 1.0, u);
    for (int rep = 0; rep < 10; ++rep) {
      const MetricPoint pt = evaluate(m, 0.5 * standard_normal(rng, d));
      const Vector v = standard_normal(rng, d);
      const Vector l = m.exponent_parallel() * pt.grad_log_pi;
      const double g = std::exp(pt.log_g_par);
      const double vu = v.dot(u);
      const Matrix closed =
          0.25 * v.dot(l) * Matrix::Identity(d, d) + 0.5 * (0.5 * v - vu * u) * l.transpose() +
          0.5 * ((1.0 - g) * vu * u.dot(l) * u + g * vu * l - v.dot(l) * u) * u.transpose();
      const Matrix fast = Matrix::Identity(d, d) - KahanSystem::make(m, pt, v, 2.0).to_dense();
      CHECK(rel_diff(fast, closed) < 1e-10);
    }
  }
}

TEST_CASE("structured form stays accurate when g_par / g_perp is extreme") {
  auto t = make_bimodal(4.0, 0, 2);
  const Vector u = Vector::Unit(2, 0);
  const auto m = TemperedMetric::directional(t, 20.0, 1.0, u);
  Rng rng(41);
  for (int rep = 0; rep < 50; ++rep) {
    Vector theta(2);
    theta << 2.0 * standard_normal(rng, 1)[0], 5.0 + 3.0 * uniform01(rng);
    const MetricPoint pt = evaluate(m, theta);
    REQUIRE(pt.log_g_par - pt.log_g_perp < -25.0);
    const Vector v = standard_normal(rng, 2);
    const Vector l = m.exponent_parallel() * pt.grad_log_pi;
    const double g = std::exp(pt.log_g_par);
    const double vu = v.dot(u);
    const Matrix closed =
        0.25 * v.dot(l) * Matrix::Identity(2, 2) + 0.5 * (0.5 * v - vu * u) * l.transpose() +
        0.5 * ((1.0 - g) * vu * u.dot(l) * u + g * vu * l - v.dot(l) * u) * u.transpose();
    const Matrix fast = Matrix::Identity(2, 2) - KahanSystem::make(m, pt, v, 2.0).to_dense();
    CHECK(rel_diff(fast, closed) < 1e-12);
  }
}

TEST_CASE("Jacobian log-determinant against dense assembly") {
  Rng rng(37);
  for (const Eigen::Index d : {2, 4}) {
    auto t = skewed_mixture(d);
    for (const auto& m : {TemperedMetric::isometric(t, 10.0),
                          TemperedMetric::directional(t, 10.0, 0.75, standard_normal(rng, d))}) {
      for (int rep = 0; rep < 10; ++rep) {
        const Vector theta = 0.7 * standard_normal(rng, d);
        const Vector v = standard_normal(rng, d);
        const Vector vs = standard_normal(rng, d);
        const double eps = 0.25;
        const Matrix vg = contract_gamma(dense_gamma(m, theta), v);
        const Matrix vsg = contract_gamma(dense_gamma(m, theta), vs);
        const Matrix jac = (Matrix::Identity(d, d) - 0.5 * eps * vg).inverse() *
                           (Matrix::Identity(d, d) + 0.5 * eps * vsg);
        CHECK(std::abs(kahan_system_log_det(m, theta, v, vs, eps) -
                       std::log(std::abs(jac.determinant()))) < 1e-8);
        CHECK(kahan_system_log_det(m, theta, v, vs, 0.0) == 0.0);
      }
    }
  }
}
