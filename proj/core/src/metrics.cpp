#include "gthmc/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gthmc {

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Identity: return "identity";
    case MetricKind::Isometric: return "isometric";
    case MetricKind::Directional: return "directional";
  }
  return "unknown";
}

TemperedMetric::TemperedMetric(TargetPtr target, MetricKind kind, double temperature,
                               double gamma, Vector direction)
    : target_(std::move(target)),
      kind_(kind),
      temperature_(temperature),
      gamma_(gamma),
      direction_(std::move(direction)),
      exp_par_(0.0),
      exp_perp_(0.0) {
  if (!target_) throw std::invalid_argument("metric: null target");
  if (!(temperature_ >= 1.0) || !std::isfinite(temperature_)) {
    throw std::invalid_argument("metric: temperature must be finite and >= 1");
  }
  const double d = static_cast<double>(target_->dim());
  const double heat = 1.0 - 1.0 / temperature_;
  require_dim(direction_, target_->dim(), "metric direction");
  const double norm = direction_.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("metric: direction must be a nonzero finite vector");
  }
  direction_ /= norm;
  switch (kind_) {
    case MetricKind::Identity:
      break;
    case MetricKind::Isometric:
      exp_par_ = exp_perp_ = 2.0 / d * heat;
      break;
    case MetricKind::Directional:
      if (target_->dim() < 2) {
        throw std::invalid_argument("directional metric needs dim >= 2");
      }
      // 1/d itself is allowed: it reproduces the isometric metric
      if (!(gamma_ * d >= 1.0 - 1e-12 && gamma_ <= 1.0)) {
        throw std::invalid_argument("directional metric: gamma must lie in [1/d, 1]");
      }
      exp_par_ = 2.0 * gamma_ * heat;
      exp_perp_ = 2.0 * (1.0 - gamma_) / (d - 1.0) * heat;
      break;
  }
}

TemperedMetric TemperedMetric::identity(TargetPtr target) {
  const auto d = target ? target->dim() : 1;
  return TemperedMetric(std::move(target), MetricKind::Identity, 1.0, 0.5,
                        Vector::Unit(d, 0));
}

TemperedMetric TemperedMetric::isometric(TargetPtr target, double temperature) {
  const auto d = target ? target->dim() : 1;
  return TemperedMetric(std::move(target), MetricKind::Isometric, temperature, 0.5,
                        Vector::Unit(d, 0));
}

TemperedMetric TemperedMetric::directional(TargetPtr target, double temperature,
                                           double gamma, Vector direction) {
  return TemperedMetric(std::move(target), MetricKind::Directional, temperature, gamma,
                        std::move(direction));
}

TemperedMetric TemperedMetric::with_direction(Vector direction) const {
  return TemperedMetric(target_, kind_, temperature_, gamma_, std::move(direction));
}

double MetricPoint::ratio() const { return std::exp(log_g_par - log_g_perp); }
double MetricPoint::eta() const { return std::exp(0.5 * log_g_par); }

double MetricScalars::g_par() const { return std::exp(log_g_par); }
double MetricScalars::g_perp() const { return std::exp(log_g_perp); }

MetricPoint evaluate(const TemperedMetric& m, const Vector& theta) {
  require_dim(theta, m.dim(), "metric position");
  MetricPoint pt;
  pt.theta = theta;
  pt.log_pi = m.target().log_density_and_grad(theta, pt.grad_log_pi);
  if (!std::isfinite(pt.log_pi)) {
    if (!m.is_flat()) throw TemperingSingularity("metric: pi(theta) is zero or not finite");
    throw StepFailure("metric: log density is not finite");
  }
  if (!pt.grad_log_pi.allFinite()) throw StepFailure("metric: gradient is not finite");
  pt.log_g_par = m.exponent_parallel() * pt.log_pi;
  pt.log_g_perp = m.exponent_perp() * pt.log_pi;
  return pt;
}

MetricScalars metric_scalars(const TemperedMetric& m, const Vector& theta) {
  require_dim(theta, m.dim(), "metric position");
  const double lp = m.target().log_density(theta);
  if (!std::isfinite(lp) && !m.is_flat()) {
    throw TemperingSingularity("metric: pi(theta) is zero or not finite");
  }
  return {m.exponent_parallel() * lp, m.exponent_perp() * lp, lp};
}

double log_det_metric(const TemperedMetric& m, const MetricPoint& pt) {
  return pt.log_g_par + static_cast<double>(m.dim() - 1) * pt.log_g_perp;
}

Matrix dense_metric(const TemperedMetric& m, const MetricPoint& pt) {
  const Vector& u = m.direction();
  const double gpar = std::exp(pt.log_g_par);
  const double gperp = std::exp(pt.log_g_perp);
  return gperp * Matrix::Identity(m.dim(), m.dim()) + (gpar - gperp) * u * u.transpose();
}

Vector apply_metric(const TemperedMetric& m, const MetricPoint& pt, const Vector& x) {
  const Vector& u = m.direction();
  const double gpar = std::exp(pt.log_g_par);
  const double gperp = std::exp(pt.log_g_perp);
  return gperp * x + (gpar - gperp) * u.dot(x) * u;
}

Vector apply_inverse_metric(const TemperedMetric& m, const MetricPoint& pt,
                            const Vector& x) {
  const Vector& u = m.direction();
  const double ipar = std::exp(-pt.log_g_par);
  const double iperp = std::exp(-pt.log_g_perp);
  return iperp * x + (ipar - iperp) * u.dot(x) * u;
}

Vector apply_eta2_inverse_metric(const TemperedMetric& m, const MetricPoint& pt,
                                 const Vector& x) {
  const Vector& u = m.direction();
  const double q = pt.ratio();
  return q * x + (1.0 - q) * u.dot(x) * u;
}

Vector sample_momentum(const TemperedMetric& m, const MetricPoint& pt, Rng& rng) {
  const Vector z = standard_normal(rng, m.dim());
  const Vector& u = m.direction();
  const double spar = std::exp(0.5 * pt.log_g_par);
  const double sperp = std::exp(0.5 * pt.log_g_perp);
  return sperp * z + (spar - sperp) * u.dot(z) * u;
}

Vector sample_momentum(const TemperedMetric& m, const Vector& theta, Rng& rng) {
  return sample_momentum(m, evaluate(m, theta), rng);
}

double kinetic_energy(const TemperedMetric& m, const MetricPoint& pt, const Vector& p) {
  require_dim(p, m.dim(), "momentum");
  const double up = m.direction().dot(p);
  const double pp = p.squaredNorm();
  return 0.5 * (std::exp(-pt.log_g_perp) * (pp - up * up) + std::exp(-pt.log_g_par) * up * up);
}

double kinetic_energy(const TemperedMetric& m, const Vector& theta, const Vector& p) {
  return kinetic_energy(m, evaluate(m, theta), p);
}

double kinetic_energy_velocity(const TemperedMetric& m, const MetricPoint& pt,
                               const Vector& v) {
  require_dim(v, m.dim(), "velocity");
  const double s = m.direction().dot(v);
  const double vv = v.squaredNorm();
  const double q = pt.ratio();
  return 0.5 * ((vv - s * s) / q + s * s);
}

double eta(const TemperedMetric& m, const Vector& theta) {
  return std::exp(0.5 * metric_scalars(m, theta).log_g_par);
}

double hamiltonian(const TemperedMetric& m, const MetricPoint& pt, const Vector& p) {
  return -pt.log_pi + 0.5 * log_det_metric(m, pt) + kinetic_energy(m, pt, p);
}

double log_joint_velocity(const TemperedMetric& m, const MetricPoint& pt,
                          const Vector& v) {
  const double log_det = log_det_metric(m, pt);
  return pt.log_pi - 0.5 * log_det - kinetic_energy_velocity(m, pt, v) + log_det -
         static_cast<double>(m.dim()) * pt.log_eta();
}

Vector momentum_to_velocity(const TemperedMetric& m, const MetricPoint& pt,
                            const Vector& p) {
  require_dim(p, m.dim(), "momentum");
  const Vector& u = m.direction();
  const double ipar = std::exp(0.5 * pt.log_g_par - pt.log_g_par);
  const double iperp = std::exp(0.5 * pt.log_g_par - pt.log_g_perp);
  return iperp * p + (ipar - iperp) * u.dot(p) * u;
}

Vector velocity_to_momentum(const TemperedMetric& m, const MetricPoint& pt,
                            const Vector& v) {
  require_dim(v, m.dim(), "velocity");
  const Vector& u = m.direction();
  const double spar = std::exp(pt.log_g_par - 0.5 * pt.log_g_par);
  const double sperp = std::exp(pt.log_g_perp - 0.5 * pt.log_g_par);
  return sperp * v + (spar - sperp) * u.dot(v) * u;
}

PhaseState to_velocity(const TemperedMetric& m, const MetricPoint& pt, const PhaseState& s) {
  if (s.representation == Representation::Velocity) return s;
  return {s.theta, momentum_to_velocity(m, pt, s.conjugate), Representation::Velocity};
}

PhaseState to_momentum(const TemperedMetric& m, const MetricPoint& pt, const PhaseState& s) {
  if (s.representation == Representation::Momentum) return s;
  return {s.theta, velocity_to_momentum(m, pt, s.conjugate), Representation::Momentum};
}

namespace {

// Accumulates  v^T Gamma = beta I + g r_g^T + v r_v^T + u r_u^T.
struct GammaTerms {
  double beta = 0.0;
  Vector rg, rv, ru;
};

GammaTerms isometric_terms(const MetricPoint& pt, const Vector& v, double e) {
  GammaTerms t;
  const Vector dl = e * pt.grad_log_pi;
  t.beta = -0.25 * v.dot(dl);
  t.rg = 0.5 * e * v;
  t.rv = -0.25 * dl;
  return t;
}

GammaTerms directional_terms(const TemperedMetric& m, const MetricPoint& pt,
                             const Vector& v) {
  const Vector& u = m.direction();
  const Vector& g = pt.grad_log_pi;
  const double epar = m.exponent_parallel();
  const double eperp = m.exponent_perp();
  const double q = pt.ratio();
  if (!std::isfinite(q) || !(q > 0.0)) throw StepFailure("metric: g_par / g_perp out of range");
  const double s = u.dot(v);
  const double ug = u.dot(g);
  const double va = epar * v.dot(g);
  const double vb = eperp * v.dot(g);
  const Vector v_perp = v - s * u;

  // v^T Gamma = beta I + g rg^T + v rv^T + u ru^T. The only 1/q term is the
  // genuine one (it vanishes with eperp); anything else would cancel badly
  // once g_par / g_perp drifts far from 1.
  GammaTerms t;
  t.beta = 0.25 * va - 0.5 * vb;
  t.rg = 0.5 * epar * q * s * u + 0.5 * eperp * v_perp;
  t.rv = (0.25 * epar - 0.5 * eperp) * g;
  const double inv_q_minus_1 = eperp == 0.0 ? 0.0 : std::expm1(pt.log_g_perp - pt.log_g_par);
  t.ru = (0.5 * s * epar * (1.0 - q) * ug + 0.5 * (vb - va)) * u +
         (0.5 * eperp * inv_q_minus_1 * ug) * v_perp + (0.5 * s * (eperp - epar)) * g;
  return t;
}

}  // namespace

KahanSystem KahanSystem::make(const TemperedMetric& m, const MetricPoint& pt,
                              const Vector& v, double eps) {
  require_dim(v, m.dim(), "velocity");
  KahanSystem sys;
  sys.dim_ = m.dim();
  const double h = 0.5 * eps;
  switch (m.kind()) {
    case MetricKind::Identity:
      sys.alpha_ = 1.0;
      sys.cols_.resize(sys.dim_, 0);
      sys.rows_.resize(sys.dim_, 0);
      break;
    case MetricKind::Isometric: {
      const GammaTerms t = isometric_terms(pt, v, m.exponent_parallel());
      sys.alpha_ = 1.0 - h * t.beta;
      sys.cols_.resize(sys.dim_, 2);
      sys.rows_.resize(sys.dim_, 2);
      sys.cols_.col(0) = pt.grad_log_pi;
      sys.rows_.col(0) = -h * t.rg;
      sys.cols_.col(1) = v;
      sys.rows_.col(1) = -h * t.rv;
      break;
    }
    case MetricKind::Directional: {
      const GammaTerms t = directional_terms(m, pt, v);
      sys.alpha_ = 1.0 - h * t.beta;
      sys.cols_.resize(sys.dim_, 3);
      sys.rows_.resize(sys.dim_, 3);
      sys.cols_.col(0) = pt.grad_log_pi;
      sys.rows_.col(0) = -h * t.rg;
      sys.cols_.col(1) = v;
      sys.rows_.col(1) = -h * t.rv;
      sys.cols_.col(2) = m.direction();
      sys.rows_.col(2) = -h * t.ru;
      break;
    }
  }
  sys.factor();
  return sys;
}

void KahanSystem::factor() {
  if (!std::isfinite(alpha_) || std::abs(alpha_) < kSingularThreshold) {
    throw StepFailure("implicit step: singular linear system");
  }
  const Eigen::Index r = cols_.cols();
  capacitance_ = Matrix::Identity(r, r) + rows_.transpose() * cols_ / alpha_;
  double small_det = 1.0;
  if (r > 0) {
    lu_.compute(capacitance_);
    small_det = lu_.determinant();
  }
  if (!std::isfinite(small_det) || std::abs(small_det) < kSingularThreshold) {
    throw StepFailure("implicit step: singular linear system");
  }
  log_abs_det_ = static_cast<double>(dim_) * std::log(std::abs(alpha_)) +
                 std::log(std::abs(small_det));
}

Vector KahanSystem::solve(const Vector& rhs) const {
  require_dim(rhs, dim_, "implicit step rhs");
  if (cols_.cols() == 0) return rhs / alpha_;
  const Vector y = lu_.solve(rows_.transpose() * rhs / alpha_);
  return (rhs - cols_ * y) / alpha_;
}

double KahanSystem::log_abs_det() const { return log_abs_det_; }

Matrix KahanSystem::to_dense() const {
  return alpha_ * Matrix::Identity(dim_, dim_) + cols_ * rows_.transpose();
}

Vector solve_kahan_system(const TemperedMetric& m, const Vector& theta, const Vector& v,
                          double eps, const Vector& rhs) {
  return KahanSystem::make(m, evaluate(m, theta), v, eps).solve(rhs);
}

double kahan_system_log_det(const TemperedMetric& m, const MetricPoint& pt,
                            const Vector& v, const Vector& v_star, double eps) {
  return KahanSystem::make(m, pt, v_star, -eps).log_abs_det() -
         KahanSystem::make(m, pt, v, eps).log_abs_det();
}

double kahan_system_log_det(const TemperedMetric& m, const Vector& theta,
                            const Vector& v, const Vector& v_star, double eps) {
  return kahan_system_log_det(m, evaluate(m, theta), v, v_star, eps);
}

std::vector<Matrix> dense_gamma(const TemperedMetric& m, const Vector& theta) {
  const MetricPoint pt = evaluate(m, theta);
  const Eigen::Index d = m.dim();
  const Vector& u = m.direction();
  const Matrix G = dense_metric(m, pt);
  const Matrix Ginv = G.inverse();
  const double gpar = std::exp(pt.log_g_par);
  const double gperp = std::exp(pt.log_g_perp);
  const double inv_eta = std::exp(-pt.log_eta());
  const Vector da = m.exponent_parallel() * pt.grad_log_pi;
  const Vector db = m.exponent_perp() * pt.grad_log_pi;
  const Matrix uu = u * u.transpose();

  // dG[l] = dG / dtheta_l
  std::vector<Matrix> dG(d);
  for (Eigen::Index l = 0; l < d; ++l) {
    dG[l] = gperp * db[l] * Matrix::Identity(d, d) + (gpar * da[l] - gperp * db[l]) * uu;
  }
  // d/dtheta_i (G_lj / eta) = dG[i](l, j) / eta - 0.5 da_i G_lj / eta
  auto dGeta = [&](Eigen::Index i, Eigen::Index l, Eigen::Index j) {
    return inv_eta * (dG[i](l, j) - 0.5 * da[i] * G(l, j));
  };
  const double eta_v = pt.eta();

  std::vector<Matrix> gamma(d, Matrix::Zero(d, d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector w(d);
      for (Eigen::Index l = 0; l < d; ++l) {
        w[l] = 0.5 * dG[l](i, j) - 0.5 * eta_v * dGeta(i, l, j) - 0.5 * eta_v * dGeta(j, l, i);
      }
      const Vector col = Ginv * w;
      for (Eigen::Index k = 0; k < d; ++k) gamma[k](i, j) = col[k];
    }
  }
  return gamma;
}

Matrix contract_gamma(const std::vector<Matrix>& gamma, const Vector& v) {
  const auto d = static_cast<Eigen::Index>(gamma.size());
  Matrix out(d, d);
  for (Eigen::Index k = 0; k < d; ++k) out.row(k) = v.transpose() * gamma[k];
  return out;
}

}  // namespace gthmc
