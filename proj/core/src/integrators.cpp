#include "gthmc/integrators.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace gthmc {

namespace {

void check_gradient(const Vector& grad, double log_pi) {
  if (!grad.allFinite() || std::isnan(log_pi)) {
    throw StepFailure("leapfrog: gradient is not finite");
  }
}

}  // namespace

LeapfrogState make_leapfrog_state(const Target& target, Vector theta, Vector p) {
  require_dim(theta, target.dim(), "leapfrog position");
  require_dim(p, target.dim(), "leapfrog momentum");
  LeapfrogState s;
  s.theta = std::move(theta);
  s.p = std::move(p);
  s.log_pi = target.log_density_and_grad(s.theta, s.grad_log_pi);
  check_gradient(s.grad_log_pi, s.log_pi);
  return s;
}

LeapfrogState leapfrog_step(const Target& target, const LeapfrogState& s, double eps) {
  LeapfrogState out;
  Vector p_half = s.p + 0.5 * eps * s.grad_log_pi;
  out.theta = s.theta + eps * p_half;
  out.log_pi = target.log_density_and_grad(out.theta, out.grad_log_pi);
  check_gradient(out.grad_log_pi, out.log_pi);
  out.p = p_half + 0.5 * eps * out.grad_log_pi;
  return out;
}

PhaseState leapfrog_step(const Target& target, const Vector& theta, const Vector& p,
                         double eps) {
  const LeapfrogState s1 = leapfrog_step(target, make_leapfrog_state(target, theta, p), eps);
  return {s1.theta, s1.p, Representation::Momentum};
}

Vector half_kick(const TemperedMetric& m, const MetricPoint& pt, const Vector& v,
                 double eps, double& log_jacobian) {
  const double h = 0.5 * eps;
  const Vector force =
      apply_eta2_inverse_metric(m, pt, pt.grad_log_pi) * (h / m.temperature());
  if (m.kind() == MetricKind::Identity) return v + force;
  const KahanSystem sys = KahanSystem::make(m, pt, v, eps);
  Vector v_star = sys.solve(v + force);
  if (!v_star.allFinite()) throw StepFailure("adaptive step: velocity is not finite");
  const KahanSystem back = KahanSystem::make(m, pt, v_star, -eps);
  log_jacobian += back.log_abs_det() - sys.log_abs_det();
  return v_star;
}

IntegratorStepResult adaptive_step(const TemperedMetric& m, const MetricPoint& pt0,
                                   const Vector& v0, double eps) {
  require_dim(v0, m.dim(), "velocity");
  IntegratorStepResult r;
  const Vector v_half = half_kick(m, pt0, v0, eps, r.log_jacobian);
  const Vector theta1 = pt0.theta + eps * v_half;
  r.point1 = evaluate(m, theta1);
  r.grad_evals = 1;
  Vector v1 = half_kick(m, r.point1, v_half, eps, r.log_jacobian);
  r.state1 = {theta1, std::move(v1), Representation::Velocity};
  return r;
}

IntegratorStepResult adaptive_step(const TemperedMetric& m, const Vector& theta0,
                                   const Vector& v0, double eps) {
  IntegratorStepResult r = adaptive_step(m, evaluate(m, theta0), v0, eps);
  r.grad_evals += 1;
  return r;
}

PathStepFailure::PathStepFailure(int step, const std::string& what)
    : StepFailure("step " + std::to_string(step) + ": " + what), step_(step) {}

PathResult integrate_path(const TemperedMetric& m, const Vector& theta0, const Vector& v0,
                          double eps, int n_steps, bool keep_trajectory) {
  if (n_steps < 1) throw std::invalid_argument("integrate_path: n_steps must be >= 1");
  PathResult out;
  MetricPoint pt = evaluate(m, theta0);
  out.grad_evals = 1;
  Vector v = v0;
  if (keep_trajectory) {
    out.trajectory.push_back({theta0, v0, Representation::Velocity});
    out.log_pi.push_back(pt.log_pi);
  }
  for (int i = 0; i < n_steps; ++i) {
    try {
      IntegratorStepResult r = adaptive_step(m, pt, v, eps);
      out.total_log_jacobian += r.log_jacobian;
      out.grad_evals += r.grad_evals;
      pt = std::move(r.point1);
      v = std::move(r.state1.conjugate);
    } catch (const StepFailure& e) {
      throw PathStepFailure(i, e.what());
    }
    if (keep_trajectory) {
      out.trajectory.push_back({pt.theta, v, Representation::Velocity});
      out.log_pi.push_back(pt.log_pi);
    }
  }
  out.final_state = {pt.theta, v, Representation::Velocity};
  out.final_point = std::move(pt);
  return out;
}

MassLeapfrogPath leapfrog_path_with_mass(const Target& target, const Matrix& inverse_mass,
                                         const Vector& theta0, const Vector& p0,
                                         double eps, int n_steps) {
  MassLeapfrogPath path;
  Vector theta = theta0;
  Vector p = p0;
  Vector grad;
  double lp = target.log_density_and_grad(theta, grad);
  check_gradient(grad, lp);
  path.theta.push_back(theta);
  path.p.push_back(p);
  for (int i = 0; i < n_steps; ++i) {
    p += 0.5 * eps * grad;
    theta += eps * (inverse_mass * p);
    lp = target.log_density_and_grad(theta, grad);
    check_gradient(grad, lp);
    p += 0.5 * eps * grad;
    path.theta.push_back(theta);
    path.p.push_back(p);
  }
  return path;
}

LinearPullback::LinearPullback(TargetPtr base, Matrix map)
    : base_(std::move(base)), map_(std::move(map)) {
  if (!base_ || map_.rows() != base_->dim()) {
    throw std::invalid_argument("LinearPullback: map rows must match target dimension");
  }
}

double LinearPullback::log_density_and_grad(const Vector& x, Vector& grad) const {
  Vector g;
  const double lp = base_->log_density_and_grad(map_ * x, g);
  grad = map_.transpose() * g;
  return lp;
}

double reparametrization_check(const Matrix& sigma, const TargetPtr& target,
                               const Vector& theta0, const Vector& p0, double eps,
                               int n_steps) {
  const Eigen::Index d = target->dim();
  if (sigma.rows() != d || sigma.cols() != d) {
    throw std::invalid_argument("reparametrization_check: Sigma has the wrong shape");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("reparametrization_check: Sigma must be SPD");
  }
  const Matrix& q = eig.eigenvectors();
  const Vector sq = eig.eigenvalues().cwiseSqrt();
  const Matrix root = q * sq.asDiagonal() * q.transpose();
  const Matrix inv_root = q * sq.cwiseInverse().asDiagonal() * q.transpose();

  // x = Sigma^{-1/2} theta, p_x = (D x^{-1})^T p = Sigma^{1/2} p
  const LinearPullback pulled(target, root);
  const MassLeapfrogPath flat = leapfrog_path_with_mass(
      pulled, Matrix::Identity(d, d), inv_root * theta0, root * p0, eps, n_steps);
  // G = Sigma^{-1}, so the kinetic term is p^T Sigma p / 2
  const MassLeapfrogPath curved =
      leapfrog_path_with_mass(*target, sigma, theta0, p0, eps, n_steps);

  double dev = 0.0;
  for (std::size_t i = 0; i < flat.theta.size(); ++i) {
    dev = std::max(dev, (root * flat.theta[i] - curved.theta[i]).cwiseAbs().maxCoeff());
    dev = std::max(dev, (inv_root * flat.p[i] - curved.p[i]).cwiseAbs().maxCoeff());
  }
  return dev;
}

}  // namespace gthmc
