#include "gthmc/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gthmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// log(sum(exp(x))) together with the softmax weights.
double log_sum_exp(const std::vector<double>& x, std::vector<double>* softmax) {
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) {
    if (softmax) softmax->assign(x.size(), 0.0);
    return m;
  }
  double s = 0.0;
  if (softmax) softmax->resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = std::exp(x[k] - m);
    if (softmax) (*softmax)[k] = e;
    s += e;
  }
  if (softmax) {
    for (double& w : *softmax) w /= s;
  }
  return m + std::log(s);
}

void validate_weights(const std::vector<double>& w) {
  if (w.empty()) throw std::invalid_argument("mixture needs at least one component");
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw std::invalid_argument("mixture weights must be nonnegative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("mixture weights must sum to 1");
  }
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<double> weights,
                                 std::vector<Vector> means)
    : GaussianMixture(std::move(weights), means, [&] {
        std::vector<Matrix> covs;
        for (const auto& m : means) covs.push_back(Matrix::Identity(m.size(), m.size()));
        return covs;
      }()) {}

GaussianMixture::GaussianMixture(std::vector<double> weights,
                                 std::vector<Vector> means,
                                 std::vector<Matrix> covariances)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      covariances_(std::move(covariances)) {
  validate_weights(weights_);
  if (means_.size() != weights_.size() || covariances_.size() != weights_.size()) {
    throw std::invalid_argument("mixture: weights, means and covariances differ in length");
  }
  dim_ = means_.front().size();
  if (dim_ < 1) throw std::invalid_argument("mixture: dimension must be positive");
  for (std::size_t k = 0; k < means_.size(); ++k) {
    require_dim(means_[k], dim_, "mixture mean");
    const Matrix& cov = covariances_[k];
    if (cov.rows() != dim_ || cov.cols() != dim_) {
      throw std::invalid_argument("mixture: covariance has wrong shape");
    }
    if (!cov.isApprox(cov.transpose(), 1e-12)) {
      throw std::invalid_argument("mixture: covariance is not symmetric");
    }
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("mixture: covariance is not positive definite");
    }
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    cholesky_.push_back(std::move(llt));
    log_norm_.push_back(-0.5 * (static_cast<double>(dim_) * kLog2Pi + log_det));
    log_weights_.push_back(weights_[k] > 0.0 ? std::log(weights_[k])
                                             : -std::numeric_limits<double>::infinity());
    if (!cov.isIdentity(0.0)) identity_cov_ = false;
  }
}

double GaussianMixture::component_log_density(std::size_t k, const Vector& theta,
                                               Vector* precision_times_residual) const {
  const Vector r = theta - means_[k];
  if (identity_cov_) {
    if (precision_times_residual) *precision_times_residual = r;
    return log_norm_[k] - 0.5 * r.squaredNorm();
  }
  Vector pr = cholesky_[k].solve(r);
  const double quad = r.dot(pr);
  if (precision_times_residual) *precision_times_residual = std::move(pr);
  return log_norm_[k] - 0.5 * quad;
}

double GaussianMixture::log_density(const Vector& theta) const {
  require_dim(theta, dim_, "GaussianMixture::log_density");
  std::vector<double> terms(means_.size());
  for (std::size_t k = 0; k < means_.size(); ++k) {
    terms[k] = log_weights_[k] + component_log_density(k, theta, nullptr);
  }
  return log_sum_exp(terms, nullptr);
}

double GaussianMixture::log_density_and_grad(const Vector& theta, Vector& grad) const {
  require_dim(theta, dim_, "GaussianMixture::log_density_and_grad");
  const std::size_t n = means_.size();
  std::vector<double> terms(n);
  std::vector<Vector> pr(n);
  for (std::size_t k = 0; k < n; ++k) {
    terms[k] = log_weights_[k] + component_log_density(k, theta, &pr[k]);
  }
  std::vector<double> resp;
  const double lp = log_sum_exp(terms, &resp);
  grad = Vector::Zero(dim_);
  for (std::size_t k = 0; k < n; ++k) {
    if (resp[k] != 0.0) grad.noalias() -= resp[k] * pr[k];
  }
  return lp;
}

TargetMoments GaussianMixture::moments() const {
  Vector mean = Vector::Zero(dim_);
  Vector second = Vector::Zero(dim_);
  for (std::size_t k = 0; k < means_.size(); ++k) {
    mean += weights_[k] * means_[k];
    second += weights_[k] * (covariances_[k].diagonal() + means_[k].cwiseAbs2());
  }
  return {mean, second - mean.cwiseAbs2()};
}

double GaussianMixture::marginal_cdf(Eigen::Index coord, double x) const {
  if (coord < 0 || coord >= dim_) throw std::invalid_argument("marginal_cdf: bad coordinate");
  double c = 0.0;
  for (std::size_t k = 0; k < means_.size(); ++k) {
    const double sd = std::sqrt(covariances_[k](coord, coord));
    c += weights_[k] * normal_cdf((x - means_[k][coord]) / sd);
  }
  return c;
}

Vector GaussianMixture::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  const std::size_t k = pick(rng);
  const Vector z = standard_normal(rng, dim_);
  return means_[k] + cholesky_[k].matrixL() * z;
}

ShellMixture::ShellMixture(Eigen::Index dim, std::vector<double> radii, double sigma,
                           std::vector<double> weights)
    : dim_(dim), radii_(std::move(radii)), sigma_(sigma) {
  if (dim_ < 1) throw std::invalid_argument("ShellMixture: dimension must be positive");
  if (radii_.empty()) throw std::invalid_argument("ShellMixture: needs at least one radius");
  if (!(sigma_ > 0.0)) throw std::invalid_argument("ShellMixture: sigma must be positive");
  for (double r : radii_) {
    if (!(r > 0.0)) throw std::invalid_argument("ShellMixture: radii must be positive");
  }
  if (weights.empty()) weights.assign(radii_.size(), 1.0);
  if (weights.size() != radii_.size()) {
    throw std::invalid_argument("ShellMixture: weights and radii differ in length");
  }
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("ShellMixture: weights must be positive");
    log_weights_.push_back(std::log(w) - std::log(sigma_));
  }
}

double ShellMixture::log_radial(double r, double* dlog_dr) const {
  std::vector<double> terms(radii_.size());
  const double inv_var = 1.0 / (sigma_ * sigma_);
  for (std::size_t i = 0; i < radii_.size(); ++i) {
    const double d = r - radii_[i];
    terms[i] = log_weights_[i] - 0.5 * d * d * inv_var;
  }
  if (!dlog_dr) return log_sum_exp(terms, nullptr);
  std::vector<double> resp;
  const double lp = log_sum_exp(terms, &resp);
  double slope = 0.0;
  for (std::size_t i = 0; i < radii_.size(); ++i) slope -= resp[i] * (r - radii_[i]) * inv_var;
  *dlog_dr = slope;
  return lp;
}

double ShellMixture::log_density(const Vector& theta) const {
  require_dim(theta, dim_, "ShellMixture::log_density");
  return log_radial(theta.norm(), nullptr);
}

double ShellMixture::log_density_and_grad(const Vector& theta, Vector& grad) const {
  require_dim(theta, dim_, "ShellMixture::log_density_and_grad");
  const double r = theta.norm();
  double slope = 0.0;
  const double lp = log_radial(r, &slope);
  // Not differentiable at the origin; use the zero subgradient there.
  grad = r > 0.0 ? Vector(theta * (slope / r)) : Vector(Vector::Zero(dim_));
  return lp;
}

double ShellMixture::radial_moment(int power) const {
  // Composite Simpson over [0, max radius + 14 sigma] on the radial density
  // r^(d-1) pi(r), scaled by its maximum to stay in range.
  const double upper = *std::max_element(radii_.begin(), radii_.end()) + 14.0 * sigma_;
  const int n = 40000;
  const double h = upper / n;
  const double dm1 = static_cast<double>(dim_ - 1);
  auto log_f = [&](double r) {
    if (r <= 0.0) return dim_ == 1 ? log_radial(0.0, nullptr)
                                   : -std::numeric_limits<double>::infinity();
    return dm1 * std::log(r) + log_radial(r, nullptr);
  };
  double log_max = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) log_max = std::max(log_max, log_f(i * h));
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double r = i * h;
    const double c = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double f = std::exp(log_f(r) - log_max);
    den += c * f;
    num += c * f * std::pow(r, power);
  }
  return num / den;
}

double ShellMixture::radial_mean() const { return radial_moment(1); }
double ShellMixture::radial_second_moment() const { return radial_moment(2); }

TargetMoments ShellMixture::moments() const {
  return {Vector::Zero(dim_),
          Vector::Constant(dim_, radial_second_moment() / static_cast<double>(dim_))};
}

std::shared_ptr<GaussianMixture> make_standard_gaussian(Eigen::Index dim) {
  auto t = std::make_shared<GaussianMixture>(std::vector<double>{1.0},
                                             std::vector<Vector>{Vector::Zero(dim)});
  t->set_name("gaussian");
  return t;
}

std::shared_ptr<GaussianMixture> make_bimodal(double separation, Eigen::Index axis,
                                              Eigen::Index dim) {
  if (axis < 0 || axis >= dim) throw std::invalid_argument("make_bimodal: bad axis");
  Vector m = Vector::Zero(dim);
  m[axis] = separation;
  auto t = std::make_shared<GaussianMixture>(std::vector<double>{0.5, 0.5},
                                             std::vector<Vector>{-m, m});
  t->set_name("bimodal");
  return t;
}

std::shared_ptr<GaussianMixture> make_swiss_roll(const SwissRollParams& p) {
  if (p.components < 2) throw std::invalid_argument("swiss roll needs >= 2 components");
  std::vector<double> w(p.components, 1.0 / p.components);
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (int k = 0; k < p.components; ++k) {
    const double phi = p.max_angle * k / (p.components - 1);
    const double r = p.inner_radius + p.growth * phi;
    Vector m(2);
    m << r * std::cos(phi), r * std::sin(phi);
    means.push_back(m);
    covs.push_back(Matrix::Identity(2, 2) * (p.sigma * p.sigma));
  }
  auto t = std::make_shared<GaussianMixture>(std::move(w), std::move(means), std::move(covs));
  t->set_name("swissroll");
  return t;
}

std::shared_ptr<ShellMixture> make_donut(Eigen::Index dim, double sigma) {
  auto t = std::make_shared<ShellMixture>(dim, std::vector<double>{0.5, 1.0, 1.5}, sigma);
  t->set_name("donut" + std::to_string(dim));
  return t;
}

TargetPtr make_named_target(const std::string& key, const TargetOptions& o) {
  if (key == "gaussian") return make_standard_gaussian(o.dim > 0 ? o.dim : 2);
  if (key == "bimodal") return make_bimodal(o.separation, o.axis, o.dim > 0 ? o.dim : 2);
  if (key == "swissroll") {
    SwissRollParams p = o.swiss_roll;
    if (o.sigma > 0.0) p.sigma = o.sigma;
    return make_swiss_roll(p);
  }
  if (key.rfind("donut", 0) == 0) {
    Eigen::Index dim = o.dim > 0 ? o.dim : 25;
    if (key.size() > 5) {
      try {
        dim = std::stol(key.substr(5));
      } catch (const std::exception&) {
        throw std::invalid_argument("unknown target '" + key + "'");
      }
    }
    return make_donut(dim, o.sigma > 0.0 ? o.sigma : 0.1);
  }
  throw std::invalid_argument("unknown target '" + key + "'");
}

}  // namespace gthmc
