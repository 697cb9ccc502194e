#include "bench/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>

#include "bench/svg.hpp"

namespace gthmc::bench {

using nlohmann::json;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("'") + key + "': " + e.what());
  }
}

Vector vector_of(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  std::vector<double> v;
  try {
    v = j.at(key).get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("'") + key + "' must be a list of numbers");
  }
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

TemperedMetric metric_for(const TargetPtr& target, const DynamicsSpec& d) {
  try {
    if (d.metric == "identity") return TemperedMetric::identity(target);
    if (d.metric == "isometric") return TemperedMetric::isometric(target, d.temperature);
    Vector u = d.direction.size() ? d.direction : Vector::Unit(target->dim(), 0);
    return TemperedMetric::directional(target, d.temperature, d.gamma, u);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("dynamics '" + d.label + "': " + e.what());
  }
}

// Linear interpolation of theta at physical time s, within [t[k], t[k+1]].
Vector at_time(const Trajectory& tr, std::size_t k, double s) {
  if (k + 1 >= tr.t.size()) return tr.theta.back();
  const double span = tr.t[k + 1] - tr.t[k];
  const double f = span > 0.0 ? (s - tr.t[k]) / span : 0.0;
  return tr.theta[k] + f * (tr.theta[k + 1] - tr.theta[k]);
}

void place_markers(Trajectory& tr, double total, int n) {
  std::size_t k = 0;
  for (int i = 0; i <= n; ++i) {
    const double s = total * i / n;
    while (k + 1 < tr.t.size() && tr.t[k + 1] < s) ++k;
    if (tr.t.back() < s) break;  // stopped early
    tr.markers.push_back(at_time(tr, k, s));
  }
}

}  // namespace

TrajectoryConfig parse_trajectory_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  TrajectoryConfig c;
  const auto seed_ok = [&] {
    if (!j.contains("seed")) return false;
    const auto& s = j.at("seed");
    return s.is_number_unsigned() || (s.is_number_integer() && s.get<long long>() >= 0);
  };
  if (!seed_ok()) {
    throw ConfigError("'seed' is required and must be a nonnegative integer");
  }
  c.seed = j.at("seed").get<std::uint64_t>();
  if (!j.contains("target")) throw ConfigError("'target' is required");
  c.target_spec = j.at("target");
  c.output_dir = get_or<std::string>(j, "output_dir", "bench-out");
  if (!j.contains("trajectories")) throw ConfigError("'trajectories' section is required");
  const json& t = j.at("trajectories");
  static const std::set<std::string> known = {"start", "start_jitter", "kinetic_energy", "time",
                                              "count", "markers", "eps", "max_steps",
                                              "dynamics"};
  for (const auto& [key, value] : t.items()) {
    if (!known.count(key)) throw ConfigError("trajectories: unknown key '" + key + "'");
  }
  c.start = vector_of(t, "start");
  c.start_jitter = get_or(t, "start_jitter", 0.25);
  c.kinetic_energy = get_or(t, "kinetic_energy", 0.8);
  c.time = get_or(t, "time", 3.0);
  c.count = get_or(t, "count", 8);
  c.markers = get_or(t, "markers", 15);
  c.eps = get_or(t, "eps", 1e-3);
  c.max_steps = get_or(t, "max_steps", 2000000L);
  if (!(c.kinetic_energy > 0.0) || !(c.time > 0.0) || !(c.eps > 0.0) || c.count < 0 ||
      c.markers < 1 || c.start_jitter < 0.0) {
    throw ConfigError("trajectories: need kinetic_energy, time, eps > 0, count >= 0, markers >= 1");
  }
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  int n = 0;
  for (const json& d : get_or(t, "dynamics", json::array())) {
    DynamicsSpec s;
    s.label = get_or<std::string>(d, "label", "dynamics" + std::to_string(n));
    s.metric = get_or<std::string>(d, "metric", "identity");
    if (s.metric != "identity" && s.metric != "isometric" && s.metric != "directional") {
      throw ConfigError("dynamics: unknown metric '" + s.metric + "'");
    }
    s.temperature = get_or(d, "T", 1.0);
    s.gamma = get_or(d, "gamma", 1.0);
    s.direction = vector_of(d, "direction");
    s.color = get_or<std::string>(d, "color", palette[n % 5]);
    c.dynamics.push_back(s);
    ++n;
  }
  const TargetSetup target = make_target(c.target_spec);
  if (target.target->dim() != 2) throw ConfigError("trajectories need a 2-d target");
  if (c.start.size() != 0 && c.start.size() != 2) throw ConfigError("start must have 2 entries");
  for (const DynamicsSpec& d : c.dynamics) metric_for(target.target, d);
  return c;
}

TrajectoryConfig load_trajectory_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return parse_trajectory_config(json::parse(in, nullptr, true, true));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<Trajectory> simulate_trajectories(const TrajectoryConfig& config) {
  const TargetSetup setup = make_target(config.target_spec);
  const TargetPtr& target = setup.target;
  if (target->dim() != 2) throw ConfigError("trajectories need a 2-d target");
  Vector centre = config.start;
  if (centre.size() == 0) {
    auto mix = std::dynamic_pointer_cast<const GaussianMixture>(target);
    centre = mix ? mix->means().front() : Vector::Zero(2);
  }
  std::vector<Trajectory> out;
  for (std::size_t di = 0; di < config.dynamics.size(); ++di) {
    const DynamicsSpec& d = config.dynamics[di];
    const TemperedMetric m = metric_for(target, d);
    for (int k = 0; k < config.count; ++k) {
      // same start for every dynamics; momentum depends on the metric
      Rng start_rng(split_seed(config.seed, static_cast<std::uint64_t>(k)));
      const Vector theta0 = centre + config.start_jitter * standard_normal(start_rng, 2);
      Rng rng(split_seed(config.seed, 1000 + static_cast<std::uint64_t>(k)));
      Trajectory tr;
      tr.label = d.label;
      tr.index = k;
      const MetricPoint pt0 = evaluate(m, theta0);
      Vector p0 = sample_momentum(m, pt0, rng);
      p0 *= std::sqrt(config.kinetic_energy / kinetic_energy(m, pt0, p0));
      tr.initial_kinetic = kinetic_energy(m, pt0, p0);
      tr.t.push_back(0.0);
      tr.theta.push_back(theta0);
      try {
        if (m.is_flat()) {
          LeapfrogState s = make_leapfrog_state(*target, theta0, p0);
          for (long i = 0; i < config.max_steps && tr.t.back() < config.time; ++i) {
            s = leapfrog_step(*target, s, config.eps);
            tr.t.push_back(tr.t.back() + config.eps);
            tr.theta.push_back(s.theta);
          }
        } else {
          MetricPoint pt = pt0;
          Vector v = momentum_to_velocity(m, pt0, p0);
          for (long i = 0; i < config.max_steps && tr.t.back() < config.time; ++i) {
            IntegratorStepResult r = adaptive_step(m, pt, v, config.eps);
            tr.t.push_back(tr.t.back() + config.eps * 0.5 * (pt.eta() + r.point1.eta()));
            tr.theta.push_back(r.point1.theta);
            pt = std::move(r.point1);
            v = std::move(r.state1.conjugate);
          }
        }
      } catch (const StepFailure&) {
        tr.failed = true;
      }
      // trim the overshoot of the last step
      if (tr.t.back() > config.time && tr.t.size() >= 2) {
        const std::size_t last = tr.t.size() - 2;
        tr.theta.back() = at_time(tr, last, config.time);
        tr.t.back() = config.time;
      }
      for (const Vector& th : tr.theta) tr.crossed = tr.crossed || th[0] > 0.0;
      place_markers(tr, config.time, config.markers);
      out.push_back(std::move(tr));
    }
  }
  return out;
}

double valley_marker_density_ratio(const std::vector<Trajectory>& trajs, double separation,
                                   double half_width) {
  double valley = 0.0, modes = 0.0;
  for (const Trajectory& tr : trajs) {
    for (const Vector& m : tr.markers) {
      if (std::abs(m[0]) < half_width) valley += 1.0;
      if (std::abs(std::abs(m[0]) - separation) < half_width) modes += 1.0;
    }
  }
  // the valley strip has one window, the modes two
  if (modes == 0.0) return valley > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return valley / (modes / 2.0);
}

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label,trajectory,step,t,x,y\n" << std::setprecision(12);
  for (const Trajectory& tr : trajs) {
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      out << tr.label << ',' << tr.index << ',' << i << ',' << tr.t[i] << ',' << tr.theta[i][0]
          << ',' << tr.theta[i][1] << '\n';
    }
  }
}

void write_marker_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label,trajectory,marker,x,y,crossed\n" << std::setprecision(12);
  for (const Trajectory& tr : trajs) {
    for (std::size_t i = 0; i < tr.markers.size(); ++i) {
      out << tr.label << ',' << tr.index << ',' << i << ',' << tr.markers[i][0] << ','
          << tr.markers[i][1] << ',' << (tr.crossed ? 1 : 0) << '\n';
    }
  }
}

void plot_trajectories(const std::filesystem::path& path, const TrajectoryConfig& config,
                       const std::vector<Trajectory>& trajs, const std::string& label) {
  const TargetSetup setup = make_target(config.target_spec);
  double x_lo = -8, x_hi = 8, y_lo = -4, y_hi = 4;
  auto mix = std::dynamic_pointer_cast<const GaussianMixture>(setup.target);
  if (mix) {
    double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
    for (const Vector& mu : mix->means()) {
      lo0 = std::min(lo0, mu[0]);
      hi0 = std::max(hi0, mu[0]);
      lo1 = std::min(lo1, mu[1]);
      hi1 = std::max(hi1, mu[1]);
    }
    x_lo = lo0 - 4;
    x_hi = hi0 + 4;
    y_lo = lo1 - 4;
    y_hi = hi1 + 4;
  }
  SvgPlot plot(640, 400, x_lo, x_hi, y_lo, y_hi);
  plot.title(label.empty() ? "trajectories" : label + " trajectories");
  plot.axis_labels("theta_1", "theta_2");
  if (mix) {
    for (const Vector& mu : mix->means()) {
      for (double r : {1.0, 2.0}) plot.circle(mu[0], mu[1], r, "#999999");
    }
  }
  std::string color = "black";
  for (const DynamicsSpec& d : config.dynamics) {
    if (d.label == label) color = d.color;
  }
  for (const Trajectory& tr : trajs) {
    if (tr.label != label) continue;
    std::vector<std::pair<double, double>> pts;
    // thin long paths; the markers carry the timing
    const std::size_t stride = std::max<std::size_t>(1, tr.theta.size() / 2000);
    for (std::size_t i = 0; i < tr.theta.size(); i += stride) {
      pts.emplace_back(tr.theta[i][0], tr.theta[i][1]);
    }
    pts.emplace_back(tr.theta.back()[0], tr.theta.back()[1]);
    plot.polyline(pts, color);
    for (const Vector& m : tr.markers) plot.asterisk(m[0], m[1], color);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  plot.save(path.string());
}

void plot_trace(const std::filesystem::path& path, const ChainRecord& chain, Eigen::Index coord,
                const std::string& title) {
  if (chain.size() == 0) throw std::invalid_argument("trace: empty chain");
  if (coord < 0 || coord >= chain.samples.front().size()) {
    throw std::invalid_argument("trace: coordinate out of range");
  }
  double lo = chain.samples.front()[coord], hi = lo;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const double v = chain.samples[i][coord];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    pts.emplace_back(static_cast<double>(i), v);
  }
  const auto [y_lo, y_hi] = padded_range(lo, hi);
  const double x_hi = chain.size() > 1 ? static_cast<double>(chain.size() - 1) : 1.0;
  SvgPlot plot(800, 300, 0.0, x_hi, y_lo, y_hi);
  plot.title(title);
  plot.axis_labels("iteration", "theta_" + std::to_string(coord + 1));
  plot.polyline(pts, "#1f77b4", 0.6);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  plot.save(path.string());
}

}  // namespace gthmc::bench
