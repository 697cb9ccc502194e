#include "bench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

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

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

std::vector<double> number_list(const json& j, const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ConfigError(std::string("'") + key + "' must be a number or a list");
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) throw ConfigError(std::string("'") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<double> tau_grid(const json& j) {
  if (!j.contains("tau_grid")) return log_spaced_grid(0.25, 16.0, 8);
  const json& g = j.at("tau_grid");
  if (g.is_object()) {
    reject_unknown(g, {"lo", "hi", "n"}, "tuning.tau_grid");
    try {
      return log_spaced_grid(get_or(g, "lo", 0.25), get_or(g, "hi", 16.0), get_or(g, "n", 8));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  std::vector<double> out = number_list(j, "tau_grid", {});
  if (out.empty() || !std::is_sorted(out.begin(), out.end()) || out.front() <= 0.0) {
    throw ConfigError("tuning.tau_grid must be a nonempty ascending list of positive values");
  }
  return out;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

}  // namespace

TargetSetup make_target(const json& spec) {
  if (!spec.is_object() || !spec.contains("name")) {
    throw ConfigError("target: an object with a 'name' is required");
  }
  reject_unknown(spec, {"name", "dim", "separation", "axis", "sigma"}, "target");
  TargetOptions opt;
  opt.dim = get_or<Eigen::Index>(spec, "dim", 0);
  opt.separation = get_or(spec, "separation", 4.0);
  opt.axis = get_or<Eigen::Index>(spec, "axis", 0);
  opt.sigma = get_or(spec, "sigma", 0.0);
  TargetSetup out;
  out.key = spec.at("name").get<std::string>();
  try {
    out.target = make_named_target(out.key, opt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("target: ") + e.what());
  }
  if (auto mix = std::dynamic_pointer_cast<const GaussianMixture>(out.target)) {
    const TargetMoments m = mix->moments();
    out.true_mean = m.mean;
    out.true_var = m.variance;
  } else if (auto shell = std::dynamic_pointer_cast<const ShellMixture>(out.target)) {
    const TargetMoments m = shell->moments();
    out.true_mean = m.mean;
    out.true_var = m.variance;
    out.radial_mean = shell->radial_mean();
  } else {
    throw ConfigError("target: no exact moments for '" + out.key + "'");
  }
  return out;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"name", "seed", "target", "n_samples", "burn_in", "output_dir", "workers",
                  "gradient_budget", "statistics", "save_chains", "tuning", "temperatures",
                  "deltas", "kernels"},
                 "config");
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", "experiment");
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
  c.n_samples = get_or(j, "n_samples", 10000);
  c.burn_in = get_or(j, "burn_in", 1000);
  if (c.burn_in < 0 || c.n_samples <= c.burn_in) {
    throw ConfigError("need n_samples > burn_in >= 0");
  }
  c.output_dir = get_or<std::string>(j, "output_dir", "bench-out");
  c.workers = get_or(j, "workers", 0);
  c.gradient_budget = get_or(j, "gradient_budget", 0.0);
  c.save_chains = get_or(j, "save_chains", false);
  for (const std::string& s :
       get_or<std::vector<std::string>>(j, "statistics", {"coordinate"})) {
    if (s == "radial") {
      c.radial = true;
    } else if (s != "coordinate") {
      throw ConfigError("statistics: expected 'coordinate' or 'radial', got '" + s + "'");
    }
  }

  const json tuning = get_or(j, "tuning", json::object());
  reject_unknown(tuning, {"enabled", "rounds", "adapt_iters", "pilot_iters", "tau_grid"},
                 "tuning");
  c.tuning.enabled = get_or(tuning, "enabled", true);
  c.tuning.options.rounds = get_or(tuning, "rounds", 3);
  c.tuning.options.adapt_iters = get_or(tuning, "adapt_iters", 500);
  c.tuning.options.pilot_iters = get_or(tuning, "pilot_iters", 200);
  c.tuning.options.tau_grid = tau_grid(tuning);
  if (c.tuning.options.rounds < 1 || c.tuning.options.adapt_iters < 0 ||
      c.tuning.options.pilot_iters < 1) {
    throw ConfigError("tuning: need rounds >= 1, adapt_iters >= 0, pilot_iters >= 1");
  }

  const std::vector<double> temps = number_list(j, "temperatures", {1.0});
  const std::vector<double> deltas = number_list(j, "deltas", {0.8});
  const json kernels = get_or(j, "kernels", json::array());
  if (!kernels.is_array()) throw ConfigError("'kernels' must be a list");
  for (const json& k : kernels) {
    reject_unknown(k,
                   {"label", "kernel", "metric", "gamma", "direction", "eps", "tau",
                    "max_depth", "temperatures", "deltas", "delta", "n_max", "verify"},
                   "kernel");
    KernelSpec s;
    s.kernel = get_or<std::string>(k, "kernel", "");
    static const std::set<std::string> kinds = {"hmc", "nuts", "chmc", "vlt-chmc", "mmala"};
    if (!kinds.count(s.kernel)) throw ConfigError("kernel: unknown kind '" + s.kernel + "'");
    s.metric = get_or<std::string>(k, "metric", s.kernel == "hmc" || s.kernel == "nuts"
                                                    ? "identity"
                                                    : "isometric");
    if (s.metric != "identity" && s.metric != "isometric" && s.metric != "directional") {
      throw ConfigError("kernel: unknown metric '" + s.metric + "'");
    }
    if ((s.kernel == "hmc" || s.kernel == "nuts") && s.metric != "identity") {
      throw ConfigError("kernel: hmc and nuts use the identity metric");
    }
    s.gamma = get_or(k, "gamma", 1.0);
    if (k.contains("direction")) {
      if (k.at("direction").is_string()) {
        if (k.at("direction").get<std::string>() != "random") {
          throw ConfigError("kernel: direction must be a list or \"random\"");
        }
        s.random_direction = true;
      } else {
        const std::vector<double> d = number_list(k, "direction", {});
        s.direction = Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size()));
      }
    }
    s.eps = get_or(k, "eps", 0.1);
    s.tau = get_or(k, "tau", 1.0);
    s.max_depth = get_or(k, "max_depth", 10);
    s.vlt.n_max = get_or(k, "n_max", 10000);
    s.vlt.verify = get_or(k, "verify", false);
    s.label = get_or<std::string>(k, "label", s.kernel);
    if (!(s.eps > 0.0) || !(s.tau > 0.0)) throw ConfigError("kernel: eps and tau must be > 0");

    const bool tempered = s.metric != "identity";
    const std::vector<double> ts = tempered ? number_list(k, "temperatures", temps)
                                            : std::vector<double>{1.0};
    const double default_delta =
        s.kernel == "mmala" ? 0.574 : (s.kernel == "chmc" || s.kernel == "vlt-chmc") ? 0.9 : 0.8;
    std::vector<double> ds = k.contains("delta") ? number_list(k, "delta", {})
                                                 : number_list(k, "deltas", {});
    if (ds.empty()) ds = (s.kernel == "hmc" || s.kernel == "nuts") ? deltas
                                                                   : std::vector{default_delta};
    for (double t : ts) {
      if (!(t >= 1.0)) throw ConfigError("temperatures must be >= 1");
      for (double d : ds) {
        if (!(d > 0.0 && d < 1.0)) throw ConfigError("delta must lie in (0, 1)");
        c.cells.push_back({s, t, d});
      }
    }
  }
  // catch bad target specs before anything runs
  make_target(c.target_spec);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& configured) {
  if (const char* env = std::getenv("GTHMC_OUTPUT_DIR"); env && *env) return env;
  return configured;
}

KernelPtr make_kernel(const TargetSetup& target, const CellSpec& cell) {
  const KernelSpec& k = cell.kernel;
  if (k.kernel == "hmc") return std::make_unique<HmcKernel>(target.target, k.eps, k.tau, cell.delta);
  if (k.kernel == "nuts") {
    return std::make_unique<NutsKernel>(target.target, k.eps, cell.delta, k.max_depth);
  }
  const auto policy = k.random_direction ? DirectionPolicy::RandomPerIteration
                                         : DirectionPolicy::Fixed;
  TemperedMetric m = TemperedMetric::identity(target.target);
  try {
    if (k.metric == "isometric") {
      m = TemperedMetric::isometric(target.target, cell.temperature);
    } else if (k.metric == "directional") {
      Vector u = k.direction;
      if (u.size() == 0) u = Vector::Unit(target.target->dim(), 0);
      m = TemperedMetric::directional(target.target, cell.temperature, k.gamma, u);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("kernel '") + k.label + "': " + e.what());
  }
  if (k.kernel == "chmc") return std::make_unique<ChmcKernel>(m, k.eps, k.tau, policy, cell.delta);
  if (k.kernel == "vlt-chmc") {
    return std::make_unique<VltChmcKernel>(m, k.eps, k.tau, policy, cell.delta, k.vlt);
  }
  return std::make_unique<MmalaKernel>(m, k.eps, cell.delta);
}

CellResult run_cell(const ExperimentConfig& config, const TargetSetup& target,
                    const CellSpec& cell, std::size_t index, bool keep_chain) {
  CellResult r;
  r.index = index;
  r.label = cell.kernel.label;
  r.kernel = cell.kernel.kernel;
  r.metric = cell.kernel.metric;
  r.temperature = cell.temperature;
  r.gamma = cell.kernel.metric == "directional" ? cell.kernel.gamma : 0.0;
  r.delta = cell.delta;
  r.seed = split_seed(config.seed, index);

  KernelPtr kernel = make_kernel(target, cell);
  const Eigen::Index d = target.target->dim();
  // start in the first mode (or at the origin for symmetric targets)
  Vector theta0 = Vector::Zero(d);
  if (auto mix = std::dynamic_pointer_cast<const GaussianMixture>(target.target)) {
    theta0 = mix->means().front();
  } else if (auto shell = std::dynamic_pointer_cast<const ShellMixture>(target.target)) {
    theta0 = Vector::Unit(d, 0) * shell->radii().front();
  }
  if (config.tuning.enabled) {
    const TuneResult t = alternate_tune(*kernel, theta0, config.tuning.options,
                                        split_seed(r.seed, 1));
    theta0 = t.theta;
  }
  r.step_size = kernel->step_size();
  r.path_length = kernel->path_length();

  ChainRecord chain = run_chain(*kernel, theta0, config.n_samples - config.burn_in,
                                config.burn_in, split_seed(r.seed, 2));
  r.ess = ess_report(chain, target.true_mean, target.true_var, config.gradient_budget);
  r.accept_rate = chain.accept_rate();
  r.failure_rate = chain.size() ? static_cast<double>(chain.failures) / chain.size() : 0.0;
  if (config.radial && target.radial_mean) {
    const double e =
        ess_of_statistic(chain, [](const Vector& x) { return x.norm(); }, *target.radial_mean);
    r.radial_ess_per_100 = 100.0 * e / static_cast<double>(chain.size());
    r.radial_ess_per_budget =
        chain.grad_eval_total > 0 ? e * r.ess.gradient_budget / chain.grad_eval_total : 0.0;
  }
  if (keep_chain) r.chain = std::move(chain);
  return r;
}

std::vector<CellResult> run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
  const TargetSetup target = make_target(config.target_spec);
  if (config.radial && !target.radial_mean) {
    throw ConfigError("radial statistic needs a shell target");
  }
  std::vector<CellResult> results(config.cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex report;
  std::exception_ptr failure;
  auto worker = [&]() {
    for (std::size_t i = next++; i < config.cells.size(); i = next++) {
      try {
        results[i] = run_cell(config, target, config.cells[i], i, config.save_chains);
        if (progress) {
          std::lock_guard lock(report);
          progress(results[i]);
        }
      } catch (...) {
        std::lock_guard lock(report);
        if (!failure) failure = std::current_exception();
        next = config.cells.size();
      }
    }
  };
  unsigned n = config.workers > 0 ? static_cast<unsigned>(config.workers)
                                  : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, std::max<std::size_t>(1, config.cells.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "kernel", "T", "gamma", "delta", "min_ess_per_100", "min_ess_per_budget", "grad_evals",
      "label", "sampler", "metric", "step_size", "path_length", "accept_rate",
      "failure_rate", "gradient_budget", "samples", "radial_ess_per_100",
      "radial_ess_per_budget", "seed"};
  return cols;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<CellResult>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& cols = result_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const CellResult& r : rows) {
    const std::string kernel = r.metric == "identity"
                                   ? r.kernel
                                   : (r.metric == "isometric" ? "ithmc" : "dthmc");
    out << kernel << ',' << format_number(r.temperature) << ',' << format_number(r.gamma) << ','
        << format_number(r.delta) << ',' << format_number(r.ess.ess_per_100_samples) << ','
        << format_number(r.ess.ess_per_gradient_budget) << ',' << r.ess.grad_evals << ','
        << '"' << r.label << '"' << ',' << r.kernel << ',' << r.metric << ','
        << format_number(r.step_size) << ',' << format_number(r.path_length) << ','
        << format_number(r.accept_rate) << ',' << format_number(r.failure_rate) << ','
        << format_number(r.ess.gradient_budget) << ',' << r.ess.samples << ','
        << format_number(r.radial_ess_per_100) << ',' << format_number(r.radial_ess_per_budget)
        << ',' << r.seed << '\n';
  }
}

void write_chain_csv(const std::filesystem::path& path, const ChainRecord& chain) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const Eigen::Index d = chain.size() ? chain.samples.front().size() : 0;
  out << "iter";
  for (Eigen::Index j = 0; j < d; ++j) out << ",theta" << j;
  out << ",accepted,energy,grad_evals\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << chain.samples[i][j];
    out << ',' << (chain.accept_flags[i] ? 1 : 0) << ',' << chain.energies[i] << ','
        << chain.grad_evals[i] << '\n';
  }
}

ChainRecord read_chain_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chain file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<int> theta_cols;
  int acc_col = -1, energy_col = -1, grad_col = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (header[i].rfind("theta", 0) == 0) theta_cols.push_back(i);
    if (header[i] == "accepted") acc_col = i;
    if (header[i] == "energy") energy_col = i;
    if (header[i] == "grad_evals") grad_col = i;
  }
  if (theta_cols.empty()) throw std::runtime_error(path.string() + ": no theta columns");
  ChainRecord chain;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number");
      }
    }
    if (v.size() != header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": wrong width");
    }
    Vector theta(static_cast<Eigen::Index>(theta_cols.size()));
    for (std::size_t j = 0; j < theta_cols.size(); ++j) theta[j] = v[theta_cols[j]];
    Transition t;
    t.accepted = acc_col >= 0 && v[acc_col] != 0.0;
    t.energy = energy_col >= 0 ? v[energy_col] : 0.0;
    t.grad_evals = grad_col >= 0 ? static_cast<int>(v[grad_col]) : 0;
    chain.append(theta, t);
  }
  return chain;
}

int sign_changes(const ChainRecord& chain, Eigen::Index coord) {
  int changes = 0;
  int last = 0;
  for (const Vector& s : chain.samples) {
    const int sign = s[coord] > 0.0 ? 1 : (s[coord] < 0.0 ? -1 : 0);
    if (sign != 0 && last != 0 && sign != last) ++changes;
    if (sign != 0) last = sign;
  }
  return changes;
}

}  // namespace gthmc::bench
