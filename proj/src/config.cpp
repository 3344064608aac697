#include "soma/config.hpp"

#include <set>

#include "soma/errors.hpp"
#include "soma/io.hpp"

namespace soma {

namespace {

/// Reads fields of one JSON object and rejects whatever was not read.
class Fields {
 public:
  Fields(const Json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key)) return std::nullopt;
    try {
      return obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  template <class T>
  T require(const std::string& key) {
    auto v = get<T>(key);
    if (!v) throw ConfigError(where_ + ": missing required field '" + key + "'");
    return *v;
  }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown field '" + key + "'");
    }
  }

 private:
  const Json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

std::size_t positive(std::size_t v, const char* what) {
  if (v == 0) throw ConfigError(std::string(what) + " must be >= 1");
  return v;
}

const std::set<std::string> kExperimentLabels = {"",         "synthetic", "histogram", "linreg",
                                                 "bounds",   "couple",    "sample"};

}  // namespace

RunConfig parse_config(const Json& j) {
  Fields f(j, "config");
  RunConfig c;
  c.version = f.get<int>("version").value_or(kConfigVersion);
  if (c.version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(c.version));
  }
  c.experiment = f.get<std::string>("experiment").value_or("");
  if (!kExperimentLabels.count(c.experiment)) throw ConfigError("unknown experiment label '" + c.experiment + "'");
  if (f.has("target")) {
    c.target = f.raw("target");
    if (!c.target.is_object()) throw ConfigError("config.target: expected a JSON object");
  }
  if (auto names = f.get<std::vector<std::string>>("samplers")) {
    if (names->empty()) throw ConfigError("config.samplers must not be empty");
    c.samplers.clear();
    for (const auto& name : *names) {
      try {
        c.samplers.push_back(parse_sampler_kind(name));
      } catch (const std::exception&) {
        throw ConfigError("unknown sampler '" + name + "'");
      }
    }
  }
  c.iters = positive(f.get<std::size_t>("iters").value_or(c.iters), "iters");
  c.replicates = positive(f.get<std::size_t>("replicates").value_or(c.replicates), "replicates");
  c.t_max = f.get<std::size_t>("t_max").value_or(c.t_max);
  c.burn_in = f.get<std::size_t>("burn_in").value_or(c.burn_in);
  c.thin = positive(f.get<std::size_t>("thin").value_or(c.thin), "thin");
  c.seed = f.get<std::uint64_t>("seed").value_or(c.seed);
  c.workers = f.get<int>("workers").value_or(c.workers);
  if (c.workers < 0) throw ConfigError("workers must be >= 0");
  c.allow_censored = f.get<bool>("allow_censored").value_or(false);
  c.record_wasserstein = f.get<bool>("record_wasserstein").value_or(false);
  c.run_to_horizon = f.get<bool>("run_to_horizon").value_or(false);
  c.couple = f.get<bool>("couple").value_or(false);
  c.imputation_steps = f.get<std::size_t>("imputation_steps");
  c.n_list = f.get<std::vector<std::size_t>>("n_list").value_or(std::vector<std::size_t>{});
  c.m_list = f.get<std::vector<double>>("M_list").value_or(std::vector<double>{});
  c.output = f.get<std::string>("output").value_or(c.output);
  f.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

Json to_json(const RunConfig& c) {
  Json j;
  j["version"] = c.version;
  if (!c.experiment.empty()) j["experiment"] = c.experiment;
  j["target"] = c.target;
  Json kinds = Json::array();
  for (auto k : c.samplers) kinds.push_back(std::string(to_string(k)));
  j["samplers"] = kinds;
  j["iters"] = c.iters;
  j["replicates"] = c.replicates;
  j["t_max"] = c.t_max;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["allow_censored"] = c.allow_censored;
  j["record_wasserstein"] = c.record_wasserstein;
  j["run_to_horizon"] = c.run_to_horizon;
  j["couple"] = c.couple;
  if (c.imputation_steps) j["imputation_steps"] = *c.imputation_steps;
  if (!c.n_list.empty()) j["n_list"] = c.n_list;
  if (!c.m_list.empty()) j["M_list"] = c.m_list;
  j["output"] = c.output;
  return j;
}

Model build_model(const Json& block) {
  Fields f(block, "target");
  const auto kind = f.require<std::string>("kind");
  Model model;
  if (kind == "bernoulli_laplace") {
    const auto n = f.require<std::size_t>("n");
    const auto s = f.require<std::size_t>("s");
    model = bernoulli_laplace_target(n, s, f.get<double>("p").value_or(0.5));
  } else if (kind == "beta_laplace") {
    model = beta_laplace_target(f.get<double>("a0").value_or(10.0), f.get<double>("b0").value_or(10.0),
                                f.require<double>("eps"), f.require<double>("y_obs"),
                                f.require<std::size_t>("n"));
  } else if (kind == "exp_laplace") {
    model = exp_laplace_target(f.require<double>("eps"), f.require<double>("y_obs"),
                               f.require<std::size_t>("n"));
  } else if (kind == "perturbed_histogram") {
    const auto n = f.require<std::size_t>("n");
    const auto eps = f.require<double>("eps");
    std::vector<double> edges;
    if (auto e = f.get<std::vector<double>>("bin_edges")) {
      edges = *e;
      if (f.has("bins")) throw ConfigError("target: give either bins or bin_edges");
    } else {
      edges = uniform_bin_edges(f.get<std::size_t>("bins").value_or(10));
    }
    std::vector<double> noisy;
    if (auto counts = f.get<std::vector<double>>("noisy_counts")) {
      if (f.has("data_seed")) throw ConfigError("target: give either noisy_counts or data_seed");
      noisy = *counts;
    } else {
      Rng rng = make_rng(f.get<std::uint64_t>("data_seed").value_or(0));
      std::vector<double> data(n);
      for (auto& x : data) x = uniform01(rng);
      noisy = privatize_histogram(data, edges, eps, rng);
    }
    model = perturbed_histogram_target(std::move(edges), std::move(noisy), eps, n);
  } else {
    throw ConfigError("unknown target kind '" + kind +
                      "' (expected bernoulli_laplace, beta_laplace, exp_laplace, perturbed_histogram)");
  }
  f.finish();
  return model;
}

PrivateSummary load_private_summary(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  Fields f(j, path.filename().string());
  PrivateSummary s;
  s.eps = f.require<double>("eps");
  s.n = positive(f.require<std::size_t>("n"), "n");
  s.bounds = f.require<std::vector<double>>("bounds");
  const auto values = f.require<std::vector<double>>("values");
  f.finish();
  if (s.bounds.size() < 2 || values.size() != summary_dim(s.bounds.size() - 1)) {
    throw ConfigError(path.string() + ": summary length does not match the bounds");
  }
  s.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  s.delta = summary_sensitivity(s.p(), s.n);
  return s;
}

LinregProblem build_linreg(const Json& block, const std::filesystem::path& base_dir) {
  Fields f(block, "target");
  if (f.require<std::string>("kind") != "linreg") throw ConfigError("target: expected kind 'linreg'");
  PrivateSummary summary;
  if (auto fixture = f.get<std::string>("fixture")) {
    std::filesystem::path p(*fixture);
    if (p.is_relative() && !base_dir.empty() && !std::filesystem::exists(p)) p = base_dir / p;
    summary = load_private_summary(p);
  } else {
    const auto n = positive(f.require<std::size_t>("n"), "n");
    const auto eps = f.require<double>("eps");
    const ClampBounds bounds = f.get<std::vector<double>>("bounds").value_or(default_bounds(2));
    if (bounds.size() != 3) throw ConfigError("target.bounds: need three bounds (x1, x2, y)");
    if (auto values = f.get<std::vector<double>>("values")) {
      if (values->size() != summary_dim(2)) throw ConfigError("target.values: need 9 entries");
      summary.values = Eigen::Map<const Eigen::VectorXd>(values->data(), 9);
      summary.eps = eps;
      summary.n = n;
      summary.bounds = bounds;
      summary.delta = summary_sensitivity(2, n);
    } else {
      Rng rng = make_rng(f.get<std::uint64_t>("data_seed").value_or(0));
      const CovariatePrior cov{Eigen::Vector2d(0.9, -1.17)};
      summary = simulate_private_summary(rng, n, eps, reference_theta(), cov, bounds);
    }
  }
  f.finish();
  return default_linreg_problem(std::move(summary));
}

}  // namespace soma
