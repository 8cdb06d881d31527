#include "simile/config.hpp"

#include <cmath>
#include <fstream>

namespace simile {

namespace {

std::size_t get_count(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number()) {
    const double d = v.get<double>();
    if (d < 0 || d != std::floor(d)) throw ConfigError(std::string("config: '") + key + "' must be a nonnegative integer");
    return static_cast<std::size_t>(d);
  }
  throw ConfigError(std::string("config: '") + key + "' must be a number");
}

std::vector<std::size_t> get_counts(const nlohmann::json& j) {
  std::vector<std::size_t> out;
  for (const auto& v : j) {
    const double d = v.get<double>();
    if (d < 1 || d != std::floor(d)) throw ConfigError("config: tune lists must hold positive integers");
    out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

}  // namespace

std::string to_string(LikelihoodMode mode) {
  switch (mode) {
    case LikelihoodMode::simile: return "simile";
    case LikelihoodMode::exact: return "exact";
    case LikelihoodMode::emulated: return "emulated";
    case LikelihoodMode::flowgraph_mixed: return "flowgraph-mixed";
  }
  return "unknown";
}

std::string method_label(LikelihoodMode mode) {
  switch (mode) {
    case LikelihoodMode::exact: return "Exact";
    case LikelihoodMode::emulated: return "Emulated";
    case LikelihoodMode::simile:
    case LikelihoodMode::flowgraph_mixed: return "SimILE";
  }
  return "?";
}

LikelihoodMode likelihood_mode_from_string(const std::string& name) {
  if (name == "simile") return LikelihoodMode::simile;
  if (name == "exact") return LikelihoodMode::exact;
  if (name == "emulated") return LikelihoodMode::emulated;
  if (name == "flowgraph-mixed" || name == "flowgraph_mixed") return LikelihoodMode::flowgraph_mixed;
  throw ConfigError("unknown likelihood mode '" + name + "'");
}

std::vector<Prior> default_priors(ModelId model, std::size_t n_params) {
  using enum PriorFamily;
  switch (model) {
    case ModelId::normal:
      if (n_params == 2) return {{normal, 1.0, 10.0}, {lognormal, 0.0, 10.0}};
      return {{normal, 1.0, 10.0}};
    case ModelId::lognormal:
    case ModelId::indirect: return {{normal, 0.0, 10.0}, {lognormal, 0.0, 10.0}};
    case ModelId::flowgraph02:
      return {{lognormal, std::log(6.0), 3.0},         {lognormal, std::log(136.0 / 13.0), 3.0},
              {lognormal, std::log(4.0), 3.0},         {lognormal, std::log(16.0 / 7.0), 3.0},
              {lognormal, std::log(10.0), 3.0},        {lognormal, std::log(100.0 / 12.0), 3.0},
              {logit_normal, 0.0, 3.0}};
    case ModelId::network:
      return {{lognormal, std::log(0.3), 3.0}, {lognormal, std::log(1.0 / 15.0), 3.0}, {lognormal, std::log(1.0 / 40.0), 3.0}};
  }
  return {};
}

std::vector<Prior> RunConfig::effective_priors() const {
  if (!priors.empty()) return priors;
  std::size_t n = theta.size();
  if (n == 0) n = param_names(model, model == ModelId::normal ? 1 : 2).size();
  return default_priors(model, n);
}

std::size_t RunConfig::effective_n_obs() const {
  if (n_obs > 0) return n_obs;
  switch (model) {
    case ModelId::normal: return 25;
    case ModelId::lognormal:
    case ModelId::indirect: return 50;
    case ModelId::flowgraph02: return 25;
    case ModelId::network: return 300;
  }
  return 0;
}

RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    RunConfig c;
    c.model = model_from_string(j.at("model").get<std::string>());
    if (j.contains("theta")) c.theta = j.at("theta").get<std::vector<double>>();
    if (j.contains("n_obs")) c.n_obs = get_count(j, "n_obs");
    if (j.contains("counts")) {
      const auto v = j.at("counts").get<std::vector<std::size_t>>();
      if (v.size() != 3) throw ConfigError("config: counts must be [n01, n10, n12]");
      c.counts = {v[0], v[1], v[2]};
    }
    if (j.contains("data")) c.data = resolve(base_dir, j.at("data").get<std::string>());
    if (j.contains("components")) c.components = resolve(base_dir, j.at("components").get<std::string>());
    if (j.contains("n_int")) c.n_int = get_count(j, "n_int");
    if (j.contains("n_sim")) c.n_sim = get_count(j, "n_sim");
    if (j.contains("priors")) {
      for (const auto& p : j.at("priors")) c.priors.push_back(Prior::from_json(p));
    }
    if (j.contains("chain")) {
      const auto& ch = j.at("chain");
      if (ch.contains("n_burn")) c.chain.n_burn = get_count(ch, "n_burn");
      if (ch.contains("n_keep")) c.chain.n_keep = get_count(ch, "n_keep");
      if (ch.contains("initial")) c.chain.initial = ch.at("initial").get<std::vector<double>>();
      if (ch.contains("scales")) c.chain.scales = ch.at("scales").get<std::vector<double>>();
      if (ch.contains("adapt_window")) c.chain.adapt_window = get_count(ch, "adapt_window");
    }
    if (j.contains("likelihood")) c.likelihood = likelihood_mode_from_string(j.at("likelihood").get<std::string>());
    if (j.contains("emulator")) {
      const auto& e = j.at("emulator");
      if (e.contains("path")) c.emulator.path = resolve(base_dir, e.at("path").get<std::string>());
      if (e.contains("bounds")) c.emulator.bounds = e.at("bounds").get<Bounds>();
      if (e.contains("n_design")) c.emulator.n_design = get_count(e, "n_design");
      if (e.contains("n_components")) c.emulator.n_components = get_count(e, "n_components");
      if (e.contains("n_sim")) c.emulator.n_sim = get_count(e, "n_sim");
      if (e.contains("restarts")) c.emulator.restarts = get_count(e, "restarts");
    }
    if (j.contains("tune")) {
      const auto& t = j.at("tune");
      if (t.contains("n_int")) c.tune.n_int = get_counts(t.at("n_int"));
      if (t.contains("n_sim")) c.tune.n_sim = get_counts(t.at("n_sim"));
      if (t.contains("replications")) c.tune.replications = get_count(t, "replications");
      if (t.contains("include_exact")) c.tune.include_exact = t.at("include_exact").get<bool>();
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) c.workers = std::max<std::size_t>(1, get_count(j, "workers"));
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    c.chain.seed = c.seed;

    if (c.n_int == 0) throw ConfigError("config: n_int must be >= 1");
    if (c.n_sim == 0) throw ConfigError("config: n_sim must be >= 1");
    if (c.chain.n_keep == 0) throw ConfigError("config: chain.n_keep must be >= 1");
    if (!c.priors.empty() && !c.theta.empty() && c.priors.size() != c.theta.size()) {
      throw ConfigError("config: priors and theta have different lengths");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["model"] = to_string(model);
  j["theta"] = theta;
  j["n_obs"] = effective_n_obs();
  j["counts"] = {counts.n01, counts.n10, counts.n12};
  j["data"] = data.string();
  if (!components.empty()) j["components"] = components.string();
  j["n_int"] = n_int;
  j["n_sim"] = n_sim;
  nlohmann::json pj = nlohmann::json::array();
  for (const auto& p : effective_priors()) pj.push_back(p.to_json());
  j["priors"] = pj;
  j["chain"] = {{"n_burn", chain.n_burn},
                {"n_keep", chain.n_keep},
                {"initial", chain.initial},
                {"scales", chain.scales},
                {"adapt_window", chain.adapt_window}};
  j["likelihood"] = to_string(likelihood);
  nlohmann::json ej = {{"path", emulator.path.string()},
                       {"bounds", emulator.bounds},
                       {"n_design", emulator.n_design},
                       {"n_components", emulator.n_components},
                       {"restarts", emulator.restarts}};
  if (emulator.n_sim) ej["n_sim"] = *emulator.n_sim;
  j["emulator"] = ej;
  j["tune"] = {{"n_int", tune.n_int},
               {"n_sim", tune.n_sim},
               {"replications", tune.replications},
               {"include_exact", tune.include_exact}};
  j["seed"] = seed;
  j["workers"] = workers;
  j["output_dir"] = output_dir.string();
  return j;
}

}  // namespace simile
