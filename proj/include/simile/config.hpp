#pragma once

#include "simile/emulator.hpp"
#include "simile/models.hpp"
#include "simile/sampler.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace simile {

enum class LikelihoodMode { simile, exact, emulated, flowgraph_mixed };

std::string to_string(LikelihoodMode mode);
LikelihoodMode likelihood_mode_from_string(const std::string& name);
/// Table label: "SimILE", "Exact" or "Emulated".
std::string method_label(LikelihoodMode mode);

struct TuneSettings {
  std::vector<std::size_t> n_int{50, 100};
  std::vector<std::size_t> n_sim{1'000'000, 10'000'000};
  std::size_t replications = 1;
  bool include_exact = true;
};

struct EmulatorSettings {
  std::filesystem::path path;
  Bounds bounds;
  std::size_t n_design = 500;
  std::size_t n_components = 20;
  std::optional<std::size_t> n_sim;  // defaults to RunConfig::n_sim
  std::size_t restarts = 5;
};

/// One analysis, read from a JSON document. Relative paths are resolved
/// against the directory of the config file.
struct RunConfig {
  ModelId model = ModelId::normal;
  std::vector<double> theta;  // true parameters for `generate`
  std::size_t n_obs = 0;      // 0 = the model's default sample size
  FlowgraphCounts counts;
  std::filesystem::path data;
  std::filesystem::path components;  // flowgraph explicit data (JSON)
  std::size_t n_int = 100;
  std::size_t n_sim = 10'000'000;
  std::vector<Prior> priors;  // empty = model defaults
  ChainConfig chain;
  LikelihoodMode likelihood = LikelihoodMode::simile;
  EmulatorSettings emulator;
  TuneSettings tune;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::filesystem::path output_dir = "simile-out";

  std::vector<Prior> effective_priors() const;
  std::size_t effective_n_obs() const;
  nlohmann::json to_json() const;
};

RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Priors used in the worked examples for each catalog model.
std::vector<Prior> default_priors(ModelId model, std::size_t n_params);

}  // namespace simile
