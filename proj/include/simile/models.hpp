#pragma once

#include "simile/grid.hpp"
#include "simile/rng.hpp"
#include "simile/types.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace simile {

enum class ModelId { normal, lognormal, indirect, flowgraph02, network };

std::string to_string(ModelId id);
ModelId model_from_string(const std::string& name);

/// Constraint on a natural-space parameter; decides its unconstrained transform.
enum class ParamSupport { real, positive, unit };

/// A catalog model plus its parameter vector in natural space.
///
/// normal: [mu] (sigma fixed at 1) or [mu, sigma]; lognormal and indirect:
/// [mu, sigma]; flowgraph02: [mu01, var01, mu10, var10, mu12, var12, p];
/// network: [lambda1, lambda2, lambda3].
struct ModelSpec {
  ModelId id = ModelId::normal;
  std::vector<double> theta;
};

std::size_t output_dim(ModelId id);
std::vector<Support> output_support(ModelId id);
std::vector<std::string> param_names(ModelId id, std::size_t n_params);
std::vector<ParamSupport> param_supports(ModelId id, std::size_t n_params);
/// Throws std::invalid_argument when theta has the wrong size or violates positivity/range.
void validate(const ModelSpec& model);

struct GammaShapeRate {
  double shape = 1.0;
  double rate = 1.0;
  static GammaShapeRate from_mean_var(double mean, double var) {
    return {mean * mean / var, mean / var};
  }
};

struct FlowgraphParams {
  double mu01 = 0, var01 = 0, mu10 = 0, var10 = 0, mu12 = 0, var12 = 0, p = 0;

  static FlowgraphParams from_theta(std::span<const double> theta);
  std::vector<double> to_theta() const { return {mu01, var01, mu10, var10, mu12, var12, p}; }
  GammaShapeRate g01() const { return GammaShapeRate::from_mean_var(mu01, var01); }
  GammaShapeRate g10() const { return GammaShapeRate::from_mean_var(mu10, var10); }
  GammaShapeRate g12() const { return GammaShapeRate::from_mean_var(mu12, var12); }
  /// E[T] for the 0 -> 2 first-passage time.
  double first_passage_mean() const { return mu01 + p / (1 - p) * (mu10 + mu01) + mu12; }
  double first_passage_variance() const;
};

/// Draw generator for one model at fixed parameters. This is the extension
/// point for new data models: implement fill() and hand the object to
/// simulate() / simile_loglik().
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual std::size_t dim() const = 0;
  /// Writes out.size() / dim() draws, row-major.
  virtual void fill(Engine& engine, std::span<double> out) const = 0;
};

std::unique_ptr<Simulator> make_simulator(const ModelSpec& model);

/// Draws per RNG chunk. Chunk c of a stream always uses stream.engine(c),
/// so results do not depend on how chunks are spread over workers.
inline constexpr std::size_t kChunkSize = std::size_t{1} << 16;

Matrix simulate(const Simulator& sim, std::size_t n, const RngStream& stream, std::size_t workers = 1);
Matrix simulate(const ModelSpec& model, std::size_t n, const RngStream& stream, std::size_t workers = 1);

std::vector<double> simulate_indirect(double mu, double sigma, std::size_t n, const RngStream& stream);
std::vector<double> simulate_flowgraph02(const FlowgraphParams& params, std::size_t n,
                                         const RngStream& stream);
Matrix simulate_network(double lambda1, double lambda2, double lambda3, std::size_t n,
                        const RngStream& stream);

struct FlowgraphCounts {
  std::size_t n01 = 28;
  std::size_t n10 = 11;
  std::size_t n12 = 17;
};

/// Explicitly observed flowgraph data: per-transition holding times and the
/// number x of 1 -> 0 returns out of n departures from state 1.
struct FlowgraphComponentData {
  std::vector<double> t01, t10, t12;
  std::size_t x = 0;
  std::size_t n = 0;

  nlohmann::json to_json() const;
  static FlowgraphComponentData from_json(const nlohmann::json& j);
};

FlowgraphComponentData simulate_flowgraph_component_data(const FlowgraphParams& params,
                                                         const FlowgraphCounts& counts,
                                                         const RngStream& stream);

}  // namespace simile
