#pragma once

#include "simile/config.hpp"
#include "simile/emulator.hpp"
#include "simile/grid.hpp"
#include "simile/likelihood.hpp"
#include "simile/sampler.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace simile {

/// Observed data plus everything precomputed once per analysis.
struct Analysis {
  RunConfig config;
  Matrix data;
  std::optional<FlowgraphComponentData> components;
  IntervalGrid grid;
  ObservedCells cells;
  std::shared_ptr<const EmulatorModel> emulator;

  /// Log-likelihood for the configured mode. SimILE evaluations use
  /// substream eval_id of the (seed, candidate) stream.
  LogLikFn make_loglik() const;
  std::vector<std::string> param_names() const;
};

/// Reads data (and flowgraph component data / emulator when needed) and builds the grid.
Analysis prepare_analysis(const RunConfig& config);
Analysis prepare_analysis(const RunConfig& config, Matrix data, std::optional<FlowgraphComponentData> components);

struct GeneratedData {
  Matrix observations;
  std::optional<FlowgraphComponentData> components;
};

GeneratedData generate_data(const RunConfig& config);

struct RunResult {
  PosteriorDraws draws;
  std::vector<ParameterSummary> summary;
  double wall_seconds = 0.0;
};

/// Chain for an already prepared analysis; throws NumericalError when the
/// chain never accepts during burnin.
RunResult run_chain(const Analysis& analysis);

void cmd_generate(const RunConfig& config);
RunResult cmd_run(const RunConfig& config);

struct TuneCell {
  std::string method;  // "exact" or "simile"
  std::size_t n_int = 0;
  std::size_t n_sim = 0;
  std::size_t replication = 0;
  bool ok = false;
  std::string message{};
  std::vector<ParameterSummary> summary{};
  double acceptance = 0.0;
  double neg_inf_rate = 0.0;  // -inf likelihood estimates per evaluation
};

std::vector<TuneCell> cmd_tune(const RunConfig& config);
std::string format_tune_table(const std::vector<TuneCell>& cells);

void cmd_emulate_train(const RunConfig& config);
RunResult cmd_emulate_run(const RunConfig& config);

/// Plot-ready CSVs from a finished run directory.
void cmd_figure_data(const std::filesystem::path& run_dir, std::optional<std::vector<double>> theta = std::nullopt,
                     std::size_t histogram_bins = 50);

}  // namespace simile
