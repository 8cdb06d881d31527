#pragma once

#include "simile/gp.hpp"
#include "simile/grid.hpp"
#include "simile/likelihood.hpp"
#include "simile/models.hpp"
#include "simile/rng.hpp"
#include "simile/types.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace simile {

using Bounds = std::vector<std::pair<double, double>>;

/// n points in a box, one point per equal-width stratum in every
/// dimension, placed at stratum midpoints.
struct LhsDesign {
  Matrix points;
  Bounds bounds;
  double min_distance = 0.0;  // in coordinates scaled to the unit cube
};

double min_pairwise_distance(const Matrix& points, const Bounds& bounds);

/// Centered random Latin hypercube from `engine`.
LhsDesign random_lhs(std::size_t n, const Bounds& bounds, Engine& engine);

/// Column-swap hill climbing from a given Latin hypercube. A swap is kept
/// only if it does not lower the minimum pairwise distance and lowers the
/// Morris-Mitchell sum of inverse distances, so the minimum distance never
/// decreases.
LhsDesign improve_maximin(LhsDesign start, Engine& engine, std::size_t iterations);

/// Best of `restarts` hill-climbed random starts (restart r uses stream.engine(r)).
LhsDesign maximin_lhs(std::size_t n, const Bounds& bounds, const RngStream& stream, std::size_t restarts = 5,
                      std::size_t iterations = 0);

/// Cumulative cell probabilities at every design point, one row per point.
/// Design coordinates are on the unconstrained scale of `model`'s parameters;
/// point i is simulated on stream.with_substream(i).
/// Called after each design point with its index, natural-space theta and wall seconds.
using TrainingProgress = std::function<void(std::size_t, std::span<const double>, double)>;

Matrix train_targets(const Matrix& design_points, ModelId model, const IntervalGrid& grid, std::size_t n_sim,
                     const RngStream& stream, std::size_t workers = 1, const TrainingProgress& progress = {});

struct PcaResult {
  Vector column_means;
  Matrix basis;   // C x k, orthonormal columns
  Matrix scores;  // n x k
  Vector explained_variance;
  double reconstruction_error = 0.0;  // Frobenius norm of the residual
};

PcaResult pca_fit(const Matrix& data, std::size_t k);

/// Isotonic (pool-adjacent-violators) fit, clipped to [0, 1], last entry 1.
std::vector<double> monotone_projection(std::span<const double> cumulative);

struct CellPrediction {
  std::vector<double> probabilities;
  bool extrapolated = false;
};

class EmulatorModel {
 public:
  IntervalGrid grid;
  ModelId model = ModelId::lognormal;
  std::size_t n_params = 0;
  LhsDesign design;
  Matrix targets;
  PcaResult pca;
  std::vector<GpHyperparams> hyper;

  /// Rebuilds the kriging predictors from design, scores and hyperparameters.
  void rebuild();
  /// Throws ConfigError when an invariant fails.
  void check_invariants() const;

  std::vector<double> predict_cumulative(std::span<const double> theta) const;
  CellPrediction predict_cells(std::span<const double> theta) const;

  void save(const std::filesystem::path& path) const;
  static EmulatorModel load(const std::filesystem::path& path);

 private:
  std::vector<double> to_design_coords(std::span<const double> theta, bool* extrapolated) const;
  std::vector<GaussianProcess> gps_;
};

EmulatorModel fit_emulator(IntervalGrid grid, ModelId model, LhsDesign design, Matrix targets,
                           std::size_t n_components, const GpFitOptions& options = {});

struct EmulatorConfig {
  ModelId model = ModelId::lognormal;
  Bounds bounds;  // unconstrained parameter box
  std::size_t n_design = 500;
  std::size_t n_components = 20;
  std::size_t n_sim = 10'000'000;
  std::size_t restarts = 5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  GpFitOptions gp;
  TrainingProgress progress;
};

EmulatorModel train_emulator(const EmulatorConfig& config, const IntervalGrid& grid);

LogLikelihood emu_loglik(const EmulatorModel& model, std::span<const double> theta, const ObservedCells& observed);

}  // namespace simile
