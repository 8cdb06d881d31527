#pragma once

#include "simile/grid.hpp"
#include "simile/models.hpp"
#include "simile/rng.hpp"
#include "simile/types.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace simile {

/// A (possibly estimated) log-likelihood value. For SimILE estimates,
/// `value` is -inf exactly when `zero_cells` > 0.
struct LogLikelihood {
  double value = 0.0;
  std::size_t n_sim = 0;
  std::size_t zero_cells = 0;

  bool is_finite() const { return std::isfinite(value); }
  static LogLikelihood exact(double v) { return {v, 0, 0}; }
};

// ---------------------------------------------------------------------------
// SimILE estimator

/// Cell counts of n_sim draws from `sim`, sharded over chunks of kChunkSize.
std::vector<std::uint64_t> simulate_cell_counts(const Simulator& sim, const IntervalGrid& grid,
                                                std::size_t n_sim, const RngStream& stream,
                                                std::size_t workers = 1);

/// sum over occupied cells of multiplicity * log(count / n_sim).
LogLikelihood loglik_from_counts(std::span<const std::uint64_t> counts, const ObservedCells& observed,
                                 std::size_t n_sim);

/// Simulates n_sim draws on `stream`, bins them on `grid`, and returns the
/// log of the product of relative frequencies of the observed cells.
LogLikelihood simile_loglik(const Simulator& sim, const IntervalGrid& grid, const ObservedCells& observed,
                            std::size_t n_sim, const RngStream& stream, std::size_t workers = 1);
LogLikelihood simile_loglik(const ModelSpec& model, const IntervalGrid& grid, const ObservedCells& observed,
                            std::size_t n_sim, const RngStream& stream, std::size_t workers = 1);

/// Exact cell probabilities Phi(hi - mu) - Phi(lo - mu) for a 1-d grid under N(mu, sigma).
std::vector<double> normal_cell_probabilities(const IntervalGrid& grid, double mu, double sigma = 1.0);

// ---------------------------------------------------------------------------
// Exact likelihoods

double exact_loglik_normal(double mu, double sigma, std::span<const double> data);
double exact_loglik_lognormal(double mu, double sigma, std::span<const double> data);

/// Density of y = x |sin a|, x ~ Lognormal(mu, sigma), a ~ Uniform(0, 2 pi):
///   f(y) = (2/pi) int_0^{pi/2} f_LN(y / sin a) / sin a da.
/// Evaluated by adaptive Gauss-Kronrod quadrature in log a (relative tolerance 1e-10).
double indirect_pdf(double y, double mu, double sigma);
double exact_loglik_indirect(double mu, double sigma, std::span<const double> data);

/// Joint density of (X1 + X2, X1 + X3) for independent exponentials with
/// rates lambda1..3, integrating out the shared X1 in closed form.
double network_pdf(double lambda1, double lambda2, double lambda3, double y1, double y2);
double network_logpdf(double lambda1, double lambda2, double lambda3, double y1, double y2);
double exact_loglik_network(double lambda1, double lambda2, double lambda3, const Matrix& pairs);

struct NormalPosterior {
  double mean = 0.0;
  double sd = 0.0;
};

/// Normal-normal conjugate update of a N(mu0, tau0^2) prior with known sigma.
NormalPosterior conjugate_posterior_oracle(double mu0, double tau0, std::span<const double> data,
                                           double sigma = 1.0);

// ---------------------------------------------------------------------------
// Flowgraph 0 -> 2 first-passage density

/// First-passage density tabulated on t_j = j * step, j = 0..n-1.
struct FirstPassageDensity {
  double step = 0.0;
  std::vector<double> pdf;
  double deficit = 0.0;       // 1 - tabulated mass (mixture truncation + grid cut-off)
  std::size_t loop_terms = 0;  // K: loop counts 0..K kept in the mixture

  double t_max() const { return step * static_cast<double>(pdf.size() - 1); }
  /// Linear interpolation; 0 outside [0, t_max].
  double pdf_at(double t) const;
};

/// Truncated mixture sum_{k<=K} (1-p) p^k [f01^{*(k+1)} * f10^{*k} * f12](t)
/// with K the smallest count such that p^{K+1} < 1e-10. Components are
/// discretized to per-cell masses on the grid and convolved by FFT.
/// Throws NumericalError when the deficit exceeds 1e-3.
FirstPassageDensity flowgraph_pdf_oracle(const FlowgraphParams& params, double t_max, std::size_t n_points);

/// Oracle on an automatically sized grid: covers mean + 12 sd and every t in `cover`.
FirstPassageDensity flowgraph_pdf_oracle(const FlowgraphParams& params, std::span<const double> cover,
                                         std::size_t n_points = 2048);

// ---------------------------------------------------------------------------
// Likelihood composition

enum class ComponentKind { exact_gamma, exact_binomial, exact_closed_form, simile };
std::string to_string(ComponentKind kind);

/// theta is in natural space; eval_id selects the fresh simulation substream.
using ComponentFn = std::function<LogLikelihood(std::span<const double> theta, std::uint64_t eval_id)>;

struct LikelihoodComponent {
  ComponentKind kind = ComponentKind::exact_closed_form;
  std::string label;
  std::size_t n_data = 0;
  ComponentFn eval;
};

/// Sum of independent likelihood components, each owning its own data.
class LikelihoodComponentSet {
 public:
  void add(LikelihoodComponent component);
  /// Short-circuits at the first -inf component.
  LogLikelihood evaluate(std::span<const double> theta, std::uint64_t eval_id) const;
  const std::vector<LikelihoodComponent>& components() const { return components_; }
  std::size_t total_data() const;

 private:
  std::vector<LikelihoodComponent> components_;
};

double gamma_loglik(std::span<const double> data, GammaShapeRate g);
double binomial_logpmf(std::size_t x, std::size_t n, double p);

struct FlowgraphData {
  FlowgraphComponentData components;
  std::vector<double> first_passage;
};

enum class ZeroTwoMode { simile, oracle };

/// Grid, observed cells and simulation budget of one SimILE component.
struct SimileContext {
  IntervalGrid grid;
  ObservedCells cells;
  std::size_t n_sim = 0;
  RngStream stream;
  std::size_t workers = 1;
};

/// Five-part flowgraph likelihood: gamma holding times (0->1, 1->0, 1->2),
/// the binomial return count, and the 0->2 first-passage times either
/// estimated by SimILE or read off the convolution oracle. An empty
/// first-passage sample contributes nothing. `simile` is required for
/// ZeroTwoMode::simile with non-empty first-passage data.
LikelihoodComponentSet make_flowgraph_likelihood(const FlowgraphData& data, ZeroTwoMode mode,
                                                 std::shared_ptr<const SimileContext> simile = nullptr);

LogLikelihood flowgraph_joint_loglik(const FlowgraphParams& params, const FlowgraphData& data,
                                     ZeroTwoMode mode, std::shared_ptr<const SimileContext> simile = nullptr,
                                     std::uint64_t eval_id = 0);

}  // namespace simile
