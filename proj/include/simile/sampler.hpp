#pragma once

#include "simile/likelihood.hpp"
#include "simile/models.hpp"
#include "simile/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace simile {

enum class PriorFamily { normal, lognormal, logit_normal };

/// Prior on one natural-space parameter. `m` and `s` are the mean and
/// standard deviation of the underlying normal (on x, log x or logit x).
struct Prior {
  PriorFamily family = PriorFamily::normal;
  double m = 0.0;
  double s = 1.0;

  ParamSupport support() const;
  /// Log density in natural space; -inf outside the support.
  double log_density(double x) const;
  double median() const;

  nlohmann::json to_json() const;
  static Prior from_json(const nlohmann::json& j);
};

std::string to_string(PriorFamily f);

double log_prior(std::span<const Prior> priors, std::span<const double> theta);
std::vector<ParamSupport> prior_supports(std::span<const Prior> priors);

/// Log-likelihood callback: natural-space theta plus an evaluation id that
/// the callee uses to pick a fresh simulation substream.
using LogLikFn = std::function<LogLikelihood(std::span<const double> theta, std::uint64_t eval_id)>;

struct ChainConfig {
  std::size_t n_burn = 1000;
  std::size_t n_keep = 10000;
  std::vector<double> initial;  // natural space; empty = prior medians
  std::vector<double> scales;   // unconstrained space; empty = 0.1 each
  std::size_t adapt_window = 25;
  std::uint64_t seed = 0;
};

struct AdaptationEvent {
  std::size_t iteration = 0;
  double window_acceptance = 0.0;
  std::vector<double> scales;
};

struct PosteriorDraws {
  std::vector<std::string> names;
  Matrix draws;                    // n_keep x P, natural space
  std::vector<double> loglik;      // retained log-likelihood of each kept state
  double acceptance_rate = 0.0;    // kept phase
  double burnin_acceptance = 0.0;
  std::size_t neg_inf_rejections = 0;  // candidates whose likelihood estimate was -inf
  std::size_t prior_rejections = 0;    // candidates outside the prior support
  std::size_t evaluations = 0;
  std::vector<double> final_scales;
  std::vector<AdaptationEvent> adaptation;

  std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
  std::size_t params() const { return static_cast<std::size_t>(draws.cols()); }
};

/// Random-walk Metropolis-Hastings on the unconstrained scale with one joint
/// Gaussian proposal. The current state's (estimated) log-likelihood is kept
/// until the next acceptance, never re-estimated, so a stochastic unbiased
/// likelihood gives a pseudo-marginal chain. Scales adapt during burnin only.
PosteriorDraws mh_run(const LogLikFn& loglik, std::span<const Prior> priors, const ChainConfig& config,
                      std::vector<std::string> names = {});

/// Multiplies every scale by 1.1 when window acceptance > 0.5, divides by
/// 1.1 when < 0.2, otherwise leaves them.
std::vector<double> adapt_scales(std::span<const double> scales, std::size_t accepted, std::size_t window);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

/// Quantile of sorted data by interpolation at 1-based position q (n - 1) + 1.
double quantile_sorted(std::span<const double> sorted, double q);
ParameterSummary summarize_column(std::span<const double> draws, std::string name);
std::vector<ParameterSummary> summarize(const PosteriorDraws& draws);

/// Effective sample size from Geyer's initial positive sequence.
double effective_sample_size(std::span<const double> draws);
/// Monte Carlo standard error of the mean, sd / sqrt(ESS).
double mcse_mean(std::span<const double> draws);

std::string format_summary_table(std::span<const ParameterSummary> rows, const std::string& method);
void write_summary_csv(const std::filesystem::path& path, std::span<const ParameterSummary> rows,
                       const std::string& method);

void export_trace(const PosteriorDraws& draws, const std::filesystem::path& path);
/// Reads a trace CSV back into names + draws (other fields left default).
PosteriorDraws read_trace(const std::filesystem::path& path);

}  // namespace simile
