#include "simile/sampler.hpp"

#include "simile/csv.hpp"
#include "simile/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace simile {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
double log_phi(double z) { return -0.5 * z * z - kLogSqrt2Pi; }
}  // namespace

std::string to_string(PriorFamily f) {
  switch (f) {
    case PriorFamily::normal: return "normal";
    case PriorFamily::lognormal: return "lognormal";
    case PriorFamily::logit_normal: return "logit-normal";
  }
  return "unknown";
}

ParamSupport Prior::support() const {
  switch (family) {
    case PriorFamily::normal: return ParamSupport::real;
    case PriorFamily::lognormal: return ParamSupport::positive;
    case PriorFamily::logit_normal: return ParamSupport::unit;
  }
  return ParamSupport::real;
}

double Prior::log_density(double x) const {
  switch (family) {
    case PriorFamily::normal:
      if (!std::isfinite(x)) return -kInf;
      return log_phi((x - m) / s) - std::log(s);
    case PriorFamily::lognormal: {
      if (!(x > 0) || !std::isfinite(x)) return -kInf;
      const double lx = std::log(x);
      return log_phi((lx - m) / s) - std::log(s) - lx;
    }
    case PriorFamily::logit_normal: {
      if (!(x > 0 && x < 1)) return -kInf;
      const double lx = std::log(x);
      const double l1x = std::log1p(-x);
      return log_phi((lx - l1x - m) / s) - std::log(s) - lx - l1x;
    }
  }
  return -kInf;
}

double Prior::median() const {
  switch (family) {
    case PriorFamily::normal: return m;
    case PriorFamily::lognormal: return std::exp(m);
    case PriorFamily::logit_normal: return 1.0 / (1.0 + std::exp(-m));
  }
  return m;
}

nlohmann::json Prior::to_json() const { return {{"family", to_string(family)}, {"m", m}, {"s", s}}; }

Prior Prior::from_json(const nlohmann::json& j) {
  Prior p;
  const auto fam = j.at("family").get<std::string>();
  if (fam == "normal") p.family = PriorFamily::normal;
  else if (fam == "lognormal") p.family = PriorFamily::lognormal;
  else if (fam == "logit-normal" || fam == "logit_normal") p.family = PriorFamily::logit_normal;
  else throw ConfigError("unknown prior family '" + fam + "'");
  p.m = j.at("m").get<double>();
  p.s = j.at("s").get<double>();
  if (!(p.s > 0)) throw ConfigError("prior s must be > 0");
  return p;
}

double log_prior(std::span<const Prior> priors, std::span<const double> theta) {
  if (priors.size() != theta.size()) throw std::invalid_argument("log_prior: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) s += priors[i].log_density(theta[i]);
  return s;
}

std::vector<ParamSupport> prior_supports(std::span<const Prior> priors) {
  std::vector<ParamSupport> out;
  for (const auto& p : priors) out.push_back(p.support());
  return out;
}

std::vector<double> adapt_scales(std::span<const double> scales, std::size_t accepted, std::size_t window) {
  std::vector<double> out(scales.begin(), scales.end());
  if (window == 0) return out;
  const double rate = static_cast<double>(accepted) / static_cast<double>(window);
  const double factor = rate > 0.5 ? 1.1 : rate < 0.2 ? 1.0 / 1.1 : 1.0;
  for (double& s : out) s *= factor;
  return out;
}

PosteriorDraws mh_run(const LogLikFn& loglik, std::span<const Prior> priors, const ChainConfig& config,
                      std::vector<std::string> names) {
  const std::size_t dim = priors.size();
  if (dim == 0) throw std::invalid_argument("mh_run: no parameters");
  if (config.n_keep == 0) throw std::invalid_argument("mh_run: n_keep must be >= 1");
  const auto supports = prior_supports(priors);

  std::vector<double> theta = config.initial;
  if (theta.empty()) {
    for (const auto& p : priors) theta.push_back(p.median());
  }
  std::vector<double> scales = config.scales.empty() ? std::vector<double>(dim, 0.1) : config.scales;
  if (theta.size() != dim || scales.size() != dim) throw std::invalid_argument("mh_run: dimension mismatch");
  for (double s : scales) {
    if (!(s >= 0)) throw std::invalid_argument("mh_run: proposal scales must be >= 0");
  }
  if (names.empty()) {
    for (std::size_t i = 0; i < dim; ++i) names.push_back("theta" + std::to_string(i));
  }

  std::vector<double> u;
  try {
    u = to_unconstrained(supports, theta);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("mh_run: initial value outside the prior support; choose a feasible start");
  }
  std::uint64_t eval_id = 0;
  LogLikelihood current = loglik(theta, eval_id++);
  double current_prior = log_prior(priors, theta) + log_jacobian(supports, u);
  if (!current.is_finite() || !std::isfinite(current_prior)) {
    throw NumericalError("mh_run: initial state has -inf posterior; choose a feasible start");
  }

  PosteriorDraws out;
  out.names = std::move(names);
  out.draws.resize(static_cast<Eigen::Index>(config.n_keep), static_cast<Eigen::Index>(dim));
  out.loglik.reserve(config.n_keep);

  Engine engine = RngStream(config.seed, StreamId::chain).engine();
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> cand_u(dim);
  std::size_t window_accepted = 0;
  std::size_t window_count = 0;
  std::size_t burn_accepted = 0;
  std::size_t keep_accepted = 0;
  const std::size_t total = config.n_burn + config.n_keep;

  for (std::size_t iter = 0; iter < total; ++iter) {
    const bool burning = iter < config.n_burn;
    for (std::size_t i = 0; i < dim; ++i) cand_u[i] = u[i] + scales[i] * z(engine);
    const double log_u = std::log(unif(engine));

    bool accepted = false;
    const auto cand = from_unconstrained(supports, cand_u);
    const double cand_prior = log_prior(priors, cand) + log_jacobian(supports, cand_u);
    if (!std::isfinite(cand_prior)) {
      ++out.prior_rejections;
    } else {
      const LogLikelihood cand_ll = loglik(cand, eval_id++);
      if (!cand_ll.is_finite()) {
        ++out.neg_inf_rejections;
      } else if (log_u < (cand_ll.value + cand_prior) - (current.value + current_prior)) {
        accepted = true;
        u = cand_u;
        theta = cand;
        current = cand_ll;
        current_prior = cand_prior;
      }
    }

    if (burning) {
      burn_accepted += accepted;
      window_accepted += accepted;
      if (config.adapt_window > 0 && ++window_count == config.adapt_window) {
        scales = adapt_scales(scales, window_accepted, window_count);
        out.adaptation.push_back({iter + 1, static_cast<double>(window_accepted) / window_count, scales});
        window_accepted = 0;
        window_count = 0;
      }
    } else {
      keep_accepted += accepted;
      const auto row = static_cast<Eigen::Index>(iter - config.n_burn);
      for (std::size_t i = 0; i < dim; ++i) out.draws(row, static_cast<Eigen::Index>(i)) = theta[i];
      out.loglik.push_back(current.value);
    }
  }

  out.evaluations = eval_id;
  out.final_scales = scales;
  out.acceptance_rate = static_cast<double>(keep_accepted) / static_cast<double>(config.n_keep);
  out.burnin_acceptance =
      config.n_burn ? static_cast<double>(burn_accepted) / static_cast<double>(config.n_burn) : 0.0;
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

ParameterSummary summarize_column(std::span<const double> draws, std::string name) {
  if (draws.empty()) throw std::invalid_argument("summarize: no draws");
  ParameterSummary s;
  s.name = std::move(name);
  const double n = static_cast<double>(draws.size());
  s.mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : draws) ss += (x - s.mean) * (x - s.mean);
  s.sd = draws.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  s.q025 = quantile_sorted(sorted, 0.025);
  s.q50 = quantile_sorted(sorted, 0.5);
  s.q975 = quantile_sorted(sorted, 0.975);
  return s;
}

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws) {
  std::vector<ParameterSummary> out;
  for (std::size_t j = 0; j < draws.params(); ++j) {
    const Eigen::VectorXd col = draws.draws.col(static_cast<Eigen::Index>(j));
    out.push_back(summarize_column({col.data(), static_cast<std::size_t>(col.size())},
                                   j < draws.names.size() ? draws.names[j] : "theta" + std::to_string(j)));
  }
  return out;
}

double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0)) return static_cast<double>(n);
  // Geyer: sum consecutive pairs Gamma_k = rho_{2k} + rho_{2k+1} while positive.
  double sum_pairs = 0.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0) break;
    sum_pairs += pair;
  }
  const double tau = std::max(1.0, 2.0 * sum_pairs - 1.0);
  return static_cast<double>(n) / tau;
}

double mcse_mean(std::span<const double> draws) {
  const auto s = summarize_column(draws, "");
  return s.sd / std::sqrt(effective_sample_size(draws));
}

std::string format_summary_table(std::span<const ParameterSummary> rows, const std::string& method) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "Method" << std::setw(10) << "Parameter" << std::right << std::setw(10)
      << "Mean" << std::setw(10) << "Std.Dev." << std::setw(10) << "2.5%" << std::setw(10) << "50%"
      << std::setw(10) << "97.5%" << '\n';
  out << std::fixed << std::setprecision(3);
  bool first = true;
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << (first ? method : "") << std::setw(10) << r.name << std::right
        << std::setw(10) << r.mean << std::setw(10) << r.sd << std::setw(10) << r.q025 << std::setw(10) << r.q50
        << std::setw(10) << r.q975 << '\n';
    first = false;
  }
  return out.str();
}

void write_summary_csv(const std::filesystem::path& path, std::span<const ParameterSummary> rows,
                       const std::string& method) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,parameter,mean,sd,q2.5,q50,q97.5\n";
  for (const auto& r : rows) {
    out << method << ',' << r.name << ',' << format_double(r.mean) << ',' << format_double(r.sd) << ','
        << format_double(r.q025) << ',' << format_double(r.q50) << ',' << format_double(r.q975) << '\n';
  }
}

void export_trace(const PosteriorDraws& draws, const std::filesystem::path& path) {
  if (draws.size() == 0) throw std::invalid_argument("export_trace: no draws");
  write_csv(path, draws.names, draws.draws);
}

PosteriorDraws read_trace(const std::filesystem::path& path) {
  auto table = read_csv(path);
  PosteriorDraws out;
  out.names = std::move(table.header);
  out.draws = std::move(table.values);
  return out;
}

}  // namespace simile
