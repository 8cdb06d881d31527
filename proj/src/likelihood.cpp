#include "simile/likelihood.hpp"

#include "parallel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace simile {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal_density(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

std::vector<std::uint64_t> simulate_cell_counts(const Simulator& sim, const IntervalGrid& grid,
                                                std::size_t n_sim, const RngStream& stream,
                                                std::size_t workers) {
  if (n_sim == 0) throw std::invalid_argument("simile: nSim must be >= 1");
  if (sim.dim() != grid.dims()) throw std::invalid_argument("simile: grid/model dimension mismatch");
  const std::size_t d = sim.dim();
  const std::size_t n_chunks = (n_sim + kChunkSize - 1) / kChunkSize;
  workers = std::max<std::size_t>(1, std::min(workers, n_chunks));

  std::vector<std::vector<std::uint64_t>> shard_counts(workers, std::vector<std::uint64_t>(grid.cell_count(), 0));
  std::vector<std::vector<double>> buffers(workers, std::vector<double>(kChunkSize * d));
  detail::for_each_chunk(n_chunks, workers, [&](std::size_t w, std::size_t c) {
    const std::size_t count = std::min(kChunkSize, n_sim - c * kChunkSize);
    Engine engine = stream.engine(c);
    std::span<double> buf(buffers[w].data(), count * d);
    sim.fill(engine, buf);
    accumulate_counts(grid, buf, count, shard_counts[w]);
  });
  for (std::size_t w = 1; w < workers; ++w) {
    for (std::size_t c = 0; c < grid.cell_count(); ++c) shard_counts[0][c] += shard_counts[w][c];
  }
  return std::move(shard_counts[0]);
}

LogLikelihood loglik_from_counts(std::span<const std::uint64_t> counts, const ObservedCells& observed,
                                 std::size_t n_sim) {
  LogLikelihood out;
  out.n_sim = n_sim;
  const double log_n = std::log(static_cast<double>(n_sim));
  for (const auto& [cell, mult] : observed.cells) {
    const std::uint64_t k = counts[cell];
    if (k == 0) {
      ++out.zero_cells;
      continue;
    }
    out.value += static_cast<double>(mult) * (std::log(static_cast<double>(k)) - log_n);
  }
  if (out.zero_cells > 0) out.value = -kInf;
  return out;
}

LogLikelihood simile_loglik(const Simulator& sim, const IntervalGrid& grid, const ObservedCells& observed,
                            std::size_t n_sim, const RngStream& stream, std::size_t workers) {
  const auto counts = simulate_cell_counts(sim, grid, n_sim, stream, workers);
  return loglik_from_counts(counts, observed, n_sim);
}

LogLikelihood simile_loglik(const ModelSpec& model, const IntervalGrid& grid, const ObservedCells& observed,
                            std::size_t n_sim, const RngStream& stream, std::size_t workers) {
  return simile_loglik(*make_simulator(model), grid, observed, n_sim, stream, workers);
}

std::vector<double> normal_cell_probabilities(const IntervalGrid& grid, double mu, double sigma) {
  if (grid.dims() != 1) throw std::invalid_argument("normal_cell_probabilities: 1-d grid required");
  const auto& axis = grid.axis(0);
  std::vector<double> p(axis.interval_count());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto [lo, hi] = axis.bounds(i);
    // Upper-tail form keeps precision for cells far right of mu.
    const double zl = (lo - mu) / sigma;
    const double zh = (hi - mu) / sigma;
    p[i] = zl > 0 ? std_normal_cdf(-zl) - std_normal_cdf(-zh) : std_normal_cdf(zh) - std_normal_cdf(zl);
  }
  return p;
}

double exact_loglik_normal(double mu, double sigma, std::span<const double> data) {
  double s = 0.0;
  for (double y : data) s += log_normal_density((y - mu) / sigma) - std::log(sigma);
  return s;
}

double exact_loglik_lognormal(double mu, double sigma, std::span<const double> data) {
  if (!(sigma > 0)) throw std::invalid_argument("exact_loglik_lognormal: sigma must be > 0");
  double s = 0.0;
  for (double y : data) {
    if (!(y > 0)) throw std::invalid_argument("exact_loglik_lognormal: data must be > 0");
    const double ly = std::log(y);
    s += log_normal_density((ly - mu) / sigma) - std::log(sigma) - ly;
  }
  return s;
}

double indirect_pdf(double y, double mu, double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("indirect_pdf: sigma must be > 0");
  if (!(y > 0)) return 0.0;
  const double log_y = std::log(y);
  // f_LN(y/s)/s = phi((log y - log s - mu)/sigma) / (y sigma). With a = e^v the
  // peak sits near v = log y - mu with width sigma whatever the scale of y;
  // below v_lo the normal factor is under 1e-300.
  const double v_hi = std::log(std::numbers::pi / 2);
  const double v_lo = std::min(log_y - mu - 40.0 * sigma, v_hi - 1.0);
  auto integrand = [=](double v) {
    const double a = std::exp(v);
    const double z = (log_y - std::log(std::sin(a)) - mu) / sigma;
    return std::exp(log_normal_density(z)) * a;
  };
  double error = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, v_lo, v_hi, 20, 1e-10, &error);
  if (integral > 1e-280 && !(error <= 1e-6 * integral)) {
    std::ostringstream msg;
    msg << "indirect_pdf: quadrature did not converge at y=" << y << " mu=" << mu << " sigma=" << sigma
        << " (integral " << integral << ", error estimate " << error << ")";
    throw NumericalError(msg.str());
  }
  return 2.0 / std::numbers::pi * integral / (y * sigma);
}

double exact_loglik_indirect(double mu, double sigma, std::span<const double> data) {
  double s = 0.0;
  for (double y : data) {
    if (!(y > 0)) throw std::invalid_argument("exact_loglik_indirect: data must be > 0");
    s += std::log(indirect_pdf(y, mu, sigma));
  }
  return s;
}

double network_logpdf(double l1, double l2, double l3, double y1, double y2) {
  if (!(l1 > 0 && l2 > 0 && l3 > 0)) throw std::invalid_argument("network_pdf: rates must be > 0");
  if (y1 < 0 || y2 < 0) return -kInf;
  const double m = std::min(y1, y2);
  if (m == 0.0) return -kInf;
  const double a = l1 - l2 - l3;
  // log of int_0^m exp(-a x) dx
  double log_int;
  if (std::abs(a) < 1e-10) {
    log_int = std::log(m);
  } else if (a > 0) {
    log_int = std::log(-std::expm1(-a * m)) - std::log(a);
  } else {
    const double b = -a;
    log_int = b * m + std::log(-std::expm1(-b * m)) - std::log(b);
  }
  return std::log(l1) + std::log(l2) + std::log(l3) - l2 * y1 - l3 * y2 + log_int;
}

double network_pdf(double l1, double l2, double l3, double y1, double y2) {
  return std::exp(network_logpdf(l1, l2, l3, y1, y2));
}

double exact_loglik_network(double l1, double l2, double l3, const Matrix& pairs) {
  if (pairs.cols() != 2) throw std::invalid_argument("exact_loglik_network: data must have 2 columns");
  double s = 0.0;
  for (Eigen::Index i = 0; i < pairs.rows(); ++i) {
    if (!(pairs(i, 0) > 0 && pairs(i, 1) > 0)) {
      throw std::invalid_argument("exact_loglik_network: data must be > 0");
    }
    s += network_logpdf(l1, l2, l3, pairs(i, 0), pairs(i, 1));
  }
  return s;
}

NormalPosterior conjugate_posterior_oracle(double mu0, double tau0, std::span<const double> data,
                                           double sigma) {
  const double n = static_cast<double>(data.size());
  double sum = 0.0;
  for (double y : data) sum += y;
  const double precision = n / (sigma * sigma) + 1.0 / (tau0 * tau0);
  const double mean = (sum / (sigma * sigma) + mu0 / (tau0 * tau0)) / precision;
  return {mean, 1.0 / std::sqrt(precision)};
}

// ---------------------------------------------------------------------------

std::string to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::exact_gamma: return "exact-gamma";
    case ComponentKind::exact_binomial: return "exact-binomial";
    case ComponentKind::exact_closed_form: return "exact-closed-form";
    case ComponentKind::simile: return "simile";
  }
  return "unknown";
}

void LikelihoodComponentSet::add(LikelihoodComponent component) {
  if (!component.eval) throw std::invalid_argument("LikelihoodComponentSet: component without evaluator");
  components_.push_back(std::move(component));
}

LogLikelihood LikelihoodComponentSet::evaluate(std::span<const double> theta, std::uint64_t eval_id) const {
  LogLikelihood total;
  for (const auto& c : components_) {
    const LogLikelihood part = c.eval(theta, eval_id);
    total.n_sim += part.n_sim;
    total.zero_cells += part.zero_cells;
    total.value += part.value;
    if (!part.is_finite()) {
      total.value = -kInf;
      break;
    }
  }
  return total;
}

std::size_t LikelihoodComponentSet::total_data() const {
  std::size_t n = 0;
  for (const auto& c : components_) n += c.n_data;
  return n;
}

double gamma_loglik(std::span<const double> data, GammaShapeRate g) {
  const double norm = g.shape * std::log(g.rate) - std::lgamma(g.shape);
  double s = 0.0;
  for (double t : data) {
    if (!(t > 0)) return -kInf;
    s += norm + (g.shape - 1.0) * std::log(t) - g.rate * t;
  }
  return s;
}

double binomial_logpmf(std::size_t x, std::size_t n, double p) {
  if (x > n) throw std::invalid_argument("binomial_logpmf: x > n");
  const double xs = static_cast<double>(x);
  const double ns = static_cast<double>(n);
  const double log_choose = std::lgamma(ns + 1) - std::lgamma(xs + 1) - std::lgamma(ns - xs + 1);
  // 0 * log(0) = 0 at the boundaries
  const double a = x == 0 ? 0.0 : xs * std::log(p);
  const double b = x == n ? 0.0 : (ns - xs) * std::log1p(-p);
  return log_choose + a + b;
}

LikelihoodComponentSet make_flowgraph_likelihood(const FlowgraphData& data, ZeroTwoMode mode,
                                                 std::shared_ptr<const SimileContext> simile) {
  auto shared = std::make_shared<const FlowgraphData>(data);
  LikelihoodComponentSet set;
  using Sample = std::vector<double> FlowgraphComponentData::*;
  using Holding = GammaShapeRate (FlowgraphParams::*)() const;
  auto add_gamma = [&](std::string label, Sample sample, Holding holding) {
    set.add({ComponentKind::exact_gamma, std::move(label), (shared->components.*sample).size(),
             [shared, sample, holding](std::span<const double> theta, std::uint64_t) {
               const auto params = FlowgraphParams::from_theta(theta);
               return LogLikelihood::exact(gamma_loglik(shared->components.*sample, (params.*holding)()));
             }});
  };
  add_gamma("t01", &FlowgraphComponentData::t01, &FlowgraphParams::g01);
  add_gamma("t10", &FlowgraphComponentData::t10, &FlowgraphParams::g10);
  add_gamma("t12", &FlowgraphComponentData::t12, &FlowgraphParams::g12);
  set.add({ComponentKind::exact_binomial, "returns", 1, [shared](std::span<const double> theta, std::uint64_t) {
             const double p = theta[6];
             return LogLikelihood::exact(binomial_logpmf(shared->components.x, shared->components.n, p));
           }});

  if (shared->first_passage.empty()) return set;
  if (mode == ZeroTwoMode::oracle) {
    set.add({ComponentKind::exact_closed_form, "t02", shared->first_passage.size(),
             [shared](std::span<const double> theta, std::uint64_t) {
               const auto params = FlowgraphParams::from_theta(theta);
               const auto density = flowgraph_pdf_oracle(params, shared->first_passage);
               double s = 0.0;
               for (double t : shared->first_passage) s += std::log(density.pdf_at(t));
               return LogLikelihood::exact(s);
             }});
  } else {
    if (!simile) throw std::invalid_argument("make_flowgraph_likelihood: SimILE mode needs a SimileContext");
    set.add({ComponentKind::simile, "t02", shared->first_passage.size(),
             [simile](std::span<const double> theta, std::uint64_t eval_id) {
               const ModelSpec model{ModelId::flowgraph02, {theta.begin(), theta.end()}};
               return simile_loglik(model, simile->grid, simile->cells, simile->n_sim,
                                    simile->stream.with_substream(eval_id), simile->workers);
             }});
  }
  return set;
}

LogLikelihood flowgraph_joint_loglik(const FlowgraphParams& params, const FlowgraphData& data,
                                     ZeroTwoMode mode, std::shared_ptr<const SimileContext> simile,
                                     std::uint64_t eval_id) {
  const auto theta = params.to_theta();
  return make_flowgraph_likelihood(data, mode, std::move(simile)).evaluate(theta, eval_id);
}

}  // namespace simile
