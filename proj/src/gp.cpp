#include "simile/gp.hpp"

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace simile {

namespace {

Matrix correlation(const Matrix& x, std::span<const double> lengths, double nugget) {
  const Eigen::Index n = x.rows();
  Matrix r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0 + nugget;
    for (Eigen::Index k = i + 1; k < n; ++k) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double d = (x(i, j) - x(k, j)) / lengths[static_cast<std::size_t>(j)];
        s += d * d;
      }
      r(i, k) = r(k, i) = std::exp(-s);
    }
  }
  return r;
}

double logistic(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }
double logit(double f) { return std::log(f) - std::log1p(-f); }

// Box in log space, searched through a logistic map so the optimizer is unconstrained.
struct SearchSpace {
  std::vector<double> lo, hi;  // log-scale bounds; last entry is the nugget

  std::vector<double> decode(const gsl_vector* z) const {
    std::vector<double> v(lo.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(lo[i] + (hi[i] - lo[i]) * logistic(gsl_vector_get(z, i)));
    return v;
  }
  double encode(std::size_t i, double value) const {
    const double f = std::clamp((std::log(value) - lo[i]) / (hi[i] - lo[i]), 1e-6, 1.0 - 1e-6);
    return logit(f);
  }
};

struct Objective {
  const Matrix* inputs;
  const Vector* targets;
  const SearchSpace* space;
};

double negative_profile(const gsl_vector* z, void* params) {
  const auto* obj = static_cast<const Objective*>(params);
  auto v = obj->space->decode(z);
  const double nugget = v.back();
  v.pop_back();
  const double ll = gp_profile_loglik(*obj->inputs, *obj->targets, v, nugget);
  return std::isfinite(ll) ? -ll : 1e300;
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

}  // namespace

double gp_profile_loglik(const Matrix& inputs, const Vector& targets, std::span<const double> lengths,
                         double nugget, double* mean_out, double* variance_out) {
  const Eigen::Index n = inputs.rows();
  const Eigen::LLT<Eigen::MatrixXd> llt(correlation(inputs, lengths, nugget));
  if (llt.info() != Eigen::Success) return -kInf;
  const Vector ones = Vector::Ones(n);
  const Vector r_inv_one = llt.solve(ones);
  const Vector r_inv_y = llt.solve(targets);
  const double mean = ones.dot(r_inv_y) / ones.dot(r_inv_one);
  const Vector resid = targets - mean * ones;
  const double variance = resid.dot(llt.solve(resid)) / static_cast<double>(n);
  if (!(variance > 0) || !std::isfinite(variance)) return -kInf;
  const Eigen::MatrixXd& l = llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(l(i, i));
  if (mean_out) *mean_out = mean;
  if (variance_out) *variance_out = variance;
  const double dn = static_cast<double>(n);
  return -0.5 * dn * std::log(variance) - 0.5 * log_det - 0.5 * dn * (1.0 + std::log(2.0 * std::numbers::pi));
}

GpHyperparams gp_fit(const Matrix& inputs, const Vector& targets, const GpFitOptions& options) {
  const auto dims = static_cast<std::size_t>(inputs.cols());
  if (inputs.rows() != targets.size()) throw std::invalid_argument("gp_fit: inputs/targets size mismatch");
  if (static_cast<std::size_t>(inputs.rows()) < dims + 2) throw std::invalid_argument("gp_fit: need n >= P + 2");

  std::vector<double> range(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    const auto col = inputs.col(static_cast<Eigen::Index>(j));
    range[j] = col.maxCoeff() - col.minCoeff();
    if (!(range[j] > 0)) throw std::invalid_argument("gp_fit: degenerate input column");
  }

  const double spread = targets.maxCoeff() - targets.minCoeff();
  if (!(spread > 1e-14 * std::max(1.0, targets.cwiseAbs().maxCoeff()))) {
    GpHyperparams h;
    h.lengths = range;
    h.variance = 0.0;
    h.nugget = options.min_nugget;
    h.mean = targets.mean();
    return h;
  }

  SearchSpace space;
  for (std::size_t j = 0; j < dims; ++j) {
    space.lo.push_back(std::log(range[j] * options.min_length_factor));
    space.hi.push_back(std::log(range[j] * options.max_length_factor));
  }
  space.lo.push_back(std::log(options.min_nugget));
  space.hi.push_back(std::log(options.max_nugget));

  Objective objective{&inputs, &targets, &space};
  gsl_multimin_function fn{&negative_profile, dims + 1, &objective};

  struct Start {
    double length_factor;
    double nugget;
  };
  const Start starts[] = {{0.25, 1e-4}, {0.5, 1e-6}, {1.0, 1e-2}};

  GpHyperparams best;
  best.log_likelihood = -kInf;
  for (const auto& start : starts) {
    std::unique_ptr<gsl_vector, VectorDeleter> z(gsl_vector_alloc(dims + 1));
    std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(dims + 1));
    for (std::size_t j = 0; j < dims; ++j) gsl_vector_set(z.get(), j, space.encode(j, range[j] * start.length_factor));
    gsl_vector_set(z.get(), dims, space.encode(dims, std::max(start.nugget, options.min_nugget)));
    gsl_vector_set_all(step.get(), 1.0);

    std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> minimizer(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dims + 1));
    gsl_multimin_fminimizer_set(minimizer.get(), &fn, z.get(), step.get());
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(minimizer.get()), 1e-4) == GSL_SUCCESS) break;
    }

    auto v = space.decode(gsl_multimin_fminimizer_x(minimizer.get()));
    GpHyperparams h;
    h.nugget = v.back();
    v.pop_back();
    h.lengths = v;
    h.log_likelihood = gp_profile_loglik(inputs, targets, h.lengths, h.nugget, &h.mean, &h.variance);
    if (h.log_likelihood > best.log_likelihood) best = h;
  }
  if (!std::isfinite(best.log_likelihood)) {
    throw NumericalError("gp_fit: likelihood not finite at any start");
  }
  return best;
}

GaussianProcess::GaussianProcess(Matrix inputs, const Vector& targets, GpHyperparams hyper)
    : inputs_(std::move(inputs)), hyper_(std::move(hyper)) {
  if (hyper_.variance == 0.0) {
    weights_ = Vector::Zero(inputs_.rows());
    return;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(correlation(inputs_, hyper_.lengths, hyper_.nugget));
  if (llt.info() != Eigen::Success) throw NumericalError("GaussianProcess: correlation matrix not positive definite");
  weights_ = llt.solve(targets - hyper_.mean * Vector::Ones(targets.size()));
}

double GaussianProcess::predict(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != inputs_.cols()) throw std::invalid_argument("GP predict: dimension");
  double s = hyper_.mean;
  if (hyper_.variance == 0.0) return s;
  for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
    double d2 = 0.0;
    for (Eigen::Index j = 0; j < inputs_.cols(); ++j) {
      const double d = (x[static_cast<std::size_t>(j)] - inputs_(i, j)) / hyper_.lengths[static_cast<std::size_t>(j)];
      d2 += d * d;
    }
    s += std::exp(-d2) * weights_(i);
  }
  return s;
}

}  // namespace simile
