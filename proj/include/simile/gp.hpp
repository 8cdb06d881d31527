#pragma once

#include "simile/types.hpp"

#include <Eigen/Cholesky>

#include <cstddef>
#include <span>
#include <vector>

namespace simile {

/// Hyperparameters of a constant-mean GP with correlation
/// exp(-sum_j (dx_j / l_j)^2) and covariance variance * (R + nugget I).
struct GpHyperparams {
  std::vector<double> lengths;
  double variance = 0.0;
  double nugget = 1e-8;
  double mean = 0.0;
  double log_likelihood = 0.0;
};

struct GpFitOptions {
  double min_nugget = 1e-8;
  double max_nugget = 1.0;
  double min_length_factor = 1e-2;  // times the input range
  double max_length_factor = 1e2;
  std::size_t max_iterations = 400;
};

/// Profile log-likelihood with the mean and variance maximized out:
///   -n/2 log(sigma2_hat) - 1/2 log|R + nugget I| - n/2 (1 + log 2 pi).
/// Returns -inf when the correlation matrix is not positive definite.
double gp_profile_loglik(const Matrix& inputs, const Vector& targets, std::span<const double> lengths,
                         double nugget, double* mean_out = nullptr, double* variance_out = nullptr);

/// Maximum-likelihood hyperparameters by multi-start Nelder-Mead on
/// logistic-bounded log-scale parameters.
GpHyperparams gp_fit(const Matrix& inputs, const Vector& targets, const GpFitOptions& options = {});

/// Kriging predictor for fixed hyperparameters.
class GaussianProcess {
 public:
  GaussianProcess() = default;
  GaussianProcess(Matrix inputs, const Vector& targets, GpHyperparams hyper);

  double predict(std::span<const double> x) const;
  const GpHyperparams& hyperparams() const { return hyper_; }

 private:
  Matrix inputs_;
  Vector weights_;  // (R + nugget I)^{-1} (y - mean)
  GpHyperparams hyper_;
};

}  // namespace simile
