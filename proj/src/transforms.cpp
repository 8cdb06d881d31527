#include "simile/transforms.hpp"

#include <cmath>
#include <stdexcept>

namespace simile {

double to_unconstrained(ParamSupport support, double x) {
  switch (support) {
    case ParamSupport::real:
      if (!std::isfinite(x)) break;
      return x;
    case ParamSupport::positive:
      if (!(x > 0) || !std::isfinite(x)) break;
      return std::log(x);
    case ParamSupport::unit:
      if (!(x > 0 && x < 1)) break;
      return std::log(x) - std::log1p(-x);
  }
  throw std::invalid_argument("transform: value " + std::to_string(x) + " outside parameter support");
}

double from_unconstrained(ParamSupport support, double u) {
  switch (support) {
    case ParamSupport::real: return u;
    case ParamSupport::positive: return std::exp(u);
    case ParamSupport::unit: return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
  }
  return u;
}

double log_jacobian(ParamSupport support, double u) {
  switch (support) {
    case ParamSupport::real: return 0.0;
    case ParamSupport::positive: return u;
    case ParamSupport::unit:
      // log(p (1 - p)) with p = logistic(u)
      return -std::abs(u) - 2.0 * std::log1p(std::exp(-std::abs(u)));
  }
  return 0.0;
}

std::vector<double> to_unconstrained(std::span<const ParamSupport> supports, std::span<const double> theta) {
  if (supports.size() != theta.size()) throw std::invalid_argument("transform: dimension mismatch");
  std::vector<double> u(theta.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = to_unconstrained(supports[i], theta[i]);
  return u;
}

std::vector<double> from_unconstrained(std::span<const ParamSupport> supports, std::span<const double> u) {
  if (supports.size() != u.size()) throw std::invalid_argument("transform: dimension mismatch");
  std::vector<double> theta(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) theta[i] = from_unconstrained(supports[i], u[i]);
  return theta;
}

double log_jacobian(std::span<const ParamSupport> supports, std::span<const double> u) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += log_jacobian(supports[i], u[i]);
  return s;
}

}  // namespace simile
