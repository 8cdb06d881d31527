#pragma once

#include "simile/models.hpp"

#include <span>
#include <vector>

namespace simile {

// Natural <-> unconstrained maps: identity for real parameters, log for
// positive ones, logit for (0, 1) ones.

/// Throws std::invalid_argument when x is outside the support.
double to_unconstrained(ParamSupport support, double x);
double from_unconstrained(ParamSupport support, double u);
/// log |d natural / d u| at u.
double log_jacobian(ParamSupport support, double u);

std::vector<double> to_unconstrained(std::span<const ParamSupport> supports, std::span<const double> theta);
std::vector<double> from_unconstrained(std::span<const ParamSupport> supports, std::span<const double> u);
double log_jacobian(std::span<const ParamSupport> supports, std::span<const double> u);

}  // namespace simile
