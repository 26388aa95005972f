#pragma once

#include <span>

namespace svq {

/// Mean resultant length |E exp(i theta)|, in [0, 1]. 1 means all angles coincide.
double mean_resultant_length(std::span<const double> angles);

/// p-value of the Rayleigh test for circular uniformity (Zar's approximation).
double rayleigh_p_value(std::span<const double> angles);

}  // namespace svq
