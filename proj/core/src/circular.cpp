#include "svq/circular.hpp"

#include <algorithm>
#include <cmath>

#include "svq/errors.hpp"

namespace svq {

double mean_resultant_length(std::span<const double> angles) {
  if (angles.empty()) throw EmptyDataset("mean_resultant_length: no angles");
  double c = 0.0;
  double s = 0.0;
  for (double a : angles) {
    c += std::cos(a);
    s += std::sin(a);
  }
  const double n = static_cast<double>(angles.size());
  return std::hypot(c, s) / n;
}

double rayleigh_p_value(std::span<const double> angles) {
  const double n = static_cast<double>(angles.size());
  const double rbar = mean_resultant_length(angles);
  const double r = rbar * n;
  // Zar, Biostatistical Analysis, eq. 27.4
  const double p = std::exp(std::sqrt(1.0 + 4.0 * n + 4.0 * (n * n - r * r)) - (1.0 + 2.0 * n));
  return std::min(1.0, p);
}

}  // namespace svq
