#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code; only the parameter containers are shared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "svq/chain.hpp"
#include "svq/stage.hpp"

namespace oracle {

using svq::Vector;

/// Direct evaluation of the normalised sigmoid posterior, in long double.
inline Vector posterior(const svq::SvqStage& s, const Vector& x) {
  std::vector<long double> q(s.m());
  long double total = 0.0L;
  for (std::size_t y = 0; y < s.m(); ++y) {
    long double a = s.biases()[y];
    for (std::size_t k = 0; k < x.size(); ++k) a += static_cast<long double>(s.weights()(y, k)) * x[k];
    q[y] = 1.0L / (1.0L + std::exp(-a));
    total += q[y];
  }
  Vector p(s.m());
  for (std::size_t y = 0; y < s.m(); ++y) p[y] = static_cast<double>(q[y] / total);
  return p;
}

inline double log_factorial(std::size_t k) { return std::lgamma(static_cast<double>(k) + 1.0); }

/// Calls f(counts) for every histogram of n draws over m codes.
inline void for_each_histogram(std::size_t m, std::size_t n,
                               const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> counts(m, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t y, std::size_t left) {
    if (y + 1 == m) {
      counts[y] = left;
      f(counts);
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[y] = c;
      rec(y + 1, left - c);
    }
  };
  rec(0, n);
}

/// 2 E|x - sum_y (nu_y / n) recon(y)|^2 by summing over every multinomial histogram nu.
inline double enumerated_distortion(const svq::SvqStage& s, const Vector& x) {
  const Vector p = posterior(s, x);
  const std::size_t n = s.n();
  long double expectation = 0.0L;
  for_each_histogram(s.m(), n, [&](const std::vector<std::size_t>& nu) {
    long double logw = log_factorial(n);
    for (std::size_t y = 0; y < nu.size(); ++y) {
      logw -= log_factorial(nu[y]);
      if (nu[y] > 0) logw += static_cast<long double>(nu[y]) * std::log(static_cast<long double>(p[y]));
    }
    long double d = 0.0L;
    for (std::size_t k = 0; k < x.size(); ++k) {
      long double xh = 0.0L;
      for (std::size_t y = 0; y < nu.size(); ++y)
        xh += static_cast<long double>(nu[y]) / n * s.recon()(y, k);
      d += (x[k] - xh) * (x[k] - xh);
    }
    expectation += std::exp(logw) * d;
  });
  return static_cast<double>(2.0L * expectation);
}

/// Central finite difference of f with respect to every entry of `params`.
inline Vector finite_difference(std::span<double> params, const std::function<double()>& f, double h) {
  Vector g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f();
    params[i] = saved - h;
    const double down = f();
    params[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Largest |a - b| / max(|a|, |b|, floor) over the entries.
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline svq::SvqStage random_stage(std::size_t m, std::size_t n, std::size_t dim, double range,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-range, range);
  svq::SvqStage s(m, n, dim);
  for (auto& v : s.weights().flat()) v = u(rng);
  for (auto& v : s.biases()) v = u(rng);
  for (auto& v : s.recon().flat()) v = u(rng);
  return s;
}

inline std::vector<Vector> random_batch(std::size_t count, std::size_t dim, double range,
                                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-range, range);
  std::vector<Vector> out(count, Vector(dim));
  for (auto& x : out)
    for (auto& v : x) v = u(rng);
  return out;
}

struct KMeansResult {
  std::vector<Vector> centres;
  double distortion = 0.0;  // mean squared distance to the nearest centre
};

inline double nearest_sq(const std::vector<Vector>& centres, const Vector& x, std::size_t* which = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centres.size(); ++c) {
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) d += (x[k] - centres[c][k]) * (x[k] - centres[c][k]);
    if (d < best) {
      best = d;
      if (which) *which = c;
    }
  }
  return best;
}

/// Lloyd's algorithm from `restarts` random initialisations; keeps the lowest distortion.
inline KMeansResult kmeans(const std::vector<Vector>& data, std::size_t k, std::size_t restarts,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  KMeansResult best{{}, std::numeric_limits<double>::infinity()};
  const std::size_t dim = data.front().size();
  for (std::size_t r = 0; r < restarts; ++r) {
    std::vector<Vector> centres;
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    for (std::size_t c = 0; c < k; ++c) centres.push_back(data[pick(rng)]);
    for (int it = 0; it < 200; ++it) {
      std::vector<Vector> sum(k, Vector(dim, 0.0));
      std::vector<std::size_t> cnt(k, 0);
      for (const auto& x : data) {
        std::size_t c = 0;
        nearest_sq(centres, x, &c);
        ++cnt[c];
        for (std::size_t d = 0; d < dim; ++d) sum[c][d] += x[d];
      }
      bool moved = false;
      for (std::size_t c = 0; c < k; ++c) {
        if (cnt[c] == 0) continue;
        for (std::size_t d = 0; d < dim; ++d) {
          const double v = sum[c][d] / static_cast<double>(cnt[c]);
          moved = moved || v != centres[c][d];
          centres[c][d] = v;
        }
      }
      if (!moved) break;
    }
    double dist = 0.0;
    for (const auto& x : data) dist += nearest_sq(centres, x);
    dist /= static_cast<double>(data.size());
    if (dist < best.distortion) best = {centres, dist};
  }
  return best;
}

/// Mean resultant length of angles, computed directly.
inline double concentration(const std::vector<double>& angles) {
  double c = 0.0, s = 0.0;
  for (double a : angles) {
    c += std::cos(a);
    s += std::sin(a);
  }
  const double n = static_cast<double>(angles.size());
  return std::hypot(c / n, s / n);
}

/// Largest angle between successive chords of a sampled curve.
inline double max_turning_angle(const std::vector<Vector>& curve) {
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < curve[i].size(); ++k) {
      const double a = curve[i][k] - curve[i - 1][k];
      const double b = curve[i + 1][k] - curve[i][k];
      dot += a * b;
      na += a * a;
      nb += b * b;
    }
    if (na == 0.0 || nb == 0.0) continue;
    worst = std::max(worst, std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0)));
  }
  return worst;
}

}  // namespace oracle
