#include "svq/stage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "svq/errors.hpp"

namespace svq {

namespace {

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

void require_input(const SvqStage& stage, std::span<const double> x, const char* what) {
  if (x.size() != stage.input_dim())
    throw DimensionMismatch(std::string(what) + ": input has dimension " +
                            std::to_string(x.size()) + ", stage expects " +
                            std::to_string(stage.input_dim()));
}

void require_batch(const SvqStage& stage, std::span<const Vector> batch, const char* what) {
  if (batch.empty()) throw EmptyDataset(std::string(what) + ": empty batch");
  for (const auto& x : batch) require_input(stage, x, what);
}

}  // namespace

SvqStage::SvqStage(std::size_t m, std::size_t n, std::size_t input_dim)
    : SvqStage(n, Matrix(m, input_dim), Vector(m, 0.0), Matrix(m, input_dim)) {}

SvqStage::SvqStage(std::size_t n, Matrix weights, Vector biases, Matrix recon)
    : n_(n), weights_(std::move(weights)), biases_(std::move(biases)), recon_(std::move(recon)) {
  if (n_ < 1) throw InvalidArgument("SvqStage: sample count n must be at least 1");
  if (biases_.empty()) throw InvalidArgument("SvqStage: codebook size m must be at least 1");
  if (weights_.cols() < 1) throw InvalidArgument("SvqStage: input dimension must be at least 1");
  if (weights_.rows() != biases_.size() || recon_.rows() != biases_.size() ||
      recon_.cols() != weights_.cols())
    throw DimensionMismatch("SvqStage: weights (" + std::to_string(weights_.rows()) + "x" +
                            std::to_string(weights_.cols()) + "), biases (" +
                            std::to_string(biases_.size()) + ") and recon (" +
                            std::to_string(recon_.rows()) + "x" + std::to_string(recon_.cols()) +
                            ") disagree");
  check_finite();
}

void SvqStage::check_finite() const {
  if (!all_finite(weights_.flat()) || !all_finite(biases_) || !all_finite(recon_.flat()))
    throw InvalidArgument("SvqStage: parameters must be finite");
}

StageGradients::StageGradients(const SvqStage& shape)
    : StageGradients(shape.m(), shape.input_dim()) {}

StageGradients::StageGradients(std::size_t m, std::size_t input_dim)
    : weights(m, input_dim), biases(m, 0.0), recon(m, input_dim) {}

void StageGradients::scale(double factor) {
  for (double& v : weights.flat()) v *= factor;
  for (double& v : biases) v *= factor;
  for (double& v : recon.flat()) v *= factor;
}

void StageGradients::add(const StageGradients& other) {
  auto acc = [](std::span<double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  acc(weights.flat(), other.weights.flat());
  acc(biases, other.biases);
  acc(recon.flat(), other.recon.flat());
}

namespace {

// log sigmoid(a) without overflow or underflow to -inf for moderate |a|
double log_sigmoid(double a) noexcept {
  if (a >= 0.0) return -std::log1p(std::exp(-a));
  return a - std::log1p(std::exp(a));
}

}  // namespace

double sigmoid(double activation) noexcept {
  // only exponentiate non-positive arguments
  if (activation >= 0.0) return 1.0 / (1.0 + std::exp(-activation));
  const double e = std::exp(activation);
  return e / (1.0 + e);
}

namespace detail {

void forward_point(const SvqStage& stage, std::span<const double> x, PointCache& cache) {
  const std::size_t m = stage.m();
  const std::size_t dim = stage.input_dim();
  cache.q.resize(m);
  cache.one_minus_q.resize(m);
  cache.p.resize(m);
  cache.sq_dist.resize(m);
  cache.xhat.assign(dim, 0.0);

  // normalise in the log domain
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < m; ++y) {
    const double a = dot(stage.weights().row(y), x) + stage.biases()[y];
    cache.q[y] = log_sigmoid(a);
    cache.one_minus_q[y] = sigmoid(-a);
    top = std::max(top, cache.q[y]);
  }
  double sum = 0.0;
  for (std::size_t y = 0; y < m; ++y) {
    cache.p[y] = std::exp(cache.q[y] - top);
    sum += cache.p[y];
    cache.q[y] = std::exp(cache.q[y]);
  }
  double d1 = 0.0;
  for (std::size_t y = 0; y < m; ++y) {
    cache.p[y] /= sum;
    const double p = cache.p[y];
    const auto r = stage.recon().row(y);
    cache.sq_dist[y] = squared_distance(x, r);
    d1 += p * cache.sq_dist[y];
    for (std::size_t k = 0; k < dim; ++k) cache.xhat[k] += p * r[k];
  }
  cache.d1 = d1;
  cache.d2 = squared_distance(x, cache.xhat);
}

void backward_point(const SvqStage& stage, std::span<const double> x, const PointCache& cache,
                    double weight, std::span<const double> upstream, StageGradients& grads,
                    std::span<double> dx) {
  const std::size_t m = stage.m();
  const std::size_t dim = stage.input_dim();
  const double c1 = weight * stage.d1_coefficient();
  const double c2 = weight * stage.d2_coefficient();

  // residual e = xhat - x
  thread_local Vector resid;
  thread_local Vector g;
  resid.resize(dim);
  g.resize(m);
  for (std::size_t k = 0; k < dim; ++k) resid[k] = cache.xhat[k] - x[k];

  // g[y] = dL/dp[y] holding the posterior as free variables
  double mean_g = 0.0;
  for (std::size_t y = 0; y < m; ++y) {
    const auto r = stage.recon().row(y);
    g[y] = c1 * cache.sq_dist[y] + 2.0 * c2 * dot(resid, r);
    if (!upstream.empty()) g[y] += upstream[y];
    mean_g += cache.p[y] * g[y];
  }

  if (!dx.empty()) {
    // direct dependence through |x - recon|^2 and |x - xhat|^2
    const double direct = -2.0 * (c1 + c2);
    for (std::size_t k = 0; k < dim; ++k) dx[k] = direct * resid[k];
  }

  for (std::size_t y = 0; y < m; ++y) {
    const double p = cache.p[y];
    // dp/da through the normalised sigmoid: p (1 - Q) (g - sum_y' p g)
    const double delta = p * cache.one_minus_q[y] * (g[y] - mean_g);
    auto gw = grads.weights.row(y);
    auto gr = grads.recon.row(y);
    const auto w = stage.weights().row(y);
    const auto r = stage.recon().row(y);
    for (std::size_t k = 0; k < dim; ++k) {
      gw[k] += delta * x[k];
      gr[k] += 2.0 * p * (c1 * (r[k] - x[k]) + c2 * resid[k]);
      if (!dx.empty()) dx[k] += delta * w[k];
    }
    grads.biases[y] += delta;
  }
}

}  // namespace detail

PosteriorVector posterior(const SvqStage& stage, std::span<const double> x) {
  require_input(stage, x, "posterior");
  PosteriorVector out{Vector(stage.m())};
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < stage.m(); ++y) {
    out.probs[y] = log_sigmoid(dot(stage.weights().row(y), x) + stage.biases()[y]);
    top = std::max(top, out.probs[y]);
  }
  double sum = 0.0;
  for (double& p : out.probs) {
    p = std::exp(p - top);
    sum += p;
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

Vector reconstruct(const SvqStage& stage, const PosteriorVector& p) {
  if (p.size() != stage.m())
    throw DimensionMismatch("reconstruct: posterior length differs from codebook size");
  Vector out(stage.input_dim(), 0.0);
  for (std::size_t y = 0; y < stage.m(); ++y) {
    const auto r = stage.recon().row(y);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += p[y] * r[k];
  }
  return out;
}

StageObjective stage_objective(const SvqStage& stage, std::span<const Vector> batch) {
  require_batch(stage, batch, "stage_objective");
  detail::PointCache cache;
  double d1 = 0.0;
  double d2 = 0.0;
  for (const auto& x : batch) {
    detail::forward_point(stage, x, cache);
    d1 += cache.d1;
    d2 += cache.d2;
  }
  const double count = static_cast<double>(batch.size());
  StageObjective obj{d1 / count, d2 / count, 0.0};
  obj.total = stage.d1_coefficient() * obj.d1 + stage.d2_coefficient() * obj.d2;
  return obj;
}

StageGradients stage_gradients(const SvqStage& stage, std::span<const Vector> batch) {
  require_batch(stage, batch, "stage_gradients");
  StageGradients grads(stage);
  detail::PointCache cache;
  for (const auto& x : batch) {
    detail::forward_point(stage, x, cache);
    detail::backward_point(stage, x, cache, 1.0, {}, grads, {});
  }
  grads.scale(1.0 / static_cast<double>(batch.size()));
  return grads;
}

MonteCarloEstimate mc_distortion_oracle(const SvqStage& stage, std::span<const double> x,
                                        std::size_t trials, std::uint64_t seed) {
  require_input(stage, x, "mc_distortion_oracle");
  if (trials == 0) throw InvalidArgument("mc_distortion_oracle: trials must be at least 1");
  const PosteriorVector p = posterior(stage, x);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> draw(p.probs.begin(), p.probs.end());

  const std::size_t dim = stage.input_dim();
  const double inv_n = 1.0 / static_cast<double>(stage.n());
  std::vector<std::size_t> counts(stage.m());
  Vector decoded(dim);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t s = 0; s < stage.n(); ++s) ++counts[draw(rng)];
    std::fill(decoded.begin(), decoded.end(), 0.0);
    for (std::size_t y = 0; y < stage.m(); ++y) {
      if (counts[y] == 0) continue;
      const double f = static_cast<double>(counts[y]) * inv_n;
      const auto r = stage.recon().row(y);
      for (std::size_t k = 0; k < dim; ++k) decoded[k] += f * r[k];
    }
    const double value = 2.0 * squared_distance(x, decoded);
    // Welford
    const double delta = value - mean;
    mean += delta / static_cast<double>(t + 1);
    m2 += delta * (value - mean);
  }
  MonteCarloEstimate est{mean, 0.0};
  if (trials > 1) {
    const double var = m2 / static_cast<double>(trials - 1);
    est.standard_error = std::sqrt(var / static_cast<double>(trials));
  }
  return est;
}

}  // namespace svq
