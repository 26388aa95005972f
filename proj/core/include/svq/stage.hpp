#pragma once

// A single stochastic vector quantiser: sigmoid-normalised posterior over
// m code indices, linear reconstruction from n-sample histograms, and the
// constrained distortion objective with its analytic gradients.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "svq/matrix.hpp"

namespace svq {

struct PosteriorVector {
  Vector probs;

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t y) const { return probs[y]; }
  friend bool operator==(const PosteriorVector&, const PosteriorVector&) = default;
};

/// Batch-averaged objective. `d1` and `d2` are the unweighted terms;
/// total = (2/n) d1 + (2(n-1)/n) d2.
struct StageObjective {
  double d1 = 0.0;
  double d2 = 0.0;
  double total = 0.0;

  friend bool operator==(const StageObjective&, const StageObjective&) = default;
};

class SvqStage {
public:
  /// All parameters zero.
  SvqStage(std::size_t m, std::size_t n, std::size_t input_dim);
  /// Validates that the shapes agree and every value is finite.
  SvqStage(std::size_t n, Matrix weights, Vector biases, Matrix recon);

  std::size_t m() const noexcept { return biases_.size(); }
  std::size_t n() const noexcept { return n_; }
  std::size_t input_dim() const noexcept { return weights_.cols(); }

  const Matrix& weights() const noexcept { return weights_; }
  const Vector& biases() const noexcept { return biases_; }
  const Matrix& recon() const noexcept { return recon_; }
  Matrix& weights() noexcept { return weights_; }
  Vector& biases() noexcept { return biases_; }
  Matrix& recon() noexcept { return recon_; }

  /// Weight of the first objective term, 2/n.
  double d1_coefficient() const noexcept { return 2.0 / static_cast<double>(n_); }
  /// Weight of the second objective term, 2(n-1)/n.
  double d2_coefficient() const noexcept {
    return 2.0 * static_cast<double>(n_ - 1) / static_cast<double>(n_);
  }

  /// Throws InvalidArgument if any parameter is non-finite.
  void check_finite() const;

  friend bool operator==(const SvqStage&, const SvqStage&) = default;

private:
  std::size_t n_;
  Matrix weights_;
  Vector biases_;
  Matrix recon_;
};

struct StageGradients {
  Matrix weights;
  Vector biases;
  Matrix recon;

  explicit StageGradients(const SvqStage& shape);
  StageGradients(std::size_t m, std::size_t input_dim);
  void scale(double factor);
  void add(const StageGradients& other);
};

/// Numerically stable logistic function.
double sigmoid(double activation) noexcept;

/// Pr(y|x) = Q(y|x) / sum_y' Q(y'|x), Q = sigmoid(w(y).x + b(y)).
PosteriorVector posterior(const SvqStage& stage, std::span<const double> x);

/// Sum_y p[y] recon[y].
Vector reconstruct(const SvqStage& stage, const PosteriorVector& p);

StageObjective stage_objective(const SvqStage& stage, std::span<const Vector> batch);

/// Analytic gradients of stage_objective(...).total.
StageGradients stage_gradients(const SvqStage& stage, std::span<const Vector> batch);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Estimates 2 E|x - sum_y (nu_y/n) recon[y]|^2 over multinomial histograms nu
/// of n draws from posterior(stage, x).
MonteCarloEstimate mc_distortion_oracle(const SvqStage& stage, std::span<const double> x,
                                        std::size_t trials, std::uint64_t seed);

namespace detail {

/// Forward quantities for one input, kept for the backward pass.
struct PointCache {
  Vector q;             // sigmoid outputs
  Vector one_minus_q;   // 1 - q, computed without cancellation
  Vector p;             // normalised posterior
  Vector xhat;          // sum_y p(y) recon(y)
  Vector sq_dist;       // |x - recon(y)|^2
  double d1 = 0.0;
  double d2 = 0.0;
};

void forward_point(const SvqStage& stage, std::span<const double> x, PointCache& cache);

/// Accumulates gradients of weight * (c1 d1 + c2 d2) + upstream . p for one input.
/// `upstream` is dL/dp from downstream stages (empty means none). When `dx`
/// is non-empty it receives dL/dx.
void backward_point(const SvqStage& stage, std::span<const double> x, const PointCache& cache,
                    double weight, std::span<const double> upstream, StageGradients& grads,
                    std::span<double> dx);

}  // namespace detail

}  // namespace svq
