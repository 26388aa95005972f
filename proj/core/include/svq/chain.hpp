#pragma once

// Feed-forward chain of linked stochastic vector quantisers. Layer l holds
// the infinite-sample posterior of stage l, which is the input to stage l+1.

#include <cstddef>
#include <span>
#include <vector>

#include "svq/stage.hpp"

namespace svq {

class ChainNetwork {
public:
  /// Validates L >= 1, positive lambdas, and stage l input_dim == stage l-1 m.
  ChainNetwork(std::vector<SvqStage> stages, Vector lambdas);

  /// Zero-parameter chain with layer sizes M = (M_0, ..., M_L) and sample counts n_1..n_L.
  static ChainNetwork zeros(std::span<const std::size_t> layer_sizes,
                            std::span<const std::size_t> sample_counts, Vector lambdas);

  std::size_t num_stages() const noexcept { return stages_.size(); }
  const std::vector<SvqStage>& stages() const noexcept { return stages_; }
  std::vector<SvqStage>& stages() noexcept { return stages_; }
  const SvqStage& stage(std::size_t l) const { return stages_.at(l); }
  SvqStage& stage(std::size_t l) { return stages_.at(l); }
  const Vector& lambdas() const noexcept { return lambdas_; }

  /// (M_0, M_1, ..., M_L).
  std::vector<std::size_t> layer_sizes() const;
  std::size_t input_dim() const { return stages_.front().input_dim(); }

  friend bool operator==(const ChainNetwork&, const ChainNetwork&) = default;

private:
  std::vector<SvqStage> stages_;
  Vector lambdas_;
};

struct ChainObjective {
  std::vector<StageObjective> stages;
  double weighted_total = 0.0;
};

struct ChainGradients {
  std::vector<StageGradients> stages;
  ChainObjective objective;
};

/// Layer activities x_1..x_L for input x_0.
std::vector<PosteriorVector> feedforward(const ChainNetwork& chain, std::span<const double> x0);

ChainObjective chain_objective(const ChainNetwork& chain, std::span<const Vector> batch);

/// Gradients of the weighted total. With `full_backprop` each stage also receives
/// the gradient of every downstream stage objective through its output posterior;
/// otherwise each stage sees only its own weighted objective.
ChainGradients chain_gradients(const ChainNetwork& chain, std::span<const Vector> batch,
                               bool full_backprop = true);

/// Fills every weight, bias and reconstruction component uniformly from [-range, range].
void randomize_parameters(ChainNetwork& chain, double range, std::uint64_t seed);

/// Stages whose posteriors over the batch all lie within total variation `tolerance`
/// of each other (0-based stage indices).
std::vector<std::size_t> collapsed_stages(const ChainNetwork& chain, std::span<const Vector> batch,
                                          double tolerance = 1e-3);

}  // namespace svq
