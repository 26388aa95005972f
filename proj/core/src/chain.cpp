#include "svq/chain.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "chain_internal.hpp"
#include "parallel.hpp"
#include "svq/errors.hpp"

namespace svq {

ChainNetwork::ChainNetwork(std::vector<SvqStage> stages, Vector lambdas)
    : stages_(std::move(stages)), lambdas_(std::move(lambdas)) {
  if (stages_.empty()) throw InvalidArgument("ChainNetwork: need at least one stage");
  if (lambdas_.size() != stages_.size())
    throw DimensionMismatch("ChainNetwork: " + std::to_string(lambdas_.size()) +
                            " lambdas for " + std::to_string(stages_.size()) + " stages");
  for (double l : lambdas_)
    if (!(l > 0.0) || !std::isfinite(l))
      throw InvalidArgument("ChainNetwork: lambdas must be positive and finite");
  for (std::size_t l = 1; l < stages_.size(); ++l)
    if (stages_[l].input_dim() != stages_[l - 1].m())
      throw DimensionMismatch("ChainNetwork: stage " + std::to_string(l + 1) +
                              " input dimension " + std::to_string(stages_[l].input_dim()) +
                              " differs from stage " + std::to_string(l) + " codebook size " +
                              std::to_string(stages_[l - 1].m()));
}

ChainNetwork ChainNetwork::zeros(std::span<const std::size_t> layer_sizes,
                                 std::span<const std::size_t> sample_counts, Vector lambdas) {
  if (layer_sizes.size() < 2)
    throw InvalidArgument("ChainNetwork::zeros: need an input layer and at least one code layer");
  if (sample_counts.size() + 1 != layer_sizes.size())
    throw DimensionMismatch("ChainNetwork::zeros: need one sample count per stage");
  std::vector<SvqStage> stages;
  for (std::size_t l = 0; l < sample_counts.size(); ++l)
    stages.emplace_back(layer_sizes[l + 1], sample_counts[l], layer_sizes[l]);
  return ChainNetwork(std::move(stages), std::move(lambdas));
}

std::vector<std::size_t> ChainNetwork::layer_sizes() const {
  std::vector<std::size_t> sizes{stages_.front().input_dim()};
  for (const auto& s : stages_) sizes.push_back(s.m());
  return sizes;
}

std::vector<PosteriorVector> feedforward(const ChainNetwork& chain, std::span<const double> x0) {
  std::vector<PosteriorVector> layers;
  layers.reserve(chain.num_stages());
  std::span<const double> input = x0;
  for (const auto& stage : chain.stages()) {
    layers.push_back(posterior(stage, input));
    input = layers.back().probs;
  }
  return layers;
}

namespace {

struct ChunkResult {
  std::vector<StageGradients> grads;
  std::vector<double> d1;
  std::vector<double> d2;
};

void require_batch(const ChainNetwork& chain, std::span<const Vector> batch, const char* what) {
  if (batch.empty()) throw EmptyDataset(std::string(what) + ": empty batch");
  for (const auto& x : batch)
    if (x.size() != chain.input_dim())
      throw DimensionMismatch(std::string(what) + ": input has dimension " +
                              std::to_string(x.size()) + ", chain expects " +
                              std::to_string(chain.input_dim()));
}

// Forward (and optionally backward) over one chunk of the batch.
void process_chunk(const ChainNetwork& chain, std::span<const Vector> batch, bool with_grads,
                   bool full_backprop, ChunkResult& out) {
  const std::size_t L = chain.num_stages();
  std::vector<detail::PointCache> caches(L);
  std::vector<Vector> upstream(L);
  std::vector<Vector> dx(L);
  for (std::size_t l = 0; l < L; ++l) {
    upstream[l].resize(chain.stage(l).m());
    dx[l].resize(chain.stage(l).input_dim());
  }
  for (const auto& x0 : batch) {
    std::span<const double> input = x0;
    for (std::size_t l = 0; l < L; ++l) {
      detail::forward_point(chain.stage(l), input, caches[l]);
      out.d1[l] += caches[l].d1;
      out.d2[l] += caches[l].d2;
      input = caches[l].p;
    }
    if (!with_grads) continue;
    // backward from the top stage; dx of stage l+1 is dL/dp of stage l
    for (std::size_t l = L; l-- > 0;) {
      const auto& in = l == 0 ? std::span<const double>(x0) : std::span<const double>(caches[l - 1].p);
      const bool pass_down = full_backprop && l > 0;
      const bool has_upstream = full_backprop && l + 1 < L;
      detail::backward_point(chain.stage(l), in, caches[l], chain.lambdas()[l],
                             has_upstream ? std::span<const double>(dx[l + 1]) : std::span<const double>{},
                             out.grads[l], pass_down ? std::span<double>(dx[l]) : std::span<double>{});
    }
  }
}

ChainGradients evaluate(const ChainNetwork& chain, std::span<const Vector> batch, bool with_grads,
                        bool full_backprop, std::size_t threads) {
  const std::size_t L = chain.num_stages();
  const std::size_t chunks = (batch.size() + detail::kChunkSize - 1) / detail::kChunkSize;
  std::vector<ChunkResult> partial(chunks);
  for (auto& p : partial) {
    p.d1.assign(L, 0.0);
    p.d2.assign(L, 0.0);
    if (with_grads)
      for (const auto& s : chain.stages()) p.grads.emplace_back(s);
  }
  detail::for_each_chunk(batch.size(), threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    process_chunk(chain, batch.subspan(begin, end - begin), with_grads, full_backprop, partial[c]);
  });

  ChainGradients result;
  std::vector<double> d1(L, 0.0);
  std::vector<double> d2(L, 0.0);
  if (with_grads)
    for (const auto& s : chain.stages()) result.stages.emplace_back(s);
  for (const auto& p : partial) {
    for (std::size_t l = 0; l < L; ++l) {
      d1[l] += p.d1[l];
      d2[l] += p.d2[l];
      if (with_grads) result.stages[l].add(p.grads[l]);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : result.stages) g.scale(inv);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& s = chain.stage(l);
    StageObjective o{d1[l] * inv, d2[l] * inv, 0.0};
    o.total = s.d1_coefficient() * o.d1 + s.d2_coefficient() * o.d2;
    result.objective.stages.push_back(o);
    result.objective.weighted_total += chain.lambdas()[l] * o.total;
  }
  return result;
}

}  // namespace

namespace detail {

ChainGradients evaluate_chain(const ChainNetwork& chain, std::span<const Vector> batch,
                              bool with_grads, bool full_backprop, std::size_t threads) {
  require_batch(chain, batch, "chain evaluation");
  return evaluate(chain, batch, with_grads, full_backprop, threads);
}

}  // namespace detail

ChainObjective chain_objective(const ChainNetwork& chain, std::span<const Vector> batch) {
  require_batch(chain, batch, "chain_objective");
  return evaluate(chain, batch, false, false, 0).objective;
}

ChainGradients chain_gradients(const ChainNetwork& chain, std::span<const Vector> batch,
                               bool full_backprop) {
  require_batch(chain, batch, "chain_gradients");
  return evaluate(chain, batch, true, full_backprop, 0);
}

void randomize_parameters(ChainNetwork& chain, double range, std::uint64_t seed) {
  if (!(range >= 0.0) || !std::isfinite(range))
    throw InvalidArgument("randomize_parameters: range must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  for (auto& stage : chain.stages()) {
    for (double& v : stage.weights().flat()) v = dist(rng);
    for (double& v : stage.biases()) v = dist(rng);
    for (double& v : stage.recon().flat()) v = dist(rng);
  }
}

std::vector<std::size_t> collapsed_stages(const ChainNetwork& chain, std::span<const Vector> batch,
                                          double tolerance) {
  require_batch(chain, batch, "collapsed_stages");
  const std::size_t L = chain.num_stages();
  std::vector<Vector> lo(L);
  std::vector<Vector> hi(L);
  for (std::size_t l = 0; l < L; ++l) {
    lo[l].assign(chain.stage(l).m(), 1.0);
    hi[l].assign(chain.stage(l).m(), 0.0);
  }
  for (const auto& x : batch) {
    const auto layers = feedforward(chain, x);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t y = 0; y < layers[l].size(); ++y) {
        lo[l][y] = std::min(lo[l][y], layers[l][y]);
        hi[l][y] = std::max(hi[l][y], layers[l][y]);
      }
  }
  // half the summed per-code spread bounds every pairwise total variation distance
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < L; ++l) {
    double spread = 0.0;
    for (std::size_t y = 0; y < lo[l].size(); ++y) spread += hi[l][y] - lo[l][y];
    if (0.5 * spread <= tolerance) out.push_back(l);
  }
  return out;
}

}  // namespace svq
