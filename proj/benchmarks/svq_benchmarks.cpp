#include <cstddef>
#include <vector>

#include <benchmark/benchmark.h>

#include "svq/chain.hpp"
#include "svq/manifold_data.hpp"
#include "svq/stage.hpp"
#include "svq/training.hpp"

namespace {

svq::ChainNetwork hier_chain(std::uint64_t seed) {
  const std::size_t sizes[] = {8, 16, 8, 4};
  const std::size_t ns[] = {20, 20, 20};
  auto chain = svq::ChainNetwork::zeros(sizes, ns, {1.0, 5.0, 0.1});
  svq::randomize_parameters(chain, 0.5, seed);
  return chain;
}

std::vector<svq::Vector> phase_vectors(std::size_t count) {
  return svq::make_phase_dataset(1, count).data_vectors();
}

void BM_Posterior(benchmark::State& state) {
  const auto chain = hier_chain(1);
  const auto x = phase_vectors(1).front();
  for (auto _ : state) benchmark::DoNotOptimize(svq::posterior(chain.stage(0), x));
}
BENCHMARK(BM_Posterior);

void BM_StageGradients(benchmark::State& state) {
  const auto chain = hier_chain(2);
  const auto data = phase_vectors(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(svq::stage_gradients(chain.stage(0), data));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StageGradients)->Arg(1000)->Arg(10000);

void BM_ChainGradients(benchmark::State& state) {
  const auto chain = hier_chain(3);
  const auto data = phase_vectors(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(svq::chain_gradients(chain, data, true));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ChainGradients)->Arg(1000)->Arg(10000);

// One full-batch epoch of the hierarchical configuration.
void BM_TrainingEpoch(benchmark::State& state) {
  const auto chain = hier_chain(4);
  const auto data = phase_vectors(static_cast<std::size_t>(state.range(0)));
  auto schedule = svq::default_schedule(3, 1, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(svq::train(chain, data, schedule));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainingEpoch)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
