#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svq/chain.hpp"

namespace svq {

/// Initial step sizes of one stage, per parameter family.
struct StageSteps {
  double weights = 0.0;
  double biases = 0.0;
  double recon = 0.0;

  friend bool operator==(const StageSteps&, const StageSteps&) = default;
};

struct TrainingSchedule {
  std::size_t epochs = 500;
  /// 0 means the whole dataset is one batch.
  std::size_t batch_size = 0;
  std::vector<StageSteps> steps;
  /// Multiplicative step factor per epoch once a stage's decay has started.
  double decay = 0.99;
  /// Epoch at which each stage starts decaying.
  std::vector<std::size_t> decay_start;
  double init_range = 0.1;
  std::uint64_t seed = 1;
  bool full_backprop = true;
  /// Worker threads for gradient evaluation; 0 picks hardware concurrency.
  /// Results do not depend on this value.
  std::size_t threads = 0;

  /// Throws InvalidArgument on a bad schedule for a chain with `num_stages` stages.
  void validate(std::size_t num_stages) const;
  /// Step size for stage `stage` at `epoch`, before any family multiplier.
  double decay_factor(std::size_t stage, std::size_t epoch) const;

  friend bool operator==(const TrainingSchedule&, const TrainingSchedule&) = default;
};

/// Same step for every stage and family; stage l (1-based) starts decaying after l * 10% of the epochs.
TrainingSchedule default_schedule(std::size_t num_stages, std::size_t epochs, double step);

struct EpochRecord {
  std::size_t epoch = 0;
  std::vector<StageObjective> stages;
  double weighted_total = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingTrace {
  std::vector<EpochRecord> epochs;
  friend bool operator==(const TrainingTrace&, const TrainingTrace&) = default;
};

struct TrainingResult {
  ChainNetwork chain;
  TrainingTrace trace;
  std::vector<std::size_t> collapsed_stages;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Initialises `chain` from the schedule seed and runs annealed gradient descent on the
/// weighted total. Each epoch record holds the objective before that epoch's updates.
/// Throws DivergenceError if the weighted total becomes non-finite.
TrainingResult train(ChainNetwork chain, std::span<const Vector> dataset,
                     const TrainingSchedule& schedule, const EpochCallback& on_epoch = {});

/// Returns an empty string when the trained network passes, otherwise a reason.
/// Runs the schedule's gradient descent starting from the parameters already in `chain`
/// (no re-initialisation). Epoch numbering, and therefore step decay, starts at 0.
TrainingResult continue_training(ChainNetwork chain, std::span<const Vector> dataset,
                                 const TrainingSchedule& schedule,
                                 const EpochCallback& on_epoch = {});

using StructureCheck = std::function<std::string(const TrainingResult&)>;

struct SeedAttempt {
  std::uint64_t seed = 0;
  bool passed = false;
  std::string reason;
};

struct MultiSeedResult {
  std::optional<TrainingResult> accepted;
  std::optional<std::uint64_t> accepted_seed;
  std::vector<SeedAttempt> attempts;
  /// The most recent run that did not diverge, accepted or not.
  std::optional<TrainingResult> last;
  std::optional<std::uint64_t> last_seed;
};

/// Trains with each seed in turn and stops at the first run that passes `check`.
MultiSeedResult train_multi_seed(const ChainNetwork& chain, std::span<const Vector> dataset,
                                 TrainingSchedule schedule, std::span<const std::uint64_t> seeds,
                                 const StructureCheck& check,
                                 const std::function<void(const SeedAttempt&)>& on_attempt = {});

/// Trains with every seed and accepts the run with the lowest final objective on `dataset`.
/// Attempts are reported once all seeds have run; ties keep the earlier seed.
MultiSeedResult train_lowest_objective(const ChainNetwork& chain, std::span<const Vector> dataset,
                                       TrainingSchedule schedule, std::span<const std::uint64_t> seeds,
                                       const std::function<void(const SeedAttempt&)>& on_attempt = {});

}  // namespace svq
