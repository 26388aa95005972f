#include "svq/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "chain_internal.hpp"
#include "svq/errors.hpp"

namespace svq {

void TrainingSchedule::validate(std::size_t num_stages) const {
  if (steps.size() != num_stages)
    throw InvalidArgument("TrainingSchedule: need step sizes for " + std::to_string(num_stages) +
                          " stages, got " + std::to_string(steps.size()));
  if (decay_start.size() != num_stages)
    throw InvalidArgument("TrainingSchedule: need a decay start for each of " +
                          std::to_string(num_stages) + " stages");
  for (const auto& s : steps)
    if (!(s.weights >= 0.0) || !(s.biases >= 0.0) || !(s.recon >= 0.0) ||
        !std::isfinite(s.weights + s.biases + s.recon))
      throw InvalidArgument("TrainingSchedule: step sizes must be finite and non-negative");
  if (!(decay > 0.0 && decay <= 1.0)) throw InvalidArgument("TrainingSchedule: decay must lie in (0, 1]");
  if (!(init_range >= 0.0) || !std::isfinite(init_range))
    throw InvalidArgument("TrainingSchedule: init_range must be non-negative");
}

double TrainingSchedule::decay_factor(std::size_t stage, std::size_t epoch) const {
  const std::size_t start = decay_start.at(stage);
  if (epoch <= start) return 1.0;
  return std::pow(decay, static_cast<double>(epoch - start));
}

TrainingSchedule default_schedule(std::size_t num_stages, std::size_t epochs, double step) {
  TrainingSchedule s;
  s.epochs = epochs;
  s.steps.assign(num_stages, StageSteps{step, step, step});
  for (std::size_t l = 0; l < num_stages; ++l) s.decay_start.push_back((l + 1) * epochs / 10);
  return s;
}

namespace {

void apply_step(SvqStage& stage, const StageGradients& g, const StageSteps& steps, double factor) {
  auto update = [](std::span<double> p, std::span<const double> d, double eta) {
    if (eta == 0.0) return;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= eta * d[i];
  };
  update(stage.weights().flat(), g.weights.flat(), steps.weights * factor);
  update(stage.biases(), g.biases, steps.biases * factor);
  update(stage.recon().flat(), g.recon.flat(), steps.recon * factor);
}

}  // namespace

TrainingResult train(ChainNetwork chain, std::span<const Vector> dataset,
                     const TrainingSchedule& schedule, const EpochCallback& on_epoch) {
  schedule.validate(chain.num_stages());
  randomize_parameters(chain, schedule.init_range, schedule.seed);
  return continue_training(std::move(chain), dataset, schedule, on_epoch);
}

TrainingResult continue_training(ChainNetwork chain, std::span<const Vector> dataset,
                                 const TrainingSchedule& schedule, const EpochCallback& on_epoch) {
  if (dataset.empty()) throw EmptyDataset("train: empty dataset");
  for (const auto& x : dataset)
    if (x.size() != chain.input_dim())
      throw DimensionMismatch("train: data dimension " + std::to_string(x.size()) +
                              " differs from chain input dimension " +
                              std::to_string(chain.input_dim()));
  const std::size_t L = chain.num_stages();
  schedule.validate(L);

  const std::size_t count = dataset.size();
  const std::size_t batch = schedule.batch_size == 0 ? count : std::min(schedule.batch_size, count);
  const bool minibatch = batch < count;

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(schedule.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Vector> buffer;

  TrainingResult result{chain, {}, {}};
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    if (minibatch) std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochRecord record{epoch, std::vector<StageObjective>(L), 0.0};
    for (std::size_t begin = 0; begin < count; begin += batch) {
      const std::size_t end = std::min(count, begin + batch);
      std::span<const Vector> current = dataset;
      if (minibatch) {
        buffer.clear();
        for (std::size_t i = begin; i < end; ++i) buffer.push_back(dataset[order[i]]);
        current = buffer;
      }
      const auto eval = detail::evaluate_chain(result.chain, current, true,
                                               schedule.full_backprop, schedule.threads);
      if (!std::isfinite(eval.objective.weighted_total)) {
        std::size_t bad = 0;
        while (bad + 1 < L && std::isfinite(eval.objective.stages[bad].total)) ++bad;
        throw DivergenceError(epoch, bad + 1,
                              "training diverged at epoch " + std::to_string(epoch) + ", stage " +
                                  std::to_string(bad + 1) + ": objective is not finite");
      }
      const double share = static_cast<double>(end - begin) / static_cast<double>(count);
      for (std::size_t l = 0; l < L; ++l) {
        record.stages[l].d1 += share * eval.objective.stages[l].d1;
        record.stages[l].d2 += share * eval.objective.stages[l].d2;
        record.stages[l].total += share * eval.objective.stages[l].total;
      }
      record.weighted_total += share * eval.objective.weighted_total;
      for (std::size_t l = 0; l < L; ++l)
        apply_step(result.chain.stage(l), eval.stages[l], schedule.steps[l],
                   schedule.decay_factor(l, epoch));
    }
    if (on_epoch) on_epoch(record);
    result.trace.epochs.push_back(std::move(record));
  }
  for (std::size_t l = 0; l < L; ++l) {
    try {
      result.chain.stage(l).check_finite();
    } catch (const InvalidArgument&) {
      throw DivergenceError(schedule.epochs, l + 1,
                            "training diverged: stage " + std::to_string(l + 1) +
                                " parameters are not finite after the final epoch");
    }
  }
  result.collapsed_stages = collapsed_stages(result.chain, dataset);
  return result;
}

MultiSeedResult train_multi_seed(const ChainNetwork& chain, std::span<const Vector> dataset,
                                 TrainingSchedule schedule, std::span<const std::uint64_t> seeds,
                                 const StructureCheck& check,
                                 const std::function<void(const SeedAttempt&)>& on_attempt) {
  MultiSeedResult out;
  for (std::uint64_t seed : seeds) {
    schedule.seed = seed;
    SeedAttempt attempt{seed, false, {}};
    try {
      auto run = train(chain, dataset, schedule);
      attempt.reason = check ? check(run) : std::string{};
      attempt.passed = attempt.reason.empty();
      if (attempt.passed) {
        out.accepted = run;
        out.accepted_seed = seed;
      }
      out.last = std::move(run);
      out.last_seed = seed;
    } catch (const DivergenceError& e) {
      attempt.reason = e.what();
    }
    out.attempts.push_back(attempt);
    if (on_attempt) on_attempt(attempt);
    if (attempt.passed) break;
  }
  return out;
}

MultiSeedResult train_lowest_objective(const ChainNetwork& chain, std::span<const Vector> dataset,
                                       TrainingSchedule schedule, std::span<const std::uint64_t> seeds,
                                       const std::function<void(const SeedAttempt&)>& on_attempt) {
  MultiSeedResult out;
  std::optional<std::size_t> best;
  double best_value = 0.0;
  for (std::uint64_t seed : seeds) {
    schedule.seed = seed;
    SeedAttempt attempt{seed, false, {}};
    try {
      auto run = train(chain, dataset, schedule);
      const double value = chain_objective(run.chain, dataset).weighted_total;
      std::ostringstream os;
      os << "objective " << value;
      attempt.reason = os.str();
      if (!best || value < best_value) {
        best = out.attempts.size();
        best_value = value;
        out.accepted = run;
        out.accepted_seed = seed;
      }
      out.last = std::move(run);
      out.last_seed = seed;
    } catch (const DivergenceError& e) {
      attempt.reason = e.what();
    }
    out.attempts.push_back(attempt);
  }
  if (best) {
    out.attempts[*best].passed = true;
    out.attempts[*best].reason.clear();
  }
  if (on_attempt)
    for (const auto& a : out.attempts) on_attempt(a);
  return out;
}

}  // namespace svq
