#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

#include "config.hpp"

namespace svqcli {

enum ExitCode : int {
  kOk = 0,
  kOtherError = 1,
  kConfigError = 2,
  kDataError = 3,
  kDivergence = 4,
  kStructureCheckFailed = 5,
};

enum class Command { gen_data, train, analyze, plot, run };

struct Overrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> count;
  std::optional<double> threshold;
  std::optional<std::size_t> grid;
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> data;
};

/// Config from --config or --preset (default preset "hier"), flag overrides applied, output directory
/// resolved from --out, the config's output, or $SVQ_OUT_ROOT/<name> (default root "runs").
ExperimentConfig resolve_config(const Overrides& overrides, Command command);

/// Each command writes resolved.cfg into the output directory and returns an ExitCode.
int cmd_gen_data(const ExperimentConfig& config, std::ostream& log);
int cmd_train(const ExperimentConfig& config, const Overrides& overrides, std::ostream& log);
int cmd_analyze(const ExperimentConfig& config, const Overrides& overrides, std::ostream& log);
int cmd_plot(const ExperimentConfig& config, std::ostream& log);
/// gen-data, train, analyze and plot in sequence.
int cmd_run(const ExperimentConfig& config, std::ostream& log);

/// Maps exceptions to exit codes and prints the message to `err`.
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace svqcli
