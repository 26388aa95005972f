#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svq/analysis.hpp"
#include "svq/training.hpp"

namespace svqcli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string generator = "hier-phases";
  std::size_t count = 10000;
  std::uint64_t seed = 1;
  std::string parameters = "depth=2";
};

struct ChainSpec {
  std::vector<std::size_t> layer_sizes{8, 16, 8, 4};
  std::vector<std::size_t> samples{20, 20, 20};
  std::vector<double> lambdas{1.0, 5.0, 0.1};
};

struct ProtocolSpec {
  /// Training seeds tried in order; the first run that passes the check is kept.
  /// With lowest-objective every seed runs and the lowest final objective is kept.
  std::vector<std::uint64_t> seeds{1};
  /// none | hierarchy | arcs | lowest-objective
  std::string check = "none";
};

struct AnalysisSpec {
  double threshold_fraction = 0.25;
  double logic_factor = 1.5;
  std::size_t grid = 64;
  std::size_t cooccurrence_bins = 64;
  double ratio_threshold = 0.2;
  double group_fraction = 0.3;
  std::size_t arc_resolution = 3600;
};

struct PlotSpec {
  /// Width and height of every plot in pixels.
  std::size_t size = 320;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  ChainSpec chain;
  svq::TrainingSchedule schedule;
  ProtocolSpec protocol;
  AnalysisSpec analysis;
  PlotSpec plot;
  std::string output;

  /// Throws ConfigError.
  void validate() const;
  svq::HierarchyOptions hierarchy_options() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);
/// Strict: unknown keys and wrong types are ConfigErrors. Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::ordered_json& j);

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Serialized form written as resolved.cfg.
std::string dump_config(const ExperimentConfig& config);

}  // namespace svqcli
