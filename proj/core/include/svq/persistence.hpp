#pragma once

// Versioned text artifacts. Every file starts with
//   #svqchain <kind> v<version> key=value ...
// followed by comma separated records; numbers are written with 17 significant digits.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svq/chain.hpp"
#include "svq/manifold_data.hpp"
#include "svq/training.hpp"

namespace svq {

inline constexpr int kFormatVersion = 1;

struct ArtifactHeader {
  std::string kind;  // dataset | model | trace | analysis
  int version = 0;
  std::vector<std::pair<std::string, std::string>> fields;

  /// Throws FormatError when the field is absent.
  const std::string& field(std::string_view key) const;
};

/// Reads only the first line of a file.
ArtifactHeader read_header(const std::filesystem::path& path);

struct ModelArtifact {
  ChainNetwork chain;
  std::uint64_t seed = 0;
  std::optional<TrainingSchedule> schedule;
};

/// String-valued table for analysis outputs; numeric cells go through number_cell.
struct AnalysisTable {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  friend bool operator==(const AnalysisTable&, const AnalysisTable&) = default;
};

/// Formats a finite number; throws InvalidArgument on NaN or infinity.
std::string number_cell(double value);

std::string serialize_dataset(const Dataset& dataset);
std::string serialize_model(const ChainNetwork& chain, std::uint64_t seed,
                            const std::optional<TrainingSchedule>& schedule = std::nullopt);
std::string serialize_trace(const TrainingTrace& trace);
std::string serialize_table(const AnalysisTable& table);

Dataset parse_dataset(std::string_view text);
ModelArtifact parse_model(std::string_view text);
TrainingTrace parse_trace(std::string_view text);
AnalysisTable parse_table(std::string_view text);

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
void save_model(const std::filesystem::path& path, const ChainNetwork& chain, std::uint64_t seed,
                const std::optional<TrainingSchedule>& schedule = std::nullopt);
void save_trace(const std::filesystem::path& path, const TrainingTrace& trace);
void save_table(const std::filesystem::path& path, const AnalysisTable& table);

Dataset load_dataset(const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);
TrainingTrace load_trace(const std::filesystem::path& path);
AnalysisTable load_table(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories; throws Error when the path is not writable.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace svq
