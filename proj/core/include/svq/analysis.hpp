#pragma once

// Structure extraction from a trained chain: thresholded connectivity and
// its display permutation, activity maps over pairs of latent phases,
// factorial / invariant encoder classification, sensitivity grouping, and
// conjunction-of-literals readout of the top layer.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svq/chain.hpp"
#include "svq/manifold_data.hpp"

namespace svq {

/// Reconstruction vectors of every stage with a per-stage magnitude threshold.
/// `recon[l]` is m_l x M_{l-1}: row y holds the reconstruction of layer l-1 from code y.
/// `order[k]` maps display position to original node index for layer k (k = 0 is the input).
struct ConnectivityGraph {
  std::vector<Matrix> recon;
  std::vector<double> taus;
  std::vector<std::vector<std::size_t>> order;

  std::size_t num_stages() const noexcept { return recon.size(); }
  bool kept(std::size_t stage, std::size_t code, std::size_t input) const {
    return std::abs(recon[stage](code, input)) >= taus[stage];
  }
  std::size_t kept_edges(std::size_t stage) const;
  /// Display-order indices of layer stage-1 nodes connected to `code` of layer `stage`.
  std::vector<std::size_t> upstream(std::size_t stage, std::size_t code) const;
};

ConnectivityGraph threshold_connectivity(const ChainNetwork& chain, double tau);
ConnectivityGraph threshold_connectivity(const ChainNetwork& chain, std::span<const double> taus);

/// fraction * max |recon component| for each stage.
std::vector<double> relative_thresholds(const ChainNetwork& chain, double fraction);

/// Reorders every non-input layer so that nodes with identical upstream sets are contiguous.
/// Nodes are sorted by their upstream index set (lexicographic, so by smallest index first),
/// nodes without kept edges last, ties by current position.
ConnectivityGraph permute_for_clarity(const ConnectivityGraph& graph);

/// Reorders code indices of each layer; `orders[k][pos]` is the original index shown at `pos`
/// for layer k. orders[0] must be the identity. Feedforward outputs are permuted accordingly.
ChainNetwork apply_layer_orders(const ChainNetwork& chain,
                                const std::vector<std::vector<std::size_t>>& orders);

/// Posterior of one layer over a grid on two latent phases, other phases held fixed.
struct ActivityMap {
  std::size_t layer = 0;  // 1-based
  std::size_t axis_a = 0; // 1-based phase indices
  std::size_t axis_b = 0;
  Vector fixed;           // full phase tuple; the two axis entries are overwritten per cell
  std::size_t grid = 0;
  std::vector<PosteriorVector> cells;  // row i (phi_a), column j (phi_b)

  double phase(std::size_t k) const { return kTwoPi * static_cast<double>(k) / static_cast<double>(grid); }
  const PosteriorVector& at(std::size_t i, std::size_t j) const { return cells[i * grid + j]; }
  std::size_t nodes() const { return cells.empty() ? 0 : cells.front().size(); }
};

ActivityMap activity_map(const ChainNetwork& chain, std::size_t layer,
                         std::pair<std::size_t, std::size_t> axes, std::span<const double> fixed,
                         std::size_t grid);

/// Grid cells of the (phi_a, phi_b) plane that the data occupies: cells whose co-occurrence
/// count is at least `min_fraction` of the mean count per cell.
std::vector<bool> populated_band(std::span<const PhaseSample> samples, std::size_t axis_a,
                                 std::size_t axis_b, std::size_t grid, double min_fraction = 0.25);

enum class EncoderLabel { silent, factorial_a, factorial_b, invariant, mixed };

std::string to_string(EncoderLabel label);

struct NodeClassification {
  EncoderLabel label = EncoderLabel::silent;
  double score = 0.0;            // 1 - winning ratio, clipped to [0, 1]; 0 for silent nodes
  double peak = 0.0;
  double along_variance = 0.0;   // varying phi_a + phi_b at fixed difference
  double across_variance = 0.0;  // varying phi_a - phi_b at fixed sum
  double invariant_ratio = 0.0;  // across / along
  double factorial_a_ratio = 0.0;  // var over phi_b at fixed phi_a / var over phi_a at fixed phi_b
  double factorial_b_ratio = 0.0;
};

struct EncoderClassification {
  std::vector<NodeClassification> nodes;
  std::vector<std::size_t> responding() const;
};

struct ClassifyOptions {
  double ratio_threshold = 0.2;
  /// Silent when peak activity < silent_peak_factor / m.
  double silent_peak_factor = 2.0;
  /// Silent when max - min activity over the band < silent_swing_factor / m.
  double silent_swing_factor = 1.0;
  double band_min_fraction = 0.25;
};

/// Labels each node of the map, using only cells inside the populated band of `samples`.
EncoderClassification classify_encoders(const ActivityMap& map, std::span<const PhaseSample> samples,
                                        const ClassifyOptions& options = {});

struct SensitivityOptions {
  std::size_t base_points = 64;
  std::size_t sweep = 32;
  /// A phase belongs to a node's set when its sensitivity is at least this fraction of the node's largest.
  double group_fraction = 0.3;
  /// Silent when peak activity < silent_peak_factor / m.
  double silent_peak_factor = 0.5;
  std::uint64_t seed = 17;
};

struct FactorialGroup {
  std::vector<std::size_t> phases;  // 1-based, sorted
  std::vector<std::size_t> nodes;   // 0-based code indices, sorted
};

struct FactorialGroups {
  Matrix sensitivity;  // nodes x phases
  std::vector<std::size_t> silent;
  std::vector<FactorialGroup> groups;  // sorted by phase set

  /// The phase sets of all groups, e.g. {{1},{2},{3},{4}}.
  std::vector<std::vector<std::size_t>> phase_partition() const;
};

/// Groups the codes of `stage` (1-based) by which latent phases move their activity when swept alone.
FactorialGroups detect_factorial_groups(const ChainNetwork& chain, std::size_t stage,
                                        std::span<const PhaseSample> samples,
                                        const SensitivityOptions& options = {});

struct Literal {
  std::size_t input = 0;  // 1-based input component
  bool negated = false;

  friend auto operator<=>(const Literal&, const Literal&) = default;
};

struct LogicExpression {
  std::size_t output = 0;  // 1-based top-layer node in the graph's display order
  std::vector<Literal> literals;  // sorted by input

  bool empty() const noexcept { return literals.empty(); }
  /// "~x2 & x3 & x5 & x8"; "0" when empty.
  std::string to_string() const;
  bool is_complement_of(const LogicExpression& other) const;
};

/// For every top-layer output, sums the products of recon components along all paths whose
/// every edge survives `taus` and reads each input's literal from the sign of its sum.
std::vector<LogicExpression> extract_logic(const ConnectivityGraph& graph, std::span<const double> taus);
std::vector<LogicExpression> extract_logic(const ConnectivityGraph& graph, double tau);

/// Pairs of outputs (0-based positions in `exprs`) that are literal-by-literal complements,
/// covering every output; empty when no complete pairing exists.
std::vector<std::pair<std::size_t, std::size_t>> complement_pairing(
    std::span<const LogicExpression> exprs);

/// Maximal circular runs of the grid angles 2 pi k / resolution where a code's posterior exceeds 1/m.
struct CodeArcs {
  std::size_t code = 0;
  std::vector<std::pair<double, double>> arcs;  // (start, end) angles, counterclockwise, inclusive
};

struct ArcAnalysis {
  std::size_t resolution = 0;
  std::vector<CodeArcs> codes;
  bool every_code_single_arc = false;
  bool covers_circle = false;
};

/// For a stage on 2-d input (cos theta, sin theta).
ArcAnalysis high_posterior_arcs(const SvqStage& stage, std::size_t resolution = 3600);

struct HierarchyOptions {
  double threshold_fraction = 0.25;
  /// Logic thresholds are this multiple of the connectivity thresholds.
  double logic_factor = 1.5;
  std::size_t grid = 64;
  ClassifyOptions classify;
  SensitivityOptions sensitivity;
};

/// The structural checks of the hierarchical phase experiment on a trained 3-stage chain.
struct HierarchyReport {
  FactorialGroups stage1;
  FactorialGroups stage2;
  EncoderClassification stage2_12;
  EncoderClassification stage2_34;
  EncoderClassification stage3_12;
  EncoderClassification stage3_34;
  std::vector<LogicExpression> logic;
  bool factorial_stage1 = false;
  bool invariant_stage2 = false;
  bool invariant_stage3 = false;
  bool complement_logic = false;
  std::vector<std::string> failures;

  bool passed() const noexcept { return failures.empty(); }
  std::string summary() const;
};

/// Activity maps hold the non-axis phases at the values of samples[0].
HierarchyReport evaluate_hierarchy(const ChainNetwork& chain, std::span<const PhaseSample> samples,
                                   const HierarchyOptions& options = {});

}  // namespace svq
