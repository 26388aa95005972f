#pragma once

// Synthetic manifold datasets: hierarchically correlated phases, the unit
// circle, Gaussian object functions and Gaussian blobs.

#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svq/matrix.hpp"

namespace svq {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces an angle into the canonical range [0, 2pi).
double wrap_angle(double angle);

/// Leaf phases of a binary splitting tree together with their
/// (cos, sin) embedding.
struct PhaseSample {
  Vector phases;    // each in [0, 2pi)
  Vector embedded;  // (cos phi_1, sin phi_1, cos phi_2, sin phi_2, ...)
};

/// A point on a manifold with its latent coordinates.
struct ManifoldSample {
  Vector latent;
  Vector data;

  friend bool operator==(const ManifoldSample&, const ManifoldSample&) = default;
};

/// A generated dataset plus the provenance needed to regenerate it.
struct Dataset {
  std::string generator;
  std::uint64_t seed = 0;
  std::size_t latent_dim = 0;
  std::size_t data_dim = 0;
  std::vector<ManifoldSample> samples;
  /// Generator parameters as space separated key=value pairs, e.g. "depth=2".
  std::string parameters;

  std::vector<Vector> data_vectors() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Writes (cos phi_i, sin phi_i) pairs for each phase.
Vector embed_phases(std::span<const double> phases);

/// Supplies one (alpha, beta) pair per split.
using SplitSampler = std::function<std::pair<double, double>()>;
using RootSampler = std::function<double()>;

/// Depth-d binary tree of phases with splitting rule phi -> (phi - alpha, phi + beta),
/// alpha and beta independently uniform on [0, pi/2], root uniform on [0, 2pi).
/// Produces 2^depth leaves per sample.
std::vector<PhaseSample> gen_hierarchical_phases(std::uint64_t seed, std::size_t count,
                                                 std::size_t depth = 2);

/// Same tree construction with caller-supplied draws.
std::vector<PhaseSample> gen_hierarchical_phases(std::size_t count, std::size_t depth,
                                                 const RootSampler& root,
                                                 const SplitSampler& split);

std::vector<ManifoldSample> gen_circle(std::uint64_t seed, std::size_t count);

/// Point on the unit circle at angle theta.
ManifoldSample circle_point(double theta);

/// Gaussian object function of width sigma placed at each position, sampled at the grid locations.
std::vector<ManifoldSample> gen_object_manifold(double sigma, std::span<const double> positions,
                                                std::span<const int> grid);

/// Isotropic Gaussian blobs around the given centres, equal counts per centre (round robin).
std::vector<ManifoldSample> gen_gaussian_blobs(std::uint64_t seed, std::size_t count,
                                               const std::vector<Vector>& centres, double sigma);

Dataset make_phase_dataset(std::uint64_t seed, std::size_t count, std::size_t depth = 2);
Dataset make_circle_dataset(std::uint64_t seed, std::size_t count);
Dataset make_blob_dataset(std::uint64_t seed, std::size_t count, const std::vector<Vector>& centres,
                          double sigma);

/// Dispatches on the generator name ("hier-phases", "circle", "blobs") and its parameter string.
Dataset make_dataset(const std::string& generator, std::uint64_t seed, std::size_t count,
                     const std::string& parameters);

/// Recovers phase samples from a phase dataset's latent columns.
std::vector<PhaseSample> phase_samples(const Dataset& dataset);

/// Circular co-occurrence histogram of two phases over [0, 2pi)^2.
class Histogram2D {
public:
  explicit Histogram2D(std::size_t bins);

  std::size_t bins() const noexcept { return bins_; }
  std::uint64_t at(std::size_t row, std::size_t col) const { return counts_[row * bins_ + col]; }
  std::uint64_t total() const noexcept { return total_; }
  double bin_width() const noexcept { return kTwoPi / static_cast<double>(bins_); }

  /// Bin containing an angle; wraps circularly.
  std::size_t bin_of(double angle) const;
  void add(double x_angle, double y_angle);

  Histogram2D transposed() const;
  friend bool operator==(const Histogram2D&, const Histogram2D&) = default;

private:
  std::size_t bins_;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Histogram of (phi_i, phi_j); i and j are 1-based phase indices.
Histogram2D cooccurrence(std::span<const PhaseSample> samples, std::size_t i, std::size_t j,
                         std::size_t bins);

}  // namespace svq
