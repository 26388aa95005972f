#include "svq/manifold_data.hpp"

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "svq/errors.hpp"
#include "svq/text.hpp"

namespace svq {

namespace {

void require_count(std::size_t count, const char* what) {
  if (count == 0) throw EmptyDataset(std::string(what) + ": count must be at least 1");
}

}  // namespace

double wrap_angle(double angle) {
  double r = std::fmod(angle, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative value can round up to exactly 2pi
  if (r >= kTwoPi) r = 0.0;
  return r;
}

std::vector<Vector> Dataset::data_vectors() const {
  std::vector<Vector> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.data);
  return out;
}

Vector embed_phases(std::span<const double> phases) {
  Vector x(2 * phases.size());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    x[2 * i] = std::cos(phases[i]);
    x[2 * i + 1] = std::sin(phases[i]);
  }
  return x;
}

std::vector<PhaseSample> gen_hierarchical_phases(std::size_t count, std::size_t depth,
                                                 const RootSampler& root,
                                                 const SplitSampler& split) {
  require_count(count, "gen_hierarchical_phases");
  if (depth > 16) throw InvalidArgument("gen_hierarchical_phases: depth must be at most 16");

  std::vector<PhaseSample> out;
  out.reserve(count);
  Vector level;
  Vector next;
  for (std::size_t s = 0; s < count; ++s) {
    level.assign(1, root());
    for (std::size_t d = 0; d < depth; ++d) {
      next.clear();
      for (double phi : level) {
        const auto [alpha, beta] = split();
        next.push_back(phi - alpha);
        next.push_back(phi + beta);
      }
      level.swap(next);
    }
    PhaseSample sample;
    sample.phases.reserve(level.size());
    for (double phi : level) sample.phases.push_back(wrap_angle(phi));
    sample.embedded = embed_phases(sample.phases);
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<PhaseSample> gen_hierarchical_phases(std::uint64_t seed, std::size_t count,
                                                 std::size_t depth) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> root_dist(0.0, kTwoPi);
  std::uniform_real_distribution<double> split_dist(0.0, std::numbers::pi / 2.0);
  return gen_hierarchical_phases(
      count, depth, [&] { return root_dist(rng); },
      [&] {
        const double alpha = split_dist(rng);
        const double beta = split_dist(rng);
        return std::pair{alpha, beta};
      });
}

ManifoldSample circle_point(double theta) {
  return {{theta}, {std::cos(theta), std::sin(theta)}};
}

std::vector<ManifoldSample> gen_circle(std::uint64_t seed, std::size_t count) {
  require_count(count, "gen_circle");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> theta(0.0, kTwoPi);
  std::vector<ManifoldSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(circle_point(theta(rng)));
  return out;
}

std::vector<ManifoldSample> gen_object_manifold(double sigma, std::span<const double> positions,
                                                std::span<const int> grid) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw InvalidArgument("gen_object_manifold: sigma must be positive");
  if (grid.empty()) throw InvalidArgument("gen_object_manifold: grid must be non-empty");
  require_count(positions.size(), "gen_object_manifold");

  std::vector<ManifoldSample> out;
  out.reserve(positions.size());
  const double denom = 2.0 * sigma * sigma;
  for (double a : positions) {
    ManifoldSample s{{a}, Vector(grid.size())};
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double d = static_cast<double>(grid[k]) - a;
      s.data[k] = std::exp(-d * d / denom);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ManifoldSample> gen_gaussian_blobs(std::uint64_t seed, std::size_t count,
                                               const std::vector<Vector>& centres, double sigma) {
  require_count(count, "gen_gaussian_blobs");
  if (centres.empty()) throw InvalidArgument("gen_gaussian_blobs: need at least one centre");
  if (!(sigma >= 0.0)) throw InvalidArgument("gen_gaussian_blobs: sigma must be non-negative");
  const std::size_t dim = centres.front().size();
  for (const auto& c : centres)
    if (c.size() != dim) throw DimensionMismatch("gen_gaussian_blobs: centres differ in dimension");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<ManifoldSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = i % centres.size();
    ManifoldSample s{{static_cast<double>(k)}, centres[k]};
    for (double& v : s.data) v += sigma * noise(rng);
    out.push_back(std::move(s));
  }
  return out;
}

Dataset make_phase_dataset(std::uint64_t seed, std::size_t count, std::size_t depth) {
  Dataset d;
  d.generator = "hier-phases";
  d.seed = seed;
  const auto phases = gen_hierarchical_phases(seed, count, depth);
  d.latent_dim = phases.front().phases.size();
  d.data_dim = phases.front().embedded.size();
  d.samples.reserve(phases.size());
  for (const auto& p : phases) d.samples.push_back({p.phases, p.embedded});
  d.parameters = "depth=" + std::to_string(depth);
  return d;
}

Dataset make_circle_dataset(std::uint64_t seed, std::size_t count) {
  return {"circle", seed, 1, 2, gen_circle(seed, count), ""};
}

Dataset make_blob_dataset(std::uint64_t seed, std::size_t count, const std::vector<Vector>& centres,
                          double sigma) {
  auto samples = gen_gaussian_blobs(seed, count, centres, sigma);
  const std::size_t dim = samples.front().data.size();
  std::string params = "sigma=" + format_number(sigma) + " centres=";
  for (std::size_t c = 0; c < centres.size(); ++c) {
    if (c) params += ';';
    for (std::size_t k = 0; k < centres[c].size(); ++k) {
      if (k) params += ':';
      params += format_number(centres[c][k]);
    }
  }
  return {"blobs", seed, 1, dim, std::move(samples), std::move(params)};
}

Dataset make_dataset(const std::string& generator, std::uint64_t seed, std::size_t count,
                     const std::string& parameters) {
  std::map<std::string, std::string> kv;
  std::istringstream in(parameters);
  for (std::string tok; in >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw InvalidArgument("make_dataset: bad parameter '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto need = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw InvalidArgument("make_dataset: " + generator + " needs parameter " + key);
    return it->second;
  };
  auto number = [&](const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || !std::isfinite(v))
      throw InvalidArgument("make_dataset: bad number '" + text + "'");
    return v;
  };
  if (generator == "hier-phases") {
    const std::size_t depth = kv.count("depth") ? static_cast<std::size_t>(number(kv["depth"])) : 2;
    return make_phase_dataset(seed, count, depth);
  }
  if (generator == "circle") return make_circle_dataset(seed, count);
  if (generator == "blobs") {
    std::vector<Vector> centres;
    std::istringstream list(need("centres"));
    for (std::string centre; std::getline(list, centre, ';');) {
      Vector c;
      std::istringstream coords(centre);
      for (std::string v; std::getline(coords, v, ':');) c.push_back(number(v));
      centres.push_back(std::move(c));
    }
    return make_blob_dataset(seed, count, centres, number(need("sigma")));
  }
  throw InvalidArgument("make_dataset: unknown generator '" + generator + "'");
}

std::vector<PhaseSample> phase_samples(const Dataset& dataset) {
  std::vector<PhaseSample> out;
  out.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) out.push_back({s.latent, s.data});
  return out;
}

Histogram2D::Histogram2D(std::size_t bins) : bins_(bins), counts_(bins * bins, 0) {
  if (bins < 2) throw InvalidArgument("Histogram2D: bins must be at least 2");
}

std::size_t Histogram2D::bin_of(double angle) const {
  const double w = wrap_angle(angle);
  auto b = static_cast<std::size_t>(w / kTwoPi * static_cast<double>(bins_));
  return b % bins_;
}

void Histogram2D::add(double x_angle, double y_angle) {
  ++counts_[bin_of(x_angle) * bins_ + bin_of(y_angle)];
  ++total_;
}

Histogram2D Histogram2D::transposed() const {
  Histogram2D t(bins_);
  t.total_ = total_;
  for (std::size_t r = 0; r < bins_; ++r)
    for (std::size_t c = 0; c < bins_; ++c) t.counts_[c * bins_ + r] = counts_[r * bins_ + c];
  return t;
}

Histogram2D cooccurrence(std::span<const PhaseSample> samples, std::size_t i, std::size_t j,
                         std::size_t bins) {
  if (samples.empty()) throw EmptyDataset("cooccurrence: no samples");
  const std::size_t leaves = samples.front().phases.size();
  if (i < 1 || j < 1 || i > leaves || j > leaves)
    throw InvalidArgument("cooccurrence: phase index out of range");
  Histogram2D h(bins);
  for (const auto& s : samples) h.add(s.phases[i - 1], s.phases[j - 1]);
  return h;
}

}  // namespace svq
