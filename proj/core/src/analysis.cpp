#include "svq/analysis.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "svq/errors.hpp"

namespace svq {

std::size_t ConnectivityGraph::kept_edges(std::size_t stage) const {
  std::size_t count = 0;
  for (std::size_t y = 0; y < recon[stage].rows(); ++y)
    for (std::size_t k = 0; k < recon[stage].cols(); ++k)
      if (kept(stage, y, k)) ++count;
  return count;
}

std::vector<std::size_t> ConnectivityGraph::upstream(std::size_t stage, std::size_t code) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < recon[stage].cols(); ++k)
    if (kept(stage, code, k)) out.push_back(k);
  return out;
}

namespace {

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

bool is_permutation_of_range(const std::vector<std::size_t>& order, std::size_t n) {
  if (order.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t v : order) {
    if (v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

double variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += (v - mean) * (v - mean);
  return s / static_cast<double>(values.size());
}

// Size-weighted mean of within-group variances.
double pooled_variance(const std::map<long, std::vector<double>>& groups) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& [key, values] : groups) {
    if (values.size() < 2) continue;
    total += variance(values) * static_cast<double>(values.size());
    count += values.size();
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace

ConnectivityGraph threshold_connectivity(const ChainNetwork& chain, std::span<const double> taus) {
  if (taus.size() != chain.num_stages())
    throw DimensionMismatch("threshold_connectivity: need one threshold per stage");
  for (double t : taus)
    if (!(t > 0.0)) throw InvalidArgument("threshold_connectivity: thresholds must be positive");
  ConnectivityGraph g;
  g.taus.assign(taus.begin(), taus.end());
  g.order.push_back(identity(chain.input_dim()));
  for (const auto& stage : chain.stages()) {
    g.recon.push_back(stage.recon());
    g.order.push_back(identity(stage.m()));
  }
  return g;
}

ConnectivityGraph threshold_connectivity(const ChainNetwork& chain, double tau) {
  const std::vector<double> taus(chain.num_stages(), tau);
  return threshold_connectivity(chain, taus);
}

std::vector<double> relative_thresholds(const ChainNetwork& chain, double fraction) {
  std::vector<double> out;
  for (const auto& stage : chain.stages()) {
    double top = 0.0;
    for (double v : stage.recon().flat()) top = std::max(top, std::abs(v));
    // an all-zero stage keeps nothing at any positive threshold
    out.push_back(top > 0.0 ? fraction * top : fraction);
  }
  return out;
}

ConnectivityGraph permute_for_clarity(const ConnectivityGraph& graph) {
  ConnectivityGraph g = graph;
  std::vector<std::size_t> prev = identity(g.order.front().size());
  for (std::size_t s = 0; s < g.num_stages(); ++s) {
    const Matrix& old = g.recon[s];
    Matrix cols_moved(old.rows(), old.cols());
    for (std::size_t y = 0; y < old.rows(); ++y)
      for (std::size_t c = 0; c < old.cols(); ++c) cols_moved(y, c) = old(y, prev[c]);
    g.recon[s] = cols_moved;

    std::vector<std::vector<std::size_t>> keys(old.rows());
    for (std::size_t y = 0; y < old.rows(); ++y) keys[y] = g.upstream(s, y);
    std::vector<std::size_t> perm = identity(old.rows());
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
      if (keys[a].empty() != keys[b].empty()) return keys[b].empty();
      return keys[a] < keys[b];
    });

    Matrix rows_moved(old.rows(), old.cols());
    std::vector<std::size_t> order(old.rows());
    for (std::size_t pos = 0; pos < perm.size(); ++pos) {
      for (std::size_t c = 0; c < old.cols(); ++c) rows_moved(pos, c) = cols_moved(perm[pos], c);
      order[pos] = g.order[s + 1][perm[pos]];
    }
    g.recon[s] = std::move(rows_moved);
    g.order[s + 1] = std::move(order);
    prev = std::move(perm);
  }
  return g;
}

ChainNetwork apply_layer_orders(const ChainNetwork& chain,
                                const std::vector<std::vector<std::size_t>>& orders) {
  const auto sizes = chain.layer_sizes();
  if (orders.size() != sizes.size())
    throw DimensionMismatch("apply_layer_orders: need one order per layer");
  for (std::size_t k = 0; k < sizes.size(); ++k)
    if (!is_permutation_of_range(orders[k], sizes[k]))
      throw InvalidArgument("apply_layer_orders: order of layer " + std::to_string(k) +
                            " is not a permutation");
  if (orders[0] != identity(sizes[0]))
    throw InvalidArgument("apply_layer_orders: the input layer cannot be reordered");

  std::vector<SvqStage> stages;
  for (std::size_t s = 0; s < chain.num_stages(); ++s) {
    const auto& old = chain.stage(s);
    const auto& rows = orders[s + 1];
    const auto& cols = orders[s];
    Matrix w(old.m(), old.input_dim());
    Matrix r(old.m(), old.input_dim());
    Vector b(old.m());
    for (std::size_t y = 0; y < old.m(); ++y) {
      b[y] = old.biases()[rows[y]];
      for (std::size_t c = 0; c < old.input_dim(); ++c) {
        w(y, c) = old.weights()(rows[y], cols[c]);
        r(y, c) = old.recon()(rows[y], cols[c]);
      }
    }
    stages.emplace_back(old.n(), std::move(w), std::move(b), std::move(r));
  }
  return ChainNetwork(std::move(stages), chain.lambdas());
}

ActivityMap activity_map(const ChainNetwork& chain, std::size_t layer,
                         std::pair<std::size_t, std::size_t> axes, std::span<const double> fixed,
                         std::size_t grid) {
  if (layer < 1 || layer > chain.num_stages())
    throw InvalidArgument("activity_map: layer must lie in 1.." + std::to_string(chain.num_stages()));
  if (grid < 8) throw InvalidArgument("activity_map: grid must be at least 8");
  if (2 * fixed.size() != chain.input_dim())
    throw DimensionMismatch("activity_map: phase tuple does not match the chain input");
  const auto [a, b] = axes;
  if (a < 1 || b < 1 || a > fixed.size() || b > fixed.size() || a == b)
    throw InvalidArgument("activity_map: axes must be two distinct phase indices");

  ActivityMap map;
  map.layer = layer;
  map.axis_a = a;
  map.axis_b = b;
  map.fixed.assign(fixed.begin(), fixed.end());
  map.grid = grid;
  map.cells.reserve(grid * grid);
  Vector phases = map.fixed;
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      phases[a - 1] = map.phase(i);
      phases[b - 1] = map.phase(j);
      auto layers = feedforward(chain, embed_phases(phases));
      map.cells.push_back(std::move(layers[layer - 1]));
    }
  }
  return map;
}

std::vector<bool> populated_band(std::span<const PhaseSample> samples, std::size_t axis_a,
                                 std::size_t axis_b, std::size_t grid, double min_fraction) {
  if (samples.empty()) throw EmptyDataset("populated_band: no samples");
  const double width = kTwoPi / static_cast<double>(grid);
  // cells centred on the grid points
  auto cell = [&](double phi) {
    return static_cast<std::size_t>(wrap_angle(phi + 0.5 * width) / width) % grid;
  };
  std::vector<std::size_t> counts(grid * grid, 0);
  for (const auto& s : samples) ++counts[cell(s.phases.at(axis_a - 1)) * grid + cell(s.phases.at(axis_b - 1))];
  const double mean = static_cast<double>(samples.size()) / static_cast<double>(grid * grid);
  std::vector<bool> band(grid * grid);
  for (std::size_t k = 0; k < counts.size(); ++k)
    band[k] = static_cast<double>(counts[k]) >= min_fraction * mean && counts[k] > 0;
  return band;
}

std::string to_string(EncoderLabel label) {
  switch (label) {
    case EncoderLabel::silent: return "silent";
    case EncoderLabel::factorial_a: return "factorial-a";
    case EncoderLabel::factorial_b: return "factorial-b";
    case EncoderLabel::invariant: return "invariant";
    case EncoderLabel::mixed: return "mixed";
  }
  return "unknown";
}

std::vector<std::size_t> EncoderClassification::responding() const {
  std::vector<std::size_t> out;
  for (std::size_t y = 0; y < nodes.size(); ++y)
    if (nodes[y].label != EncoderLabel::silent) out.push_back(y);
  return out;
}

EncoderClassification classify_encoders(const ActivityMap& map, std::span<const PhaseSample> samples,
                                        const ClassifyOptions& options) {
  const std::size_t G = map.grid;
  const auto band = populated_band(samples, map.axis_a, map.axis_b, G, options.band_min_fraction);

  // Express each band cell as (signed difference d, doubled midpoint) with d unwrapped
  // around the band's circular mean difference, so one band segment is one group.
  double cs = 0.0;
  double sn = 0.0;
  for (std::size_t i = 0; i < G; ++i)
    for (std::size_t j = 0; j < G; ++j)
      if (band[i * G + j]) {
        const double d = kTwoPi * static_cast<double>((j + G - i) % G) / static_cast<double>(G);
        cs += std::cos(d);
        sn += std::sin(d);
      }
  const long centre = std::lround(wrap_angle(std::atan2(sn, cs)) / kTwoPi * static_cast<double>(G));
  const long g = static_cast<long>(G);

  struct Cell {
    std::size_t index;
    long i, j, diff, mid2;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < G; ++i)
    for (std::size_t j = 0; j < G; ++j) {
      if (!band[i * G + j]) continue;
      long d = static_cast<long>((j + G - i) % G);
      long rel = ((d - centre) % g + g + g / 2) % g - g / 2;
      d = centre + rel;
      const long mid2 = ((2 * static_cast<long>(i) + d) % (2 * g) + 2 * g) % (2 * g);
      cells.push_back({i * G + j, static_cast<long>(i), static_cast<long>(j), d, mid2});
    }

  EncoderClassification out;
  const std::size_t m = map.nodes();
  out.nodes.resize(m);
  for (std::size_t y = 0; y < m; ++y) {
    NodeClassification& node = out.nodes[y];
    if (cells.empty()) continue;
    double lo = 1.0;
    double hi = 0.0;
    std::map<long, std::vector<double>> by_diff, by_mid, by_a, by_b;
    for (const auto& c : cells) {
      const double v = map.cells[c.index][y];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      by_diff[c.diff].push_back(v);
      by_mid[c.mid2].push_back(v);
      by_a[c.i].push_back(v);
      by_b[c.j].push_back(v);
    }
    node.peak = hi;
    const double md = static_cast<double>(m);
    if (hi < options.silent_peak_factor / md || hi - lo < options.silent_swing_factor / md) continue;

    node.along_variance = pooled_variance(by_diff);
    node.across_variance = pooled_variance(by_mid);
    const double var_b_given_a = pooled_variance(by_a);
    const double var_a_given_b = pooled_variance(by_b);
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : (num > 0.0 ? 1e300 : 0.0); };
    node.invariant_ratio = ratio(node.across_variance, node.along_variance);
    node.factorial_a_ratio = ratio(var_b_given_a, var_a_given_b);
    node.factorial_b_ratio = ratio(var_a_given_b, var_b_given_a);

    double best = node.invariant_ratio;
    EncoderLabel label = EncoderLabel::invariant;
    if (node.factorial_a_ratio < best) {
      best = node.factorial_a_ratio;
      label = EncoderLabel::factorial_a;
    }
    if (node.factorial_b_ratio < best) {
      best = node.factorial_b_ratio;
      label = EncoderLabel::factorial_b;
    }
    node.label = best < options.ratio_threshold ? label : EncoderLabel::mixed;
    node.score = std::clamp(1.0 - best, 0.0, 1.0);
  }
  return out;
}

std::vector<std::vector<std::size_t>> FactorialGroups::phase_partition() const {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& g : groups) out.push_back(g.phases);
  return out;
}

FactorialGroups detect_factorial_groups(const ChainNetwork& chain, std::size_t stage,
                                        std::span<const PhaseSample> samples,
                                        const SensitivityOptions& options) {
  if (stage < 1 || stage > chain.num_stages())
    throw InvalidArgument("detect_factorial_groups: stage must lie in 1.." +
                          std::to_string(chain.num_stages()));
  if (samples.empty()) throw EmptyDataset("detect_factorial_groups: no samples");
  if (options.base_points == 0 || options.sweep < 2)
    throw InvalidArgument("detect_factorial_groups: need base points and at least 2 sweep values");
  const std::size_t phases = samples.front().phases.size();
  if (2 * phases != chain.input_dim())
    throw DimensionMismatch("detect_factorial_groups: phase samples do not match the chain input");

  const std::size_t m = chain.stage(stage - 1).m();
  FactorialGroups out;
  out.sensitivity = Matrix(m, phases);
  Vector peak(m, 0.0);

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  std::vector<Vector> sweep_values(m, Vector(options.sweep));
  for (std::size_t b = 0; b < options.base_points; ++b) {
    const Vector base = samples[pick(rng)].phases;
    for (std::size_t j = 0; j < phases; ++j) {
      Vector p = base;
      for (std::size_t k = 0; k < options.sweep; ++k) {
        p[j] = kTwoPi * static_cast<double>(k) / static_cast<double>(options.sweep);
        const auto layers = feedforward(chain, embed_phases(p));
        const auto& act = layers[stage - 1];
        for (std::size_t y = 0; y < m; ++y) {
          sweep_values[y][k] = act[y];
          peak[y] = std::max(peak[y], act[y]);
        }
      }
      for (std::size_t y = 0; y < m; ++y)
        out.sensitivity(y, j) += variance(sweep_values[y]) / static_cast<double>(options.base_points);
    }
  }

  std::map<std::vector<std::size_t>, std::vector<std::size_t>> grouped;
  for (std::size_t y = 0; y < m; ++y) {
    double top = 0.0;
    for (std::size_t j = 0; j < phases; ++j) top = std::max(top, out.sensitivity(y, j));
    if (peak[y] < options.silent_peak_factor / static_cast<double>(m) || !(top > 0.0)) {
      out.silent.push_back(y);
      continue;
    }
    std::vector<std::size_t> set;
    for (std::size_t j = 0; j < phases; ++j)
      if (out.sensitivity(y, j) >= options.group_fraction * top) set.push_back(j + 1);
    grouped[set].push_back(y);
  }
  for (auto& [set, nodes] : grouped) out.groups.push_back({set, nodes});
  return out;
}

std::string LogicExpression::to_string() const {
  if (literals.empty()) return "0";
  std::ostringstream os;
  for (std::size_t k = 0; k < literals.size(); ++k) {
    if (k) os << " & ";
    os << (literals[k].negated ? "~x" : "x") << literals[k].input;
  }
  return os.str();
}

bool LogicExpression::is_complement_of(const LogicExpression& other) const {
  if (literals.empty() || literals.size() != other.literals.size()) return false;
  for (std::size_t k = 0; k < literals.size(); ++k)
    if (literals[k].input != other.literals[k].input || literals[k].negated == other.literals[k].negated)
      return false;
  return true;
}

std::vector<LogicExpression> extract_logic(const ConnectivityGraph& graph, std::span<const double> taus) {
  if (taus.size() != graph.num_stages())
    throw DimensionMismatch("extract_logic: need one threshold per stage");
  for (std::size_t s = 0; s < taus.size(); ++s)
    if (taus[s] < graph.taus[s])
      throw InvalidArgument("extract_logic: logic thresholds must not be below the graph thresholds");

  const std::size_t L = graph.num_stages();
  std::vector<LogicExpression> out;
  for (std::size_t o = 0; o < graph.recon[L - 1].rows(); ++o) {
    // signed path weights from output o down to each node of the current layer
    Vector weight(graph.recon[L - 1].rows(), 0.0);
    weight[o] = 1.0;
    for (std::size_t s = L; s-- > 0;) {
      const Matrix& r = graph.recon[s];
      Vector below(r.cols(), 0.0);
      for (std::size_t y = 0; y < r.rows(); ++y) {
        if (weight[y] == 0.0) continue;
        for (std::size_t k = 0; k < r.cols(); ++k)
          if (std::abs(r(y, k)) >= taus[s]) below[k] += weight[y] * r(y, k);
      }
      weight = std::move(below);
    }
    LogicExpression expr;
    expr.output = o + 1;
    for (std::size_t k = 0; k < weight.size(); ++k)
      if (weight[k] != 0.0) expr.literals.push_back({graph.order.front()[k] + 1, weight[k] < 0.0});
    std::sort(expr.literals.begin(), expr.literals.end());
    out.push_back(std::move(expr));
  }
  return out;
}

std::vector<LogicExpression> extract_logic(const ConnectivityGraph& graph, double tau) {
  const std::vector<double> taus(graph.num_stages(), tau);
  return extract_logic(graph, taus);
}

std::vector<std::pair<std::size_t, std::size_t>> complement_pairing(
    std::span<const LogicExpression> exprs) {
  const std::size_t n = exprs.size();
  if (n == 0 || n % 2 != 0) return {};
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<bool> used(n, false);
  // complements are unique, so greedy matching finds the pairing if one exists
  for (std::size_t a = 0; a < n; ++a) {
    if (used[a]) continue;
    bool found = false;
    for (std::size_t b = a + 1; b < n && !found; ++b) {
      if (!used[b] && exprs[a].is_complement_of(exprs[b])) {
        used[a] = used[b] = true;
        pairs.emplace_back(a, b);
        found = true;
      }
    }
    if (!found) return {};
  }
  return pairs;
}

ArcAnalysis high_posterior_arcs(const SvqStage& stage, std::size_t resolution) {
  if (stage.input_dim() != 2) throw DimensionMismatch("high_posterior_arcs: stage input must be 2-d");
  if (resolution < 8) throw InvalidArgument("high_posterior_arcs: resolution must be at least 8");
  const std::size_t m = stage.m();
  const double floor = 1.0 / static_cast<double>(m);
  std::vector<std::vector<bool>> high(m, std::vector<bool>(resolution));
  std::vector<bool> covered(resolution, false);
  for (std::size_t k = 0; k < resolution; ++k) {
    const double theta = kTwoPi * static_cast<double>(k) / static_cast<double>(resolution);
    const auto p = posterior(stage, circle_point(theta).data);
    for (std::size_t y = 0; y < m; ++y) {
      high[y][k] = p[y] > floor;
      if (high[y][k]) covered[k] = true;
    }
  }
  ArcAnalysis out;
  out.resolution = resolution;
  out.every_code_single_arc = true;
  auto angle = [&](std::size_t k) { return kTwoPi * static_cast<double>(k) / static_cast<double>(resolution); };
  for (std::size_t y = 0; y < m; ++y) {
    CodeArcs ca;
    ca.code = y;
    const auto& h = high[y];
    if (std::all_of(h.begin(), h.end(), [](bool b) { return b; })) {
      ca.arcs.emplace_back(0.0, angle(resolution - 1));
    } else {
      // start scanning just after a low cell so runs never straddle the scan origin
      std::size_t origin = 0;
      while (h[origin]) ++origin;
      for (std::size_t step = 1; step <= resolution; ++step) {
        const std::size_t k = (origin + step) % resolution;
        const std::size_t prev = (k + resolution - 1) % resolution;
        if (h[k] && !h[prev]) ca.arcs.emplace_back(angle(k), angle(k));
        if (h[k]) ca.arcs.back().second = angle(k);
      }
    }
    if (ca.arcs.size() != 1) out.every_code_single_arc = false;
    out.codes.push_back(std::move(ca));
  }
  out.covers_circle = std::all_of(covered.begin(), covered.end(), [](bool b) { return b; });
  return out;
}

std::string HierarchyReport::summary() const {
  auto mark = [](bool ok) { return ok ? "pass" : "fail"; };
  std::string out = std::string("stage-1 factorial ") + mark(factorial_stage1) + ", stage-2 invariant " +
                    mark(invariant_stage2) + ", stage-3 invariant " + mark(invariant_stage3) +
                    ", complement logic " + mark(complement_logic);
  for (const auto& f : failures) out += "; " + f;
  return out;
}

namespace {

std::string format_partition(const std::vector<std::vector<std::size_t>>& sets) {
  std::string out = "{";
  for (std::size_t g = 0; g < sets.size(); ++g) {
    if (g) out += ',';
    out += '{';
    for (std::size_t k = 0; k < sets[g].size(); ++k) {
      if (k) out += ',';
      out += std::to_string(sets[g][k]);
    }
    out += '}';
  }
  return out + "}";
}

// Nodes of `members` that respond on the map must all be invariant, and at least one must respond.
std::string check_invariant(const EncoderClassification& cls, const std::vector<std::size_t>& members,
                            const std::string& what) {
  std::size_t responding = 0;
  for (std::size_t y : members) {
    const auto label = cls.nodes.at(y).label;
    if (label == EncoderLabel::silent) continue;
    ++responding;
    if (label != EncoderLabel::invariant)
      return what + ": node " + std::to_string(y + 1) + " is " + to_string(label);
  }
  if (responding == 0) return what + ": no responding nodes";
  return {};
}

}  // namespace

HierarchyReport evaluate_hierarchy(const ChainNetwork& chain, std::span<const PhaseSample> samples,
                                   const HierarchyOptions& options) {
  if (chain.num_stages() != 3) throw InvalidArgument("evaluate_hierarchy: needs a 3-stage chain");
  if (samples.empty()) throw EmptyDataset("evaluate_hierarchy: no samples");
  if (samples.front().phases.size() != 4) throw DimensionMismatch("evaluate_hierarchy: needs 4 phases");

  HierarchyReport r;
  const Vector& fixed = samples.front().phases;

  r.stage1 = detect_factorial_groups(chain, 1, samples, options.sensitivity);
  const std::vector<std::vector<std::size_t>> singles{{1}, {2}, {3}, {4}};
  r.factorial_stage1 = r.stage1.phase_partition() == singles;
  if (!r.factorial_stage1)
    r.failures.push_back("stage-1 partition " + format_partition(r.stage1.phase_partition()));

  r.stage2 = detect_factorial_groups(chain, 2, samples, options.sensitivity);
  r.stage2_12 = classify_encoders(activity_map(chain, 2, {1, 2}, fixed, options.grid), samples, options.classify);
  r.stage2_34 = classify_encoders(activity_map(chain, 2, {3, 4}, fixed, options.grid), samples, options.classify);
  const std::vector<std::vector<std::size_t>> pairs{{1, 2}, {3, 4}};
  if (r.stage2.phase_partition() != pairs) {
    r.failures.push_back("stage-2 partition " + format_partition(r.stage2.phase_partition()));
  } else {
    const auto e12 = check_invariant(r.stage2_12, r.stage2.groups[0].nodes, "stage-2 (phi1,phi2)");
    const auto e34 = check_invariant(r.stage2_34, r.stage2.groups[1].nodes, "stage-2 (phi3,phi4)");
    if (!e12.empty()) r.failures.push_back(e12);
    if (!e34.empty()) r.failures.push_back(e34);
    r.invariant_stage2 = e12.empty() && e34.empty();
  }

  r.stage3_12 = classify_encoders(activity_map(chain, 3, {1, 2}, fixed, options.grid), samples, options.classify);
  r.stage3_34 = classify_encoders(activity_map(chain, 3, {3, 4}, fixed, options.grid), samples, options.classify);
  std::vector<std::size_t> top(chain.stage(2).m());
  std::iota(top.begin(), top.end(), std::size_t{0});
  const auto f12 = check_invariant(r.stage3_12, top, "stage-3 (phi1,phi2)");
  const auto f34 = check_invariant(r.stage3_34, top, "stage-3 (phi3,phi4)");
  if (!f12.empty()) r.failures.push_back(f12);
  if (!f34.empty()) r.failures.push_back(f34);
  r.invariant_stage3 = f12.empty() && f34.empty();

  const auto taus = relative_thresholds(chain, options.threshold_fraction);
  std::vector<double> logic_taus = taus;
  for (double& t : logic_taus) t *= options.logic_factor;
  r.logic = extract_logic(threshold_connectivity(chain, taus), logic_taus);
  const bool nonempty = std::none_of(r.logic.begin(), r.logic.end(), [](const auto& e) { return e.empty(); });
  r.complement_logic = nonempty && !complement_pairing(r.logic).empty();
  if (!r.complement_logic) {
    std::string exprs;
    for (const auto& e : r.logic) exprs += (exprs.empty() ? "" : " | ") + e.to_string();
    r.failures.push_back("top-layer logic not complement paired: " + exprs);
  }
  return r;
}

}  // namespace svq
