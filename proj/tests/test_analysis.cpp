#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "svq/analysis.hpp"
#include "svq/errors.hpp"

using namespace svq;

namespace {

ChainNetwork random_chain(std::vector<std::size_t> sizes, std::vector<std::size_t> ns, double range,
                          std::uint64_t seed) {
  auto c = ChainNetwork::zeros(sizes, ns, Vector(ns.size(), 1.0));
  randomize_parameters(c, range, seed);
  return c;
}

double max_abs_recon(const ChainNetwork& c) {
  double m = 0.0;
  for (const auto& s : c.stages())
    for (double v : s.recon().flat()) m = std::max(m, std::abs(v));
  return m;
}

/// Stage-1 node y reads (cos phi_k, sin phi_k) for phase k = y / 2 + 1 and reconstructs it.
ChainNetwork factorial_stage_chain() {
  SvqStage s(8, 20, 8);
  for (std::size_t y = 0; y < 8; ++y) {
    const std::size_t k = y / 2;
    const double sign = y % 2 == 0 ? 1.0 : -1.0;
    s.weights()(y, 2 * k) = 6.0 * sign;
    s.weights()(y, 2 * k + 1) = 6.0 * sign * 0.3;
    s.recon()(y, 2 * k) = 0.8 * sign;
    s.recon()(y, 2 * k + 1) = 0.1 * sign;
  }
  return ChainNetwork({s}, {1.0});
}

ActivityMap synthetic_map(std::size_t grid) {
  ActivityMap m;
  m.layer = 1;
  m.axis_a = 1;
  m.axis_b = 2;
  m.grid = grid;
  m.fixed = Vector(4, 0.0);
  for (std::size_t i = 0; i < grid; ++i)
    for (std::size_t j = 0; j < grid; ++j) {
      const double a = m.phase(i), b = m.phase(j);
      m.cells.push_back(PosteriorVector{{0.5 + 0.4 * std::cos(a),       // depends on phi_a only
                                         0.5 + 0.4 * std::cos(a + b),   // depends on the sum only
                                         0.5 + 0.4 * std::sin(b),       // depends on phi_b only
                                         0.01}});                       // never active
    }
  return m;
}

}  // namespace

TEST(Connectivity, ThresholdExtremes) {
  const auto c = random_chain({4, 6, 3}, {2, 2}, 1.0, 3);
  const double mx = max_abs_recon(c);
  const auto none = threshold_connectivity(c, mx * 1.0001);
  EXPECT_EQ(none.kept_edges(0), 0u);
  EXPECT_EQ(none.kept_edges(1), 0u);
  const auto all = threshold_connectivity(c, 1e-300);
  EXPECT_EQ(all.kept_edges(0), 24u);
  EXPECT_EQ(all.kept_edges(1), 18u);
  EXPECT_THROW(threshold_connectivity(c, 0.0), InvalidArgument);
}

TEST(Connectivity, ThresholdMonotonicity) {
  const auto c = random_chain({5, 7, 4}, {2, 2}, 1.0, 4);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double tau = 0.01; tau < 1.0; tau += 0.01) {
    const auto g = threshold_connectivity(c, tau);
    const std::size_t kept = g.kept_edges(0) + g.kept_edges(1);
    EXPECT_LE(kept, prev);
    prev = kept;
  }
}

TEST(Connectivity, RelativeThresholds) {
  const auto c = random_chain({3, 4, 2}, {1, 1}, 2.0, 5);
  const auto t = relative_thresholds(c, 0.25);
  ASSERT_EQ(t.size(), 2u);
  for (std::size_t l = 0; l < 2; ++l) {
    double mx = 0.0;
    for (double v : c.stage(l).recon().flat()) mx = std::max(mx, std::abs(v));
    EXPECT_DOUBLE_EQ(t[l], 0.25 * mx);
  }
}

TEST(Permutation, GroupedGraphIsFixed) {
  const auto c = factorial_stage_chain();
  const auto g = threshold_connectivity(c, 0.5);
  const auto p = permute_for_clarity(g);
  std::vector<std::size_t> id(8);
  std::iota(id.begin(), id.end(), 0);
  EXPECT_EQ(p.order[1], id);
  EXPECT_EQ(p.recon[0], g.recon[0]);
}

TEST(Permutation, ReversedLayerRegroups) {
  const auto c = factorial_stage_chain();
  std::vector<std::size_t> rev(8);
  std::iota(rev.rbegin(), rev.rend(), 0);
  std::vector<std::size_t> id8(8);
  std::iota(id8.begin(), id8.end(), 0);
  const auto reversed = apply_layer_orders(c, {id8, rev});
  const auto p = permute_for_clarity(threshold_connectivity(reversed, 0.5));
  // Nodes reading the same input pair are adjacent and blocks are ordered by input index.
  for (std::size_t pos = 0; pos < 8; ++pos) EXPECT_EQ(p.upstream(0, pos), (std::vector<std::size_t>{pos / 2 * 2}));
  std::set<std::size_t> seen(p.order[1].begin(), p.order[1].end());
  EXPECT_EQ(seen.size(), 8u);
}

TEST(Permutation, ApplyingOrdersPreservesFeedforward) {
  const auto c = random_chain({4, 6, 5, 3}, {3, 3, 3}, 1.5, 21);
  const auto g = permute_for_clarity(threshold_connectivity(c, relative_thresholds(c, 0.5)));
  const auto permuted = apply_layer_orders(c, g.order);
  std::mt19937_64 rng(1);
  for (const auto& x : oracle::random_batch(20, 4, 1.0, rng)) {
    const auto a = feedforward(c, x);
    const auto b = feedforward(permuted, x);
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t pos = 0; pos < a[l].size(); ++pos)
        EXPECT_NEAR(b[l][pos], a[l][g.order[l + 1][pos]], 1e-15);
  }
  // The permuted chain's thresholded graph equals the displayed graph.
  const auto again = threshold_connectivity(permuted, g.taus);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(again.recon[l], g.recon[l]);
}

TEST(Permutation, InvalidOrdersRejected) {
  const auto c = random_chain({2, 3}, {1}, 1.0, 1);
  EXPECT_THROW(apply_layer_orders(c, {{0, 1}, {0, 0, 1}}), InvalidArgument);
  EXPECT_THROW(apply_layer_orders(c, {{1, 0}, {0, 1, 2}}), InvalidArgument);
  EXPECT_THROW(apply_layer_orders(c, {{0, 1}}), DimensionMismatch);
}

TEST(ActivityMaps, ZeroNetworkUniform) {
  const std::size_t sizes[] = {8, 16, 8, 4};
  const std::size_t ns[] = {20, 20, 20};
  const auto c = ChainNetwork::zeros(sizes, ns, {1.0, 5.0, 0.1});
  const Vector fixed(4, 0.0);
  const auto m = activity_map(c, 2, {1, 2}, fixed, 16);
  ASSERT_EQ(m.cells.size(), 256u);
  for (const auto& p : m.cells)
    for (double v : p.probs) EXPECT_DOUBLE_EQ(v, 0.125);
}

TEST(ActivityMaps, NormalisedAndMatchesFeedforward) {
  const auto c = random_chain({8, 16, 8, 4}, {20, 20, 20}, 1.0, 8);
  const Vector fixed{0.1, 0.2, 0.3, 0.4};
  const auto m = activity_map(c, 3, {3, 4}, fixed, 8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      double sum = 0.0;
      for (double v : m.at(i, j).probs) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-12);
      const Vector phases{0.1, 0.2, m.phase(i), m.phase(j)};
      EXPECT_EQ(m.at(i, j), feedforward(c, embed_phases(phases))[2]);
    }
  EXPECT_THROW(activity_map(c, 0, {1, 2}, fixed, 8), InvalidArgument);
  EXPECT_THROW(activity_map(c, 1, {1, 2}, fixed, 4), InvalidArgument);
  EXPECT_THROW(activity_map(c, 1, {2, 2}, fixed, 8), InvalidArgument);
}

TEST(ActivityMaps, PopulatedBandFollowsSupport) {
  const auto s = gen_hierarchical_phases(3, 20000);
  const std::size_t G = 32;
  const auto band = populated_band(s, 1, 2, G);
  std::size_t populated = 0;
  for (std::size_t i = 0; i < G; ++i)
    for (std::size_t j = 0; j < G; ++j) {
      const std::size_t diff = (j + G - i) % G;
      if (band[i * G + j]) {
        ++populated;
        EXPECT_TRUE(diff <= G / 2 + 1 || diff == G - 1) << i << "," << j;
      }
    }
  EXPECT_GT(populated, G * 4);
  EXPECT_LT(populated, G * G / 2 + G * 2);
}

TEST(Classification, SyntheticFieldsAtAllResolutions) {
  const auto samples = gen_hierarchical_phases(5, 20000);
  for (std::size_t grid : {16u, 24u, 32u, 64u}) {
    const auto cls = classify_encoders(synthetic_map(grid), samples);
    ASSERT_EQ(cls.nodes.size(), 4u);
    EXPECT_EQ(cls.nodes[0].label, EncoderLabel::factorial_a) << grid;
    EXPECT_EQ(cls.nodes[1].label, EncoderLabel::invariant) << grid;
    EXPECT_NEAR(cls.nodes[1].across_variance, 0.0, 1e-12);
    EXPECT_EQ(cls.nodes[2].label, EncoderLabel::factorial_b) << grid;
    EXPECT_EQ(cls.nodes[3].label, EncoderLabel::silent) << grid;
    EXPECT_EQ(cls.responding(), (std::vector<std::size_t>{0, 1, 2}));
    for (const auto& n : cls.nodes) {
      EXPECT_GE(n.score, 0.0);
      EXPECT_LE(n.score, 1.0);
    }
    // A factorial node still varies across the band.
    EXPECT_GT(cls.nodes[0].invariant_ratio, 0.1);
  }
}

TEST(Classification, ConstantMapIsSilent) {
  auto m = synthetic_map(16);
  for (auto& c : m.cells) c.probs = {0.25, 0.25, 0.25, 0.25};
  const auto cls = classify_encoders(m, gen_hierarchical_phases(1, 5000));
  for (const auto& n : cls.nodes) EXPECT_EQ(n.label, EncoderLabel::silent);
  EXPECT_EQ(to_string(EncoderLabel::factorial_a), "factorial-a");
}

TEST(FactorialGroups, ConstructedStage) {
  const auto c = factorial_stage_chain();
  const auto samples = gen_hierarchical_phases(2, 2000);
  const auto g = detect_factorial_groups(c, 1, samples);
  EXPECT_EQ(g.phase_partition(), (std::vector<std::vector<std::size_t>>{{1}, {2}, {3}, {4}}));
  ASSERT_EQ(g.groups.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(g.groups[k].nodes, (std::vector<std::size_t>{2 * k, 2 * k + 1}));
  EXPECT_EQ(g.sensitivity.rows(), 8u);
  EXPECT_EQ(g.sensitivity.cols(), 4u);
  EXPECT_TRUE(g.silent.empty());
}

TEST(FactorialGroups, InvariantUnderRelabelling) {
  const auto c = factorial_stage_chain();
  const auto samples = gen_hierarchical_phases(2, 2000);
  const std::vector<std::size_t> perm{5, 2, 7, 0, 3, 6, 1, 4};
  std::vector<std::size_t> id8(8);
  std::iota(id8.begin(), id8.end(), 0);
  const auto p = apply_layer_orders(c, {id8, perm});
  const auto a = detect_factorial_groups(c, 1, samples);
  const auto b = detect_factorial_groups(p, 1, samples);
  EXPECT_EQ(a.phase_partition(), b.phase_partition());
  for (std::size_t k = 0; k < a.groups.size(); ++k) {
    std::vector<std::size_t> mapped;
    for (auto pos : b.groups[k].nodes) mapped.push_back(perm[pos]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(mapped, a.groups[k].nodes);
  }
}

TEST(FactorialGroups, ZeroNetworkIsSilent) {
  const std::size_t sizes[] = {8, 16};
  const std::size_t ns[] = {20};
  const auto c = ChainNetwork::zeros(sizes, ns, {1.0});
  const auto g = detect_factorial_groups(c, 1, gen_hierarchical_phases(2, 200));
  EXPECT_EQ(g.silent.size(), 16u);
  EXPECT_TRUE(g.groups.empty());
}

namespace {

/// Two-stage chain on 2 inputs: output 1 reads x1 through node 1, output 2 reads -x1 through node 2.
ChainNetwork logic_chain() {
  SvqStage s1(2, 1, 2), s2(2, 1, 2);
  s1.recon()(0, 0) = 1.0;
  s1.recon()(1, 0) = -1.0;
  s2.recon()(0, 0) = 1.0;
  s2.recon()(1, 1) = 1.0;
  return ChainNetwork({s1, s2}, {1.0, 1.0});
}

}  // namespace

TEST(Logic, PositiveAndNegatedChains) {
  const auto g = threshold_connectivity(logic_chain(), 0.5);
  const auto e = extract_logic(g, 0.5);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].to_string(), "x1");
  EXPECT_EQ(e[1].to_string(), "~x1");
  EXPECT_TRUE(e[1].is_complement_of(e[0]));
  const auto pairs = complement_pairing(e);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], (std::pair<std::size_t, std::size_t>{0, 1}));
}

TEST(Logic, NoSurvivingPathsGivesEmptyExpression) {
  const auto g = threshold_connectivity(logic_chain(), 0.5);
  const auto e = extract_logic(g, 2.0);
  for (const auto& x : e) {
    EXPECT_TRUE(x.empty());
    EXPECT_EQ(x.to_string(), "0");
  }
  EXPECT_TRUE(complement_pairing(e).empty());
  EXPECT_THROW(extract_logic(g, 0.1), InvalidArgument);
}

TEST(Logic, ConjunctionSortedByInput) {
  SvqStage s1(2, 1, 4), s2(1, 1, 2);
  s1.recon()(0, 3) = 1.0;
  s1.recon()(0, 0) = -1.0;
  s1.recon()(1, 2) = 1.0;
  s2.recon()(0, 0) = 1.0;
  s2.recon()(0, 1) = -1.0;
  const auto g = threshold_connectivity(ChainNetwork({s1, s2}, {1.0, 1.0}), 0.5);
  EXPECT_EQ(extract_logic(g, 0.5)[0].to_string(), "~x1 & ~x3 & x4");
}

TEST(Arcs, EvenlySpacedCodesGiveSingleCoveringArcs) {
  SvqStage s(6, 20, 2);
  for (std::size_t y = 0; y < 6; ++y) {
    const double th = kTwoPi * static_cast<double>(y) / 6.0;
    s.weights()(y, 0) = 8.0 * std::cos(th);
    s.weights()(y, 1) = 8.0 * std::sin(th);
  }
  const auto a = high_posterior_arcs(s, 720);
  EXPECT_TRUE(a.every_code_single_arc);
  EXPECT_TRUE(a.covers_circle);
  for (const auto& c : a.codes) EXPECT_EQ(c.arcs.size(), 1u);
}

TEST(Arcs, UniformPosteriorHasNoArcs) {
  const SvqStage s(6, 20, 2);
  const auto a = high_posterior_arcs(s, 360);
  EXPECT_FALSE(a.covers_circle);
  EXPECT_FALSE(a.every_code_single_arc);
}

TEST(Hierarchy, RequiresThreeStages) {
  const auto c = random_chain({8, 4}, {2}, 1.0, 1);
  EXPECT_THROW(evaluate_hierarchy(c, gen_hierarchical_phases(1, 10)), InvalidArgument);
}

TEST(Hierarchy, RandomNetworkFailsWithReasons) {
  const auto c = random_chain({8, 16, 8, 4}, {20, 20, 20}, 0.1, 3);
  const auto r = evaluate_hierarchy(c, gen_hierarchical_phases(1, 500));
  EXPECT_FALSE(r.passed());
  EXPECT_FALSE(r.failures.empty());
  EXPECT_FALSE(r.summary().empty());
}
