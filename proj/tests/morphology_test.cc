/*
 * Copyright 2026 The ikp Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ikp/morphology.h"

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.h"
#include "test_util.h"

namespace ikp {
namespace {

using ::ikp::testing::RandomKeypoints;

TEST(PairDistanceTest, Examples) {
  EXPECT_DOUBLE_EQ(PairDistance({0, 0}, {3, 4}, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(PairDistance({2, 2}, {2, 2}, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(PairDistance({0, 0}, {3, 4}, 5.0), 1.0);
}

TEST(AngleVectorTest, RightAndStraightAngles) {
  ASSERT_OK_AND_ASSIGN(Vec2 right, AngleVector({1, 0}, {0, 0}, {0, 1}));
  EXPECT_NEAR(right.x, 0.0, 1e-15);
  EXPECT_NEAR(right.y, 1.0, 1e-15);
  ASSERT_OK_AND_ASSIGN(Vec2 straight, AngleVector({-1, 0}, {0, 0}, {1, 0}));
  EXPECT_NEAR(straight.x, -1.0, 1e-15);
  EXPECT_NEAR(straight.y, 0.0, 1e-15);
}

TEST(AngleVectorTest, MatchesTrigonometricOracle) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const KeypointSet k = RandomKeypoints(3, 50, 50, 0, rng);
    ASSERT_OK_AND_ASSIGN(Vec2 u, AngleVector(k.coords[0], k.coords[1], k.coords[2]));
    const double theta = oracles::Angle(k.coords[0], k.coords[1], k.coords[2]);
    EXPECT_NEAR(u.x, std::cos(theta), 1e-9);
    EXPECT_NEAR(u.y, std::sin(theta), 1e-9);
    EXPECT_NEAR(std::hypot(u.x, u.y), 1.0, 1e-12);
  }
}

TEST(AngleVectorTest, DegenerateVertexIsAnError) {
  EXPECT_FALSE(AngleVector({0, 0}, {0, 0}, {1, 1}).ok());
  EXPECT_FALSE(AngleVector({1, 1}, {2, 2}, {2, 2}).ok());
}

TEST(EnumerateTriplesTest, CountsAndCanonicalForm) {
  // K * C(K-1, 2) vertex angles without a window.
  EXPECT_EQ(EnumerateTriples(6, 0).size(), 6u * 10u);
  for (const RelationTriple& t : EnumerateTriples(9, 4)) {
    EXPECT_LT(t.m, t.l);
    EXPECT_NE(t.n, t.m);
    EXPECT_NE(t.n, t.l);
    EXPECT_LT(std::max({t.m, t.n, t.l}) - std::min({t.m, t.n, t.l}), 4);
  }
  const auto all = EnumerateTriples(7, 0);
  EXPECT_EQ(std::set<RelationTriple>(all.begin(), all.end()).size(), all.size());
}

class RelationStatsOracleTest : public ::testing::TestWithParam<int> {};

TEST_P(RelationStatsOracleTest, MatchesBruteForce) {
  std::mt19937_64 rng(100 + GetParam());
  std::normal_distribution<double> jitter(0.0, 1.5);
  const int k = 6;
  const KeypointSet base = RandomKeypoints(k, 80, 60, 10, rng);
  std::vector<KeypointSet> data;
  std::vector<double> norms;
  for (int s = 0; s < 50; ++s) {
    KeypointSet ks = base;
    for (Point& p : ks.coords) {
      p.x += jitter(rng);
      p.y += jitter(rng);
    }
    data.push_back(ks);
    norms.push_back(std::hypot(80.0, 60.0) * (1.0 + 0.01 * s));
  }
  ASSERT_OK_AND_ASSIGN(RelationStats stats, ComputeRelationStats(data, norms, 0));
  EXPECT_EQ(stats.sample_count, 50);
  ASSERT_EQ(stats.pairs.size(), 15u);
  for (const PairStat& p : stats.pairs) {
    const oracles::MeanStd o = oracles::PairStats(data, norms, p.relation.m, p.relation.n);
    EXPECT_TRUE(p.available);
    EXPECT_EQ(p.count, 50);
    EXPECT_NEAR(p.mean, o.mean, 1e-9);
    EXPECT_NEAR(p.std, o.std, 1e-9);
  }
  ASSERT_EQ(stats.triples.size(), 60u);
  for (const TripleStat& t : stats.triples) {
    EXPECT_NEAR(t.std, oracles::CircularStd(data, t.relation), 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(Fixtures, RelationStatsOracleTest, ::testing::Range(0, 50));

TEST(RelationStatsTest, HandComputedExamples) {
  // Distances 3 and 5 with unit norm: population std 1.
  std::vector<KeypointSet> data = {KeypointSet({{0, 0}, {3, 0}, {0, 7}}),
                                   KeypointSet({{0, 0}, {5, 0}, {0, 7}})};
  std::vector<double> norms = {1.0, 1.0};
  ASSERT_OK_AND_ASSIGN(RelationStats stats, ComputeRelationStats(data, norms, 0));
  const auto pair = [&](int m, int n) {
    for (const PairStat& p : stats.pairs) {
      if (p.relation == RelationPair{m, n}) return p;
    }
    return PairStat{};
  };
  EXPECT_DOUBLE_EQ(pair(0, 1).std, 1.0);
  EXPECT_DOUBLE_EQ(pair(0, 1).mean, 4.0);
  EXPECT_DOUBLE_EQ(pair(0, 2).std, 0.0);
  // The angle at keypoint 0 between keypoints 1 and 2 is 90 degrees in both.
  for (const TripleStat& t : stats.triples) {
    if (t.relation == RelationTriple{1, 0, 2}) {
      EXPECT_NEAR(t.std, 0.0, 1e-7);
    }
  }
}

TEST(RelationStatsTest, OppositeAnglesGiveInfiniteStd) {
  // theta = +90 and -90 degrees: the mean resultant length is zero.
  std::vector<KeypointSet> data = {KeypointSet({{1, 0}, {0, 0}, {0, 1}}),
                                   KeypointSet({{1, 0}, {0, 0}, {0, -1}})};
  ASSERT_OK_AND_ASSIGN(RelationStats stats,
                       ComputeRelationStats(data, std::vector<double>{1, 1}, 0));
  for (const TripleStat& t : stats.triples) {
    if (t.relation == RelationTriple{0, 1, 2}) {
      EXPECT_TRUE(std::isinf(t.std));
    }
  }
}

TEST(RelationStatsTest, InvisibleSamplesAreSkippedPerRelation) {
  std::vector<KeypointSet> data(3, KeypointSet({{0, 0}, {1, 0}, {0, 2}}));
  data[1].visible[2] = 0;
  data[2].visible[2] = 0;
  ASSERT_OK_AND_ASSIGN(RelationStats stats,
                       ComputeRelationStats(data, std::vector<double>(3, 1.0), 0));
  for (const PairStat& p : stats.pairs) {
    if (p.relation == RelationPair{0, 1}) {
      EXPECT_TRUE(p.available);
      EXPECT_EQ(p.count, 3);
    } else {
      EXPECT_FALSE(p.available) << p.relation.m << "," << p.relation.n;
    }
  }
}

TEST(RelationStatsTest, NeedsTwoSamples) {
  std::vector<KeypointSet> one = {KeypointSet({{0, 0}, {1, 1}})};
  EXPECT_FALSE(ComputeRelationStats(one, std::vector<double>{1.0}, 0).ok());
}

TEST(RelationStatsTest, ConcentratedAnglesHaveSmallerCircularStd) {
  std::mt19937_64 rng(12);
  auto sample = [&](double spread) {
    std::normal_distribution<double> noise(0.0, spread);
    std::vector<KeypointSet> data;
    for (int i = 0; i < 200; ++i) {
      const double theta = 1.0 + noise(rng);
      data.push_back(KeypointSet({{1, 0}, {0, 0}, {std::cos(theta), std::sin(theta)}}));
    }
    return *ComputeRelationStats(data, std::vector<double>(200, 1.0), 0);
  };
  const auto std_of = [](const RelationStats& s) {
    for (const TripleStat& t : s.triples) {
      if (t.relation == RelationTriple{0, 1, 2}) return t.std;
    }
    return -1.0;
  };
  EXPECT_LT(std_of(sample(0.05)), std_of(sample(0.4)));
}

RelationStats DistinctStats(int k) {
  RelationStats s;
  s.num_keypoints = k;
  s.sample_count = 10;
  double v = 0.001;
  for (int m = 0; m < k; ++m) {
    for (int n = m + 1; n < k; ++n) {
      // Deterministic but scrambled ordering of variances.
      s.pairs.push_back({{m, n}, 0.5, std::fmod(v * 7919.0, 1.0), 10, true});
      v += 0.001;
    }
  }
  for (const RelationTriple& t : EnumerateTriples(k, 0)) {
    s.triples.push_back({t, 1.0, 0.0, std::fmod(v * 104729.0, 1.0) + 1e-3, 10, true});
    v += 0.001;
  }
  return s;
}

TEST(SelectRelationsTest, ThresholdUsesStrictInequality) {
  RelationStats s = DistinctStats(5);
  MorphologyConfig cfg;
  cfg.t_d = 0.3;
  cfg.t_a = 0.4;
  ASSERT_OK_AND_ASSIGN(RelationSets rel, SelectRelations(s, cfg, nullptr));
  size_t expected_pairs = 0, expected_triples = 0;
  for (const auto& p : s.pairs) expected_pairs += p.std < 0.3;
  for (const auto& t : s.triples) expected_triples += t.std < 0.4;
  EXPECT_EQ(rel.pairs.size(), expected_pairs);
  EXPECT_EQ(rel.triples.size(), expected_triples);

  cfg.t_d = 1e-9;
  cfg.t_a = 1e-9;
  ASSERT_OK_AND_ASSIGN(RelationSets none, SelectRelations(s, cfg, nullptr));
  EXPECT_TRUE(none.pairs.empty());
  EXPECT_TRUE(none.triples.empty());
}

TEST(SelectRelationsTest, ConstantPairIsAlwaysSelected) {
  RelationStats s = DistinctStats(4);
  s.pairs[2].std = 0.0;
  MorphologyConfig cfg;
  cfg.t_d = 1e-12;
  ASSERT_OK_AND_ASSIGN(RelationSets rel, SelectRelations(s, cfg, nullptr));
  ASSERT_EQ(rel.pairs.size(), 1u);
  EXPECT_EQ(rel.pairs[0], s.pairs[2].relation);
}

TEST(SelectRelationsTest, LoweringThresholdNeverAddsPairs) {
  const RelationStats s = DistinctStats(7);
  MorphologyConfig cfg;
  std::set<RelationPair> previous;
  bool first = true;
  for (double t = 1.0; t > 0.0; t -= 0.05) {
    cfg.t_d = t;
    ASSERT_OK_AND_ASSIGN(RelationSets rel, SelectRelations(s, cfg, nullptr));
    const std::set<RelationPair> current(rel.pairs.begin(), rel.pairs.end());
    if (!first) {
      EXPECT_TRUE(std::includes(previous.begin(), previous.end(), current.begin(),
                                current.end()));
    }
    previous = current;
    first = false;
  }
}

TEST(SelectRelationsTest, TopKReturnsExactlyKExtremes) {
  const RelationStats s = DistinctStats(8);
  for (const SelectionMode mode :
       {SelectionMode::kTopKLowVariance, SelectionMode::kTopKHighVariance}) {
    MorphologyConfig cfg;
    cfg.mode = mode;
    cfg.top_k = 15;
    ASSERT_OK_AND_ASSIGN(RelationSets rel, SelectRelations(s, cfg, nullptr));
    ASSERT_EQ(rel.pairs.size(), 15u);
    ASSERT_EQ(rel.triples.size(), 15u);
    std::vector<double> pair_std, triple_std;
    for (const auto& p : s.pairs) pair_std.push_back(p.std);
    for (const auto& t : s.triples) triple_std.push_back(t.std);
    std::sort(pair_std.begin(), pair_std.end());
    std::sort(triple_std.begin(), triple_std.end());
    const bool low = mode == SelectionMode::kTopKLowVariance;
    const double pair_cut = low ? pair_std[14] : pair_std[pair_std.size() - 15];
    const double triple_cut = low ? triple_std[14] : triple_std[triple_std.size() - 15];
    for (const auto& p : s.pairs) {
      const bool chosen = std::find(rel.pairs.begin(), rel.pairs.end(), p.relation) !=
                          rel.pairs.end();
      EXPECT_EQ(chosen, low ? p.std <= pair_cut : p.std >= pair_cut);
    }
    for (const auto& t : s.triples) {
      const bool chosen = std::find(rel.triples.begin(), rel.triples.end(),
                                    t.relation) != rel.triples.end();
      EXPECT_EQ(chosen, low ? t.std <= triple_cut : t.std >= triple_cut);
    }
  }
}

TEST(SelectRelationsTest, UnavailableRelationsAreNeverSelected) {
  RelationStats s = DistinctStats(5);
  for (auto& p : s.pairs) p.available = false;
  MorphologyConfig cfg;
  cfg.mode = SelectionMode::kTopKHighVariance;
  cfg.top_k = 3;
  ASSERT_OK_AND_ASSIGN(RelationSets rel, SelectRelations(s, cfg, nullptr));
  EXPECT_TRUE(rel.pairs.empty());
  EXPECT_EQ(rel.triples.size(), 3u);
}

TEST(SelectRelationsTest, AdjacentModeUsesTopology) {
  const RelationStats s = DistinctStats(8);
  MorphologyConfig cfg;
  cfg.mode = SelectionMode::kAdjacentPoints;
  EXPECT_EQ(SelectRelations(s, cfg, nullptr).status().code(),
            absl::StatusCode::kFailedPrecondition);
  const Topology topo{{{0, 1, 2, 3}, {4, 5, 6, 7}}};
  ASSERT_OK_AND_ASSIGN(RelationSets rel, SelectRelations(s, cfg, &topo));
  EXPECT_EQ(rel.pairs.size(), 8u);    // 4 edges per quadrilateral
  EXPECT_EQ(rel.triples.size(), 8u);  // 4 corners per quadrilateral
  EXPECT_TRUE(std::find(rel.pairs.begin(), rel.pairs.end(), RelationPair{0, 3}) !=
              rel.pairs.end());
  EXPECT_TRUE(std::find(rel.triples.begin(), rel.triples.end(),
                        RelationTriple{1, 0, 3}) != rel.triples.end());
  EXPECT_EQ(rel, AdjacentRelations(topo));
}

TEST(SelectionModeTest, NamesRoundTrip) {
  for (const SelectionMode m :
       {SelectionMode::kThreshold, SelectionMode::kTopKLowVariance,
        SelectionMode::kTopKHighVariance, SelectionMode::kAdjacentPoints}) {
    ASSERT_OK_AND_ASSIGN(SelectionMode back, ParseSelectionMode(SelectionModeName(m)));
    EXPECT_EQ(back, m);
  }
  EXPECT_FALSE(ParseSelectionMode("bogus").ok());
}

TEST(MorphologyLossTest, HandExamples) {
  const KeypointSet gt({{0, 0}, {3, 0}});
  const KeypointSet pred({{0, 0}, {5, 0}});
  const RelationSets pair_only{{{0, 1}}, {}};
  EXPECT_DOUBLE_EQ(MorphologyLoss(pred, gt, pair_only, 1.0, 1.0).value, 2.0);
  EXPECT_DOUBLE_EQ(MorphologyLoss(gt, gt, pair_only, 1.0, 1.0).value, 0.0);
  EXPECT_DOUBLE_EQ(MorphologyLoss(pred, gt, RelationSets{}, 1.0, 1.0).value, 0.0);
}

TEST(MorphologyLossTest, AngleTermIsOneMinusCosine) {
  const KeypointSet gt({{1, 0}, {0, 0}, {0, 1}});    // 90 degrees
  const KeypointSet pred({{1, 0}, {0, 0}, {-1, 0}});  // 180 degrees
  const RelationSets rel{{}, {{0, 1, 2}}};
  const MorphologyLossResult r = MorphologyLoss(pred, gt, rel, 0.5, 1.0);
  EXPECT_NEAR(r.angle_term, 1.0, 1e-12);
  EXPECT_NEAR(r.value, 0.5, 1e-12);
}

TEST(MorphologyLossTest, InvisibleKeypointsAreSkipped) {
  KeypointSet gt({{0, 0}, {3, 0}, {0, 4}});
  gt.visible[2] = 0;
  const KeypointSet pred({{0, 0}, {5, 0}, {9, 9}});
  const RelationSets rel{{{0, 1}, {0, 2}}, {{1, 0, 2}}};
  const MorphologyLossResult r = MorphologyLoss(pred, gt, rel, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(r.distance_term, 2.0);
  EXPECT_DOUBLE_EQ(r.angle_term, 0.0);
}

RelationSets AllRelations(int k) {
  RelationSets rel;
  for (int m = 0; m < k; ++m) {
    for (int n = m + 1; n < k; ++n) rel.pairs.push_back({m, n});
  }
  rel.triples = EnumerateTriples(k, 0);
  return rel;
}

class MorphologyLossFixtureTest : public ::testing::TestWithParam<int> {};

TEST_P(MorphologyLossFixtureTest, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(500 + GetParam());
  const int k = 5;
  const KeypointSet gt = RandomKeypoints(k, 60, 60, 5, rng);
  const KeypointSet pred = RandomKeypoints(k, 60, 60, 5, rng);
  const RelationSets rel = AllRelations(k);
  const double norm = std::hypot(60.0, 60.0);
  const MorphologyLossResult r = MorphologyLoss(pred, gt, rel, 0.7, norm);
  ASSERT_EQ(r.grad.size(), static_cast<size_t>(k));
  const double eps = 1e-6;
  for (int i = 0; i < k; ++i) {
    for (int axis = 0; axis < 2; ++axis) {
      KeypointSet p = pred, m = pred;
      (axis == 0 ? p.coords[i].x : p.coords[i].y) += eps;
      (axis == 0 ? m.coords[i].x : m.coords[i].y) -= eps;
      const double fd = (MorphologyLoss(p, gt, rel, 0.7, norm).value -
                         MorphologyLoss(m, gt, rel, 0.7, norm).value) /
                        (2 * eps);
      const double analytic = axis == 0 ? r.grad[i].x : r.grad[i].y;
      EXPECT_LE(std::abs(fd - analytic), 1e-4 * std::max(std::abs(fd), 1e-6))
          << "keypoint " << i << " axis " << axis;
    }
  }
}

TEST_P(MorphologyLossFixtureTest, InvariantUnderRigidMotion) {
  std::mt19937_64 rng(900 + GetParam());
  const int k = 6;
  const KeypointSet gt = RandomKeypoints(k, 50, 50, 2, rng);
  const KeypointSet pred = RandomKeypoints(k, 50, 50, 2, rng);
  const RelationSets rel = AllRelations(k);
  const double angle = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
  const double tx = std::uniform_real_distribution<double>(-20, 20)(rng);
  const double ty = std::uniform_real_distribution<double>(-20, 20)(rng);
  auto move = [&](KeypointSet k) {
    for (Point& p : k.coords) {
      p = {std::cos(angle) * p.x - std::sin(angle) * p.y + tx,
           std::sin(angle) * p.x + std::cos(angle) * p.y + ty};
    }
    return k;
  };
  const double before = MorphologyLoss(pred, gt, rel, 1.0, 70.0).value;
  const double after = MorphologyLoss(move(pred), move(gt), rel, 1.0, 70.0).value;
  EXPECT_NEAR(before, after, 1e-9);
  EXPECT_NEAR(MorphologyLoss(move(gt), gt, rel, 1.0, 70.0).distance_term, 0.0, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Fixtures, MorphologyLossFixtureTest, ::testing::Range(0, 20));

TEST(TopologyTest, ValidatesIndicesAndPolygonSize) {
  EXPECT_TRUE(ValidateTopology(Topology{{{0, 1, 2}}}, 3).ok());
  EXPECT_FALSE(ValidateTopology(Topology{{{0, 1, 5}}}, 3).ok());
  EXPECT_FALSE(ValidateTopology(Topology{{{0, 1}}}, 3).ok());
}

}  // namespace
}  // namespace ikp
