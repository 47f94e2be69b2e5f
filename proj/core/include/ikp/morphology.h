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

// Inter-keypoint shape statistics and the morphology-aware loss.
//
// Two relation kinds are tracked: the distance between two keypoints and the
// angle at a vertex keypoint between rays to two others. Dataset statistics
// select the relations that barely vary across samples; the loss penalizes
// predicted relations that deviate from the same image's groundtruth.

#ifndef IKP_MORPHOLOGY_H_
#define IKP_MORPHOLOGY_H_

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "ikp/types.h"

namespace ikp {

struct RelationPair {
  int m = 0;  // m < n
  int n = 0;

  friend bool operator==(const RelationPair&, const RelationPair&) = default;
  friend auto operator<=>(const RelationPair&, const RelationPair&) = default;
};

// Angle at vertex n between rays n->m and n->l. Endpoints are unordered and
// stored canonically with m < l.
struct RelationTriple {
  int m = 0;
  int n = 0;
  int l = 0;

  friend bool operator==(const RelationTriple&, const RelationTriple&) = default;
  friend auto operator<=>(const RelationTriple&, const RelationTriple&) = default;
};

struct RelationSets {
  std::vector<RelationPair> pairs;
  std::vector<RelationTriple> triples;

  friend bool operator==(const RelationSets&, const RelationSets&) = default;
};

enum class SelectionMode {
  kThreshold,
  kTopKLowVariance,
  kTopKHighVariance,
  kAdjacentPoints,
};

absl::StatusOr<SelectionMode> ParseSelectionMode(std::string_view name);
std::string SelectionModeName(SelectionMode mode);

struct MorphologyConfig {
  // Distance std threshold, in units of the image diagonal.
  double t_d = 0.01;
  // Circular std threshold for angles.
  double t_a = 0.08;
  double lambda_m = 1.0;
  SelectionMode mode = SelectionMode::kThreshold;
  int top_k = 15;
  // Angle triples are enumerated only when max index - min index < window.
  // 0 enumerates all triples.
  int triple_window = 8;

  absl::Status Validate() const;
};

// Closed polygons of keypoint indices (e.g. the corners of each vertebra in
// order). Edges join consecutive corners; internal angles sit at each corner.
struct Topology {
  std::vector<std::vector<int>> polygons;

  bool empty() const { return polygons.empty(); }
  friend bool operator==(const Topology&, const Topology&) = default;
};

struct PairStat {
  RelationPair relation;
  double mean = 0.0;
  double std = 0.0;
  int count = 0;
  bool available = false;
};

struct TripleStat {
  RelationTriple relation;
  double mean_ux = 0.0;
  double mean_uy = 0.0;
  // Circular std; +inf when the mean resultant length is 0.
  double std = std::numeric_limits<double>::infinity();
  int count = 0;
  bool available = false;
};

struct RelationStats {
  int num_keypoints = 0;
  int sample_count = 0;
  int triple_window = 0;
  std::vector<PairStat> pairs;
  std::vector<TripleStat> triples;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// ||a - b|| / norm.
double PairDistance(const Point& a, const Point& b, double norm);

// Unit vector (cos t, sin t) of the signed angle t at `vertex` from ray
// vertex->m to ray vertex->l. Fails when either ray has zero length.
absl::StatusOr<Vec2> AngleVector(const Point& m, const Point& vertex,
                                 const Point& l);

// Every canonical triple for K keypoints, restricted by `window` (0 = all).
std::vector<RelationTriple> EnumerateTriples(int num_keypoints, int window);

// Population statistics over the dataset. `norms` holds one distance
// normalizer (image diagonal) per sample. A relation needs at least two
// samples where all its keypoints are visible.
absl::StatusOr<RelationStats> ComputeRelationStats(
    std::span<const KeypointSet> dataset, std::span<const double> norms,
    int triple_window);

absl::Status ValidateTopology(const Topology& topology, int num_keypoints);

absl::StatusOr<RelationSets> SelectRelations(const RelationStats& stats,
                                             const MorphologyConfig& config,
                                             const Topology* topology);

// All pairs and triples implied by the topology's polygon edges and internal
// angles.
RelationSets AdjacentRelations(const Topology& topology);

struct MorphologyLossResult {
  double value = 0.0;          // L_d + lambda_m * L_a
  double distance_term = 0.0;  // L_d
  double angle_term = 0.0;     // L_a
  // d(value)/d(pred coordinate) per keypoint.
  std::vector<Vec2> grad;
};

// L_d is the mean over usable pairs of |d(pred) - d(gt)| with distances
// divided by `norm`; L_a is the mean over usable triples of 1 - u_pred . u_gt.
// Relations touching an invisible keypoint, or degenerate in the groundtruth,
// are skipped.
MorphologyLossResult MorphologyLoss(const KeypointSet& pred,
                                    const KeypointSet& gt,
                                    const RelationSets& relations,
                                    double lambda_m, double norm);

}  // namespace ikp

#endif  // IKP_MORPHOLOGY_H_
