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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <glog/logging.h>

#include "absl/strings/str_cat.h"

namespace ikp {
namespace {

bool AllVisible(const KeypointSet& kps, std::initializer_list<int> idx) {
  return std::all_of(idx.begin(), idx.end(),
                     [&](int i) { return kps.is_visible(i); });
}

RelationTriple CanonicalTriple(int a, int vertex, int b) {
  return a < b ? RelationTriple{a, vertex, b} : RelationTriple{b, vertex, a};
}

// Returns the unit angle vector, or nullopt for a degenerate ray.
std::optional<Vec2> TryAngleVector(const Point& m, const Point& vertex,
                                   const Point& l) {
  const double ax = m.x - vertex.x, ay = m.y - vertex.y;
  const double bx = l.x - vertex.x, by = l.y - vertex.y;
  const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  const double inv = 1.0 / (na * nb);
  return Vec2{(ax * bx + ay * by) * inv, (ax * by - ay * bx) * inv};
}

template <typename Stat, typename Key>
std::vector<Stat> SortedAvailable(const std::vector<Stat>& stats,
                                  bool descending) {
  std::vector<Stat> out;
  for (const Stat& s : stats) {
    if (s.available) out.push_back(s);
  }
  std::stable_sort(out.begin(), out.end(), [&](const Stat& a, const Stat& b) {
    return descending ? a.std > b.std : a.std < b.std;
  });
  return out;
}

}  // namespace

absl::StatusOr<SelectionMode> ParseSelectionMode(std::string_view name) {
  if (name == "threshold") return SelectionMode::kThreshold;
  if (name == "top_k_low_variance") return SelectionMode::kTopKLowVariance;
  if (name == "top_k_high_variance") return SelectionMode::kTopKHighVariance;
  if (name == "adjacent_points") return SelectionMode::kAdjacentPoints;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown selection mode '", std::string(name), "'"));
}

std::string SelectionModeName(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::kThreshold:
      return "threshold";
    case SelectionMode::kTopKLowVariance:
      return "top_k_low_variance";
    case SelectionMode::kTopKHighVariance:
      return "top_k_high_variance";
    case SelectionMode::kAdjacentPoints:
      return "adjacent_points";
  }
  return "unknown";
}

absl::Status MorphologyConfig::Validate() const {
  if (lambda_m < 0.0) return absl::InvalidArgumentError("lambda_m must be >= 0");
  if (mode == SelectionMode::kThreshold && !(t_d > 0.0 && t_a > 0.0)) {
    return absl::InvalidArgumentError("t_d and t_a must be > 0");
  }
  if ((mode == SelectionMode::kTopKLowVariance ||
       mode == SelectionMode::kTopKHighVariance) &&
      top_k < 1) {
    return absl::InvalidArgumentError("top_k must be >= 1");
  }
  if (triple_window < 0) {
    return absl::InvalidArgumentError("triple_window must be >= 0");
  }
  return absl::OkStatus();
}

double PairDistance(const Point& a, const Point& b, double norm) {
  return Distance(a, b) / norm;
}

absl::StatusOr<Vec2> AngleVector(const Point& m, const Point& vertex,
                                 const Point& l) {
  auto u = TryAngleVector(m, vertex, l);
  if (!u) return absl::InvalidArgumentError("degenerate angle triple");
  return *u;
}

std::vector<RelationTriple> EnumerateTriples(int num_keypoints, int window) {
  std::vector<RelationTriple> out;
  for (int n = 0; n < num_keypoints; ++n) {
    for (int m = 0; m < num_keypoints; ++m) {
      if (m == n) continue;
      for (int l = m + 1; l < num_keypoints; ++l) {
        if (l == n) continue;
        const int lo = std::min({m, n, l}), hi = std::max({m, n, l});
        if (window > 0 && hi - lo >= window) continue;
        out.push_back({m, n, l});
      }
    }
  }
  return out;
}

absl::StatusOr<RelationStats> ComputeRelationStats(
    std::span<const KeypointSet> dataset, std::span<const double> norms,
    int triple_window) {
  if (dataset.size() < 2) {
    return absl::InvalidArgumentError("relation statistics need >= 2 samples");
  }
  if (norms.size() != dataset.size()) {
    return absl::InvalidArgumentError("one normalizer per sample required");
  }
  const int k = dataset.front().size();
  for (size_t s = 0; s < dataset.size(); ++s) {
    if (dataset[s].size() != k) {
      return absl::InvalidArgumentError(
          absl::StrCat("sample ", s, " has ", dataset[s].size(),
                       " keypoints, expected ", k));
    }
    if (!(norms[s] > 0.0)) {
      return absl::InvalidArgumentError("normalizers must be > 0");
    }
  }
  RelationStats stats;
  stats.num_keypoints = k;
  stats.sample_count = static_cast<int>(dataset.size());
  stats.triple_window = triple_window;

  std::vector<double> values;
  for (int m = 0; m < k; ++m) {
    for (int n = m + 1; n < k; ++n) {
      PairStat ps;
      ps.relation = {m, n};
      values.clear();
      for (size_t s = 0; s < dataset.size(); ++s) {
        const KeypointSet& kps = dataset[s];
        if (!AllVisible(kps, {m, n})) continue;
        values.push_back(PairDistance(kps.coords[m], kps.coords[n], norms[s]));
      }
      ps.count = static_cast<int>(values.size());
      ps.available = ps.count >= 2;
      if (ps.available) {
        ps.mean = std::accumulate(values.begin(), values.end(), 0.0) / ps.count;
        double var = 0.0;
        for (double v : values) var += (v - ps.mean) * (v - ps.mean);
        ps.std = std::sqrt(var / ps.count);
      }
      stats.pairs.push_back(ps);
    }
  }

  for (const RelationTriple& t : EnumerateTriples(k, triple_window)) {
    TripleStat ts;
    ts.relation = t;
    double sx = 0.0, sy = 0.0;
    for (const KeypointSet& kps : dataset) {
      if (!AllVisible(kps, {t.m, t.n, t.l})) continue;
      auto u = TryAngleVector(kps.coords[t.m], kps.coords[t.n], kps.coords[t.l]);
      if (!u) continue;
      sx += u->x;
      sy += u->y;
      ++ts.count;
    }
    ts.available = ts.count >= 2;
    if (ts.available) {
      ts.mean_ux = sx / ts.count;
      ts.mean_uy = sy / ts.count;
      const double r2 = ts.mean_ux * ts.mean_ux + ts.mean_uy * ts.mean_uy;
      ts.std = r2 > 0.0 ? std::sqrt(std::max(0.0, -std::log(r2)))
                        : std::numeric_limits<double>::infinity();
    }
    stats.triples.push_back(ts);
  }
  return stats;
}

absl::Status ValidateTopology(const Topology& topology, int num_keypoints) {
  for (const auto& poly : topology.polygons) {
    if (poly.size() < 3) {
      return absl::InvalidArgumentError("topology polygons need >= 3 corners");
    }
    std::set<int> seen;
    for (int i : poly) {
      if (i < 0 || i >= num_keypoints) {
        return absl::OutOfRangeError(
            absl::StrCat("topology index ", i, " outside [0, ", num_keypoints,
                         ")"));
      }
      if (!seen.insert(i).second) {
        return absl::InvalidArgumentError("repeated index in topology polygon");
      }
    }
  }
  return absl::OkStatus();
}

RelationSets AdjacentRelations(const Topology& topology) {
  std::set<RelationPair> pairs;
  std::set<RelationTriple> triples;
  for (const auto& poly : topology.polygons) {
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
      const int prev = poly[(i + n - 1) % n], cur = poly[i],
                next = poly[(i + 1) % n];
      pairs.insert({std::min(cur, next), std::max(cur, next)});
      triples.insert(CanonicalTriple(prev, cur, next));
    }
  }
  return {{pairs.begin(), pairs.end()}, {triples.begin(), triples.end()}};
}

absl::StatusOr<RelationSets> SelectRelations(const RelationStats& stats,
                                             const MorphologyConfig& config,
                                             const Topology* topology) {
  if (auto s = config.Validate(); !s.ok()) return s;
  RelationSets out;
  switch (config.mode) {
    case SelectionMode::kThreshold:
      for (const PairStat& p : stats.pairs) {
        if (p.available && p.std < config.t_d) out.pairs.push_back(p.relation);
      }
      for (const TripleStat& t : stats.triples) {
        if (t.available && t.std < config.t_a) out.triples.push_back(t.relation);
      }
      break;
    case SelectionMode::kTopKLowVariance:
    case SelectionMode::kTopKHighVariance: {
      const bool high = config.mode == SelectionMode::kTopKHighVariance;
      const size_t k = static_cast<size_t>(config.top_k);
      auto pairs = SortedAvailable<PairStat, RelationPair>(stats.pairs, high);
      auto triples =
          SortedAvailable<TripleStat, RelationTriple>(stats.triples, high);
      for (size_t i = 0; i < std::min(k, pairs.size()); ++i)
        out.pairs.push_back(pairs[i].relation);
      for (size_t i = 0; i < std::min(k, triples.size()); ++i)
        out.triples.push_back(triples[i].relation);
      std::sort(out.pairs.begin(), out.pairs.end());
      std::sort(out.triples.begin(), out.triples.end());
      break;
    }
    case SelectionMode::kAdjacentPoints:
      if (topology == nullptr || topology->empty()) {
        return absl::FailedPreconditionError(
            "adjacent_points selection requires a topology");
      }
      if (auto s = ValidateTopology(*topology, stats.num_keypoints); !s.ok()) {
        return s;
      }
      out = AdjacentRelations(*topology);
      break;
  }
  return out;
}

MorphologyLossResult MorphologyLoss(const KeypointSet& pred,
                                    const KeypointSet& gt,
                                    const RelationSets& relations,
                                    double lambda_m, double norm) {
  CHECK_EQ(pred.size(), gt.size());
  CHECK_GT(norm, 0.0);
  MorphologyLossResult result;
  result.grad.assign(static_cast<size_t>(pred.size()), Vec2{});
  if (relations.pairs.empty() && relations.triples.empty()) {
    LOG_FIRST_N(WARNING, 1) << "morphology loss called with empty relation sets";
    return result;
  }
  auto usable = [&](std::initializer_list<int> idx) {
    return AllVisible(gt, idx) && AllVisible(pred, idx);
  };

  std::vector<RelationPair> pairs;
  for (const RelationPair& r : relations.pairs) {
    if (usable({r.m, r.n})) pairs.push_back(r);
  }
  if (!pairs.empty()) {
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (const RelationPair& r : pairs) {
      const Point& a = pred.coords[r.m];
      const Point& b = pred.coords[r.n];
      const double dp = PairDistance(a, b, norm);
      const double diff = dp - PairDistance(gt.coords[r.m], gt.coords[r.n], norm);
      result.distance_term += std::abs(diff) * inv;
      const double len = Distance(a, b);
      if (diff == 0.0 || len == 0.0) continue;
      const double s = (diff > 0 ? 1.0 : -1.0) * inv / (len * norm);
      const double gx = s * (a.x - b.x), gy = s * (a.y - b.y);
      result.grad[r.m].x += gx;
      result.grad[r.m].y += gy;
      result.grad[r.n].x -= gx;
      result.grad[r.n].y -= gy;
    }
  }

  struct UsableTriple {
    RelationTriple rel;
    Vec2 u_gt;
  };
  std::vector<UsableTriple> triples;
  for (const RelationTriple& t : relations.triples) {
    if (!usable({t.m, t.n, t.l})) continue;
    auto u = TryAngleVector(gt.coords[t.m], gt.coords[t.n], gt.coords[t.l]);
    if (u) triples.push_back({t, *u});
  }
  if (!triples.empty()) {
    const double inv = 1.0 / static_cast<double>(triples.size());
    for (const UsableTriple& t : triples) {
      const Point& pm = pred.coords[t.rel.m];
      const Point& pn = pred.coords[t.rel.n];
      const Point& pl = pred.coords[t.rel.l];
      auto u = TryAngleVector(pm, pn, pl);
      if (!u) {
        result.angle_term += inv;  // zero vector, cosine similarity 0
        continue;
      }
      const double cos_sim = u->x * t.u_gt.x + u->y * t.u_gt.y;
      result.angle_term += (1.0 - cos_sim) * inv;
      // With u = (cos t, sin t): d(1 - u.u_gt)/dt = u.y * g.x - u.x * g.y.
      const double dtheta = (u->y * t.u_gt.x - u->x * t.u_gt.y) * inv * lambda_m;
      const double ax = pm.x - pn.x, ay = pm.y - pn.y;
      const double bx = pl.x - pn.x, by = pl.y - pn.y;
      const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by;
      // t = atan2(b) - atan2(a).
      const Vec2 da{ay / a2, -ax / a2};
      const Vec2 db{-by / b2, bx / b2};
      result.grad[t.rel.m].x += dtheta * da.x;
      result.grad[t.rel.m].y += dtheta * da.y;
      result.grad[t.rel.l].x += dtheta * db.x;
      result.grad[t.rel.l].y += dtheta * db.y;
      result.grad[t.rel.n].x -= dtheta * (da.x + db.x);
      result.grad[t.rel.n].y -= dtheta * (da.y + db.y);
    }
  }
  result.value = result.distance_term + lambda_m * result.angle_term;
  return result;
}

}  // namespace ikp
