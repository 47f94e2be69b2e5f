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

// Reference implementations used by the unit and acceptance tests. They are
// written as plain loops, independently of the library code they check.

#ifndef IKP_TESTS_ORACLES_H_
#define IKP_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ikp/eval.h"
#include "ikp/keypoint_codec.h"
#include "ikp/morphology.h"
#include "ikp/types.h"

namespace ikp::oracles {

// Per-pixel value of channel `channel` of the interaction map.
inline double DirectInteraction(std::span<const Click> clicks, int channel, double x,
                                double y, double sigma) {
  for (const Click& c : clicks) {
    if (c.index != channel) continue;
    const double dx = x - c.position.x, dy = y - c.position.y;
    return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  }
  return 0.0;
}

// Local soft-argmax over a dense row-major plane.
inline Point SoftArgmax(const std::vector<double>& plane, int w, int h, int r, double t) {
  int best = 0;
  for (int i = 1; i < w * h; ++i) {
    if (plane[i] > plane[best]) best = i;
  }
  const int bx = best % w, by = best / w;
  double z = 0, sx = 0, sy = 0;
  for (int y = std::max(0, by - r); y <= std::min(h - 1, by + r); ++y) {
    for (int x = std::max(0, bx - r); x <= std::min(w - 1, bx + r); ++x) {
      const double e = std::exp(plane[y * w + x] / t);
      z += e;
      sx += e * x;
      sy += e * y;
    }
  }
  return {sx / z, sy / z};
}

// Signed angle at n from ray n->m to ray n->l.
inline double Angle(const Point& m, const Point& n, const Point& l) {
  return std::atan2(l.y - n.y, l.x - n.x) - std::atan2(m.y - n.y, m.x - n.x);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Population mean and std of the normalized distance between m and n.
inline MeanStd PairStats(const std::vector<KeypointSet>& data,
                         const std::vector<double>& norms, int m, int n) {
  std::vector<double> d;
  for (size_t s = 0; s < data.size(); ++s) {
    const Point a = data[s].coords[m], b = data[s].coords[n];
    d.push_back(std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)) /
                norms[s]);
  }
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= d.size();
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / d.size())};
}

// sqrt(-ln R^2) with R the mean resultant length of the angles at t.n.
inline double CircularStd(const std::vector<KeypointSet>& data, const RelationTriple& t) {
  double cx = 0.0, cy = 0.0;
  for (const KeypointSet& k : data) {
    const double theta = Angle(k.coords[t.m], k.coords[t.n], k.coords[t.l]);
    cx += std::cos(theta);
    cy += std::sin(theta);
  }
  cx /= data.size();
  cy /= data.size();
  return std::sqrt(-std::log(cx * cx + cy * cy));
}

// Replays the click protocol step by step: the number of clicks spent before
// the MRE first drops to beta, or -1 when alpha clicks were not enough.
inline int ReplayClicks(const RevisionTrace& t, int alpha, double beta) {
  int clicks = 0;
  for (double mre : t.mre_per_step) {
    if (mre <= beta) return clicks;
    if (clicks == alpha) return -1;
    ++clicks;
  }
  return -1;
}

inline double Noc(std::span<const RevisionTrace> traces, int alpha, double beta) {
  double total = 0.0;
  int n = 0;
  for (const auto& t : traces) {
    if (!t.valid) continue;
    const int c = ReplayClicks(t, alpha, beta);
    total += c < 0 ? alpha : c;
    ++n;
  }
  return total / n;
}

inline double FailureRate(std::span<const RevisionTrace> traces, int alpha, double beta) {
  int failed = 0, n = 0;
  for (const auto& t : traces) {
    if (!t.valid) continue;
    failed += ReplayClicks(t, alpha, beta) < 0;
    ++n;
  }
  return static_cast<double>(failed) / n;
}

}  // namespace ikp::oracles

#endif  // IKP_TESTS_ORACLES_H_
