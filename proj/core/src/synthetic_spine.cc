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

#include "ikp/synthetic_spine.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace ikp {
namespace {

struct Geometry {
  std::vector<std::vector<Point>> vertebrae;
  // Unannotated neighbours continuing the chain beyond both ends.
  std::vector<std::vector<Point>> context;
  int faint = -1;
};

double Nominal(const SyntheticSpineConfig& c) {
  return c.chain_extent * c.height /
         (c.num_vertebrae + (c.num_vertebrae - 1) * c.gap);
}

Geometry SampleGeometry(const SyntheticSpineConfig& c, std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double vh = Nominal(c);
  const double vw = c.aspect * vh;
  const double pitch = vh * (1.0 + c.gap);
  const double top = 0.5 * c.height - 0.5 * (c.num_vertebrae * vh +
                                            (c.num_vertebrae - 1) * c.gap * vh);
  const double c_bend = c.bend_std * unit(rng);
  const double s_bend = 0.5 * c.bend_std * unit(rng);
  auto bend = [&](double t) {
    return c_bend * (1.0 - t * t) + s_bend * std::sin(std::numbers::pi * t);
  };
  auto bend_slope = [&](double t) {
    return -2.0 * c_bend * t + s_bend * std::numbers::pi * std::cos(std::numbers::pi * t);
  };
  const double cx = 0.5 * (c.width - 1);
  const double cy = 0.5 * (c.height - 1);
  const double rot = c.rotation_std * unit(rng);
  const double scale = 1.0 + c.scale_std * unit(rng);
  const double tx = c.translation_std * unit(rng);
  const double ty = c.translation_std * unit(rng);
  const double cr = std::cos(rot), sr = std::sin(rot);
  const double half_chain = 0.5 * (c.num_vertebrae - 1) * pitch;
  const double shift = c.chain_shift_std * unit(rng);

  Geometry g;
  for (int v = -c.context_vertebrae; v < c.num_vertebrae + c.context_vertebrae; ++v) {
    const double t = c.num_vertebrae > 1 ? -1.0 + 2.0 * v / (c.num_vertebrae - 1) : 0.0;
    const double px = cx + bend(t);
    const double py = top + 0.5 * vh + v * pitch + shift;
    // d(x)/d(y) along the chain; t spans 2 * half_chain pixels.
    const double slope = half_chain > 0 ? bend_slope(t) / half_chain : 0.0;
    const double tilt = -std::atan(slope) + c.tilt_std * unit(rng);
    const double h = vh * (1.0 + c.shape_std * unit(rng));
    const double w = vw * (1.0 + c.shape_std * unit(rng));
    // Wedged body: the top edge is narrower or wider than the bottom edge.
    const double wedge = c.wedge_std * unit(rng);
    const double wt = w * (1.0 - wedge), wb = w * (1.0 + wedge);
    std::vector<std::pair<double, double>> local = {
        {-0.5 * wt, -0.5 * h}, {0.5 * wt, -0.5 * h}, {0.5 * wb, 0.5 * h}};
    if (c.corners_per_vertebra == 5) local.push_back({0.0, 0.35 * h});
    local.push_back({-0.5 * wb, 0.5 * h});
    for (auto& [lx, ly] : local) {
      lx += c.corner_jitter * unit(rng);
      ly += c.corner_jitter * unit(rng);
    }
    const double ct = std::cos(tilt), st = std::sin(tilt);
    std::vector<Point> corners;
    for (auto [lx, ly] : local) {
      const double x = px + ct * lx - st * ly;
      const double y = py + st * lx + ct * ly;
      // Global similarity transform about the image center.
      const double dx = (x - cx) * scale, dy = (y - cy) * scale;
      corners.push_back({cx + cr * dx - sr * dy + tx, cy + sr * dx + cr * dy + ty});
    }
    if (v >= 0 && v < c.num_vertebrae) {
      g.vertebrae.push_back(std::move(corners));
    } else {
      g.context.push_back(std::move(corners));
    }
  }
  if (uniform(rng) < c.faint_probability) {
    g.faint = static_cast<int>(uniform(rng) * c.num_vertebrae) % c.num_vertebrae;
  }
  return g;
}

bool Inside(const Geometry& g, const SyntheticSpineConfig& c) {
  for (const auto& poly : g.vertebrae) {
    for (const Point& p : poly) {
      if (p.x < c.margin || p.y < c.margin || p.x > c.width - 1 - c.margin ||
          p.y > c.height - 1 - c.margin) {
        return false;
      }
    }
  }
  return true;
}

bool PointInPolygon(const std::vector<Point>& poly, double x, double y) {
  bool inside = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > y) != (b.y > y) &&
        x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

Image Render(const Geometry& g, const SyntheticSpineConfig& c,
             std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Image img(1, c.width, c.height);
  // Smooth background: base level plus a few low-frequency waves.
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 3; ++i) {
    waves.push_back({uniform(rng) * 3.0 / c.width, uniform(rng) * 3.0 / c.height,
                     uniform(rng) * 2.0 * std::numbers::pi, 0.05 + 0.05 * uniform(rng)});
  }
  for (int y = 0; y < c.height; ++y) {
    for (int x = 0; x < c.width; ++x) {
      double v = c.background_intensity;
      for (const Wave& w : waves) {
        v += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
      }
      img.at(0, x, y) = static_cast<float>(v);
    }
  }
  // Vertebral bodies with 4x4 supersampled coverage.
  constexpr int kSub = 4;
  std::vector<const std::vector<Point>*> bodies;
  for (const auto& poly : g.vertebrae) bodies.push_back(&poly);
  for (const auto& poly : g.context) bodies.push_back(&poly);
  for (size_t v = 0; v < bodies.size(); ++v) {
    const auto& poly = *bodies[v];
    const double contrast =
        static_cast<int>(v) == g.faint ? 0.3 : 0.85 + 0.3 * uniform(rng);
    const double level = c.body_intensity * contrast;
    double x0 = c.width, x1 = 0, y0 = c.height, y1 = 0;
    for (const Point& p : poly) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    for (int y = std::max(0, static_cast<int>(y0) - 1);
         y <= std::min(c.height - 1, static_cast<int>(y1) + 1); ++y) {
      for (int x = std::max(0, static_cast<int>(x0) - 1);
           x <= std::min(c.width - 1, static_cast<int>(x1) + 1); ++x) {
        int hits = 0;
        for (int sy = 0; sy < kSub; ++sy) {
          for (int sx = 0; sx < kSub; ++sx) {
            hits += PointInPolygon(poly, x - 0.5 + (sx + 0.5) / kSub,
                                   y - 0.5 + (sy + 0.5) / kSub);
          }
        }
        const double cover = static_cast<double>(hits) / (kSub * kSub);
        img.at(0, x, y) = static_cast<float>(img.at(0, x, y) + cover * level);
      }
    }
  }
  for (float& p : img.pixels) {
    p = static_cast<float>(std::clamp(p + c.noise_std * unit(rng), 0.0, 1.0));
  }
  // Quantize like an 8-bit PNG so in-memory and on-disk datasets agree.
  for (float& p : img.pixels) p = std::lround(p * 255.0f) / 255.0f;
  return img;
}

}  // namespace

absl::Status SyntheticSpineConfig::Validate() const {
  if (num_vertebrae < 1) {
    return absl::InvalidArgumentError("num_vertebrae must be >= 1");
  }
  if (corners_per_vertebra != 4 && corners_per_vertebra != 5) {
    return absl::InvalidArgumentError("corners_per_vertebra must be 4 or 5");
  }
  if (width < 16 || height < 16 || num_samples < 1) {
    return absl::InvalidArgumentError("image must be >= 16x16 with >= 1 sample");
  }
  for (double v : {translation_std, rotation_std, scale_std, shape_std, wedge_std,
                   corner_jitter, tilt_std, chain_shift_std,
                   bend_std, noise_std}) {
    if (v < 0.0) return absl::InvalidArgumentError("variances must be >= 0");
  }
  if (context_vertebrae < 0) {
    return absl::InvalidArgumentError("context_vertebrae must be >= 0");
  }
  if (!(chain_extent > 0.0) || !(aspect > 0.0) || gap < 0.0 || margin < 0.0) {
    return absl::InvalidArgumentError("chain geometry must be positive");
  }
  const double vh = Nominal(*this);
  if (chain_extent >= 1.0 || aspect * vh + 2.0 * margin >= width) {
    return absl::InvalidArgumentError(absl::StrCat(
        "degenerate config: a ", num_vertebrae, "-vertebra chain does not fit a ",
        width, "x", height, " frame"));
  }
  if (train_fraction < 0 || val_fraction < 0 || train_fraction + val_fraction > 1) {
    return absl::InvalidArgumentError("invalid split fractions");
  }
  return absl::OkStatus();
}

Topology SyntheticTopology(const SyntheticSpineConfig& config) {
  Topology t;
  const int n = config.corners_per_vertebra;
  for (int v = 0; v < config.num_vertebrae; ++v) {
    std::vector<int> poly;
    for (int k = 0; k < n; ++k) poly.push_back(v * n + k);
    t.polygons.push_back(std::move(poly));
  }
  return t;
}

absl::StatusOr<SyntheticSample> RenderSyntheticSpine(
    const SyntheticSpineConfig& config, int index) {
  if (auto s = config.Validate(); !s.ok()) return s;
  std::seed_seq seq{static_cast<uint64_t>(config.seed) & 0xffffffffu,
                    static_cast<uint64_t>(config.seed) >> 32,
                    static_cast<uint64_t>(index)};
  std::mt19937_64 rng(seq);
  constexpr int kAttempts = 200;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Geometry g = SampleGeometry(config, rng);
    if (!Inside(g, config)) continue;
    SyntheticSample s;
    std::vector<Point> pts;
    for (const auto& poly : g.vertebrae) pts.insert(pts.end(), poly.begin(), poly.end());
    s.keypoints = KeypointSet(std::move(pts));
    s.image = Render(g, config, rng);
    return s;
  }
  return absl::InvalidArgumentError(
      "degenerate config: vertebrae repeatedly fall out of frame");
}

absl::StatusOr<SyntheticDataset> GenerateSyntheticSpine(
    const SyntheticSpineConfig& config) {
  if (auto s = config.Validate(); !s.ok()) return s;
  SyntheticDataset out;
  DatasetManifest& m = out.manifest;
  m.name = "synthetic-spine";
  m.num_keypoints = config.num_keypoints();
  m.target_width = config.width;
  m.target_height = config.height;
  m.topology = SyntheticTopology(config);
  for (int v = 0; v < config.num_vertebrae; ++v) {
    for (int k = 0; k < config.corners_per_vertebra; ++k) {
      m.keypoint_names.push_back(absl::StrCat("v", v, "_c", k));
    }
  }
  for (int i = 0; i < config.num_samples; ++i) {
    auto s = RenderSyntheticSpine(config, i);
    if (!s.ok()) return s.status();
    ManifestRecord r;
    r.image = absl::StrFormat("images/%04d.png", i);
    r.keypoints = s->keypoints;
    r.subject = absl::StrCat("s", i);
    r.width = config.width;
    r.height = config.height;
    m.records.push_back(std::move(r));
    out.samples.push_back(std::move(*s));
  }
  AssignSubjectSplits(m.records, config.train_fraction, config.val_fraction,
                      config.seed);
  return out;
}

absl::StatusOr<DatasetManifest> WriteSyntheticSpine(
    const SyntheticSpineConfig& config, const std::filesystem::path& dir) {
  auto ds = GenerateSyntheticSpine(config);
  if (!ds.ok()) return ds.status();
  ds->manifest.base_dir = dir;
  for (size_t i = 0; i < ds->samples.size(); ++i) {
    if (auto s = WritePng(ds->samples[i].image, dir / ds->manifest.records[i].image);
        !s.ok()) {
      return s;
    }
  }
  if (auto s = WriteManifest(ds->manifest, dir / "manifest.jsonl"); !s.ok()) return s;
  return ds->manifest;
}

std::vector<Sample> SamplesInSplit(const SyntheticDataset& dataset,
                                   Split split) {
  std::vector<Sample> out;
  const auto& records = dataset.manifest.records;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].split != split) continue;
    const SyntheticSample& s = dataset.samples[i];
    out.push_back({records[i].image, s.image, s.keypoints, s.image.width,
                   s.image.height, s.keypoints});
  }
  return out;
}

}  // namespace ikp
