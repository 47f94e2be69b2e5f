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

#include "ikp/keypoint_codec.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"

namespace ikp {
namespace {

bool InsideImage(const Point& p, int width, int height) {
  return p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height;
}

absl::Status ValidateShape(const HeatmapShape& shape) {
  if (shape.channels < 0 || shape.width <= 0 || shape.height <= 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("invalid heatmap shape (", shape.channels, ", ",
                     shape.width, ", ", shape.height, ")"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::Status CodecConfig::Validate() const {
  if (!(sigma > 0.0)) return absl::InvalidArgumentError("sigma must be > 0");
  if (window_radius < 1) {
    return absl::InvalidArgumentError("window_radius must be >= 1");
  }
  if (!(temperature > 0.0)) {
    return absl::InvalidArgumentError("temperature must be > 0");
  }
  return absl::OkStatus();
}

bool InteractionMap::IsActive(int channel) const {
  return std::binary_search(active_channels.begin(), active_channels.end(),
                            channel);
}

void RenderGaussian(const Point& center, double sigma, int width, int height,
                    std::span<double> plane) {
  // The 2D Gaussian factors into a row term times a column term.
  const double denom = 2.0 * sigma * sigma;
  std::vector<double> gx(static_cast<size_t>(width));
  std::vector<double> gy(static_cast<size_t>(height));
  for (int i = 0; i < width; ++i) {
    gx[i] = std::exp(-(i - center.x) * (i - center.x) / denom);
  }
  for (int j = 0; j < height; ++j) {
    gy[j] = std::exp(-(j - center.y) * (j - center.y) / denom);
  }
  for (int j = 0; j < height; ++j) {
    double* row = plane.data() + static_cast<size_t>(j) * width;
    for (int i = 0; i < width; ++i) row[i] = gy[j] * gx[i];
  }
}

absl::StatusOr<Heatmap> EncodeKeypoints(const KeypointSet& kps,
                                        const CodecConfig& config,
                                        const HeatmapShape& shape) {
  if (auto s = config.Validate(); !s.ok()) return s;
  if (auto s = ValidateShape(shape); !s.ok()) return s;
  if (kps.size() != shape.channels ||
      kps.visible.size() != kps.coords.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("keypoint count ", kps.size(), " does not match K=",
                     shape.channels));
  }
  Heatmap hm(shape.channels, shape.width, shape.height);
  for (int n = 0; n < kps.size(); ++n) {
    if (!kps.is_visible(n)) continue;
    const Point& p = kps.coords[n];
    if (!InsideImage(p, shape.width, shape.height)) {
      return absl::OutOfRangeError(absl::StrCat("keypoint ", n, " at (", p.x,
                                                ", ", p.y,
                                                ") is outside the image"));
    }
    RenderGaussian(p, config.sigma, shape.width, shape.height, hm.channel(n));
  }
  return hm;
}

absl::StatusOr<InteractionMap> EncodeInteraction(std::span<const Click> clicks,
                                                 const CodecConfig& config,
                                                 const HeatmapShape& shape) {
  if (auto s = config.Validate(); !s.ok()) return s;
  if (auto s = ValidateShape(shape); !s.ok()) return s;
  InteractionMap map{Heatmap(shape.channels, shape.width, shape.height), {}};
  for (const Click& click : clicks) {
    if (click.index < 0 || click.index >= shape.channels) {
      return absl::OutOfRangeError(
          absl::StrCat("click index ", click.index, " outside [0, ",
                       shape.channels, ")"));
    }
    if (!InsideImage(click.position, shape.width, shape.height)) {
      return absl::OutOfRangeError(absl::StrCat(
          "click for keypoint ", click.index, " is outside the image"));
    }
    map.active_channels.push_back(click.index);
  }
  std::sort(map.active_channels.begin(), map.active_channels.end());
  if (std::adjacent_find(map.active_channels.begin(),
                         map.active_channels.end()) !=
      map.active_channels.end()) {
    return absl::InvalidArgumentError("duplicate click index");
  }
  for (const Click& click : clicks) {
    RenderGaussian(click.position, config.sigma, shape.width, shape.height,
                   map.values.channel(click.index));
  }
  return map;
}

template <typename T>
SoftArgmaxWindow LocalSoftArgmax(std::span<const T> plane, int width,
                                 int height, const CodecConfig& config) {
  SoftArgmaxWindow win;
  size_t best = 0;
  T lowest = plane[0];
  for (size_t i = 1; i < plane.size(); ++i) {
    if (plane[i] > plane[best]) best = i;
    lowest = std::min(lowest, plane[i]);
  }
  const T peak = plane[best];
  win.flat = !(peak > lowest);
  const int cx = static_cast<int>(best % static_cast<size_t>(width));
  const int cy = static_cast<int>(best / static_cast<size_t>(width));
  const int r = config.window_radius;
  win.x0 = std::max(0, cx - r);
  win.x1 = std::min(width - 1, cx + r);
  win.y0 = std::max(0, cy - r);
  win.y1 = std::min(height - 1, cy + r);
  const int ww = win.x1 - win.x0 + 1;
  win.weights.resize(static_cast<size_t>(ww) * (win.y1 - win.y0 + 1));
  double z = 0.0;
  size_t k = 0;
  for (int y = win.y0; y <= win.y1; ++y) {
    for (int x = win.x0; x <= win.x1; ++x, ++k) {
      const double v = plane[static_cast<size_t>(y) * width + x];
      win.weights[k] = std::exp((v - static_cast<double>(peak)) / config.temperature);
      z += win.weights[k];
    }
  }
  double sx = 0.0, sy = 0.0;
  k = 0;
  for (int y = win.y0; y <= win.y1; ++y) {
    for (int x = win.x0; x <= win.x1; ++x, ++k) {
      win.weights[k] /= z;
      sx += win.weights[k] * x;
      sy += win.weights[k] * y;
    }
  }
  win.location = {sx, sy};
  return win;
}

template <typename T>
void AccumulateSoftArgmaxGradient(const SoftArgmaxWindow& window, int width,
                                  double temperature, double grad_x,
                                  double grad_y, std::span<T> grad_plane) {
  // d(sum_k w_k x_k)/d(v_i) = w_i (x_i - x_bar) / T.
  size_t k = 0;
  for (int y = window.y0; y <= window.y1; ++y) {
    for (int x = window.x0; x <= window.x1; ++x, ++k) {
      const double w = window.weights[k] / temperature;
      const double g = grad_x * w * (x - window.location.x) +
                       grad_y * w * (y - window.location.y);
      grad_plane[static_cast<size_t>(y) * width + x] += static_cast<T>(g);
    }
  }
}

template SoftArgmaxWindow LocalSoftArgmax<double>(std::span<const double>, int,
                                                  int, const CodecConfig&);
template SoftArgmaxWindow LocalSoftArgmax<float>(std::span<const float>, int,
                                                 int, const CodecConfig&);
template void AccumulateSoftArgmaxGradient<double>(const SoftArgmaxWindow&, int,
                                                   double, double, double,
                                                   std::span<double>);
template void AccumulateSoftArgmaxGradient<float>(const SoftArgmaxWindow&, int,
                                                  double, double, double,
                                                  std::span<float>);

DecodeResult DecodeLocalSoftArgmax(const Heatmap& heatmap,
                                   const CodecConfig& config) {
  DecodeResult result;
  result.keypoints.coords.resize(static_cast<size_t>(heatmap.channels()));
  result.keypoints.visible.assign(static_cast<size_t>(heatmap.channels()), 1);
  result.low_confidence.assign(static_cast<size_t>(heatmap.channels()), 0);
  for (int c = 0; c < heatmap.channels(); ++c) {
    const SoftArgmaxWindow win = LocalSoftArgmax<double>(
        heatmap.channel(c), heatmap.width(), heatmap.height(), config);
    result.keypoints.coords[c] = win.location;
    result.low_confidence[c] = win.flat ? 1 : 0;
  }
  return result;
}

absl::StatusOr<double> HeatmapBce(const Heatmap& pred, const Heatmap& target,
                                  double eps) {
  if (pred.channels() != target.channels() || pred.width() != target.width() ||
      pred.height() != target.height()) {
    return absl::InvalidArgumentError("heatmap shapes differ");
  }
  const auto p = pred.values();
  const auto t = target.values();
  if (p.empty()) return absl::InvalidArgumentError("empty heatmap");
  double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (std::isnan(p[i]) || std::isnan(t[i])) {
      return absl::InvalidArgumentError("NaN in heatmap");
    }
    const double q = std::clamp(p[i], eps, 1.0 - eps);
    sum -= t[i] * std::log(q) + (1.0 - t[i]) * std::log(1.0 - q);
  }
  return sum / static_cast<double>(p.size());
}

}  // namespace ikp
