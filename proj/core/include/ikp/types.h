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

#ifndef IKP_TYPES_H_
#define IKP_TYPES_H_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ikp {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double Distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Ordered annotation of K keypoints in pixel coordinates (origin top-left,
// x rightward, y downward). Invisible keypoints carry placeholder coordinates
// and are excluded from targets, losses and metrics.
struct KeypointSet {
  std::vector<Point> coords;
  std::vector<uint8_t> visible;

  KeypointSet() = default;
  explicit KeypointSet(std::vector<Point> points)
      : coords(std::move(points)), visible(coords.size(), 1) {}

  int size() const { return static_cast<int>(coords.size()); }
  bool is_visible(int i) const { return visible[static_cast<size_t>(i)] != 0; }
  int NumVisible() const;

  friend bool operator==(const KeypointSet&, const KeypointSet&) = default;
};

// Clamps visible coordinates into [0, width - 1] x [0, height - 1].
void ClampToImage(KeypointSet& kps, int width, int height);

// Single- or multi-channel float image, channel-major, values in [0, 1].
struct Image {
  int channels = 1;
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int c, int w, int h) : channels(c), width(w), height(h),
      pixels(static_cast<size_t>(c) * w * h, 0.0f) {}

  float& at(int c, int x, int y) {
    return pixels[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int x, int y) const {
    return pixels[(static_cast<size_t>(c) * height + y) * width + x];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

// K x H x W grid of values in [0, 1]; channel-major, row-major within a
// channel. Indexed as at(channel, x, y).
class Heatmap {
 public:
  Heatmap() = default;
  Heatmap(int channels, int width, int height)
      : channels_(channels), width_(width), height_(height),
        values_(static_cast<size_t>(channels) * width * height, 0.0) {}

  int channels() const { return channels_; }
  int width() const { return width_; }
  int height() const { return height_; }
  size_t plane_size() const { return static_cast<size_t>(width_) * height_; }

  double& at(int c, int x, int y) {
    return values_[(static_cast<size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int x, int y) const {
    return values_[(static_cast<size_t>(c) * height_ + y) * width_ + x];
  }
  std::span<double> channel(int c) {
    return std::span<double>(values_).subspan(c * plane_size(), plane_size());
  }
  std::span<const double> channel(int c) const {
    return std::span<const double>(values_).subspan(c * plane_size(),
                                                    plane_size());
  }
  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }

  friend bool operator==(const Heatmap&, const Heatmap&) = default;

 private:
  int channels_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

}  // namespace ikp

#endif  // IKP_TYPES_H_
