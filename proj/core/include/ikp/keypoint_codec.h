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

// Conversions between coordinate keypoints and K-channel heatmaps:
// Gaussian target encoding, user-interaction encoding and a differentiable
// local soft-argmax decoder.

#ifndef IKP_KEYPOINT_CODEC_H_
#define IKP_KEYPOINT_CODEC_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "ikp/types.h"

namespace ikp {

struct CodecConfig {
  // Gaussian standard deviation in pixels at working resolution.
  double sigma = 2.0;
  // Half-width of the soft-argmax window around the hard argmax.
  int window_radius = 5;
  // Softmax sharpness; weights are exp(value / temperature).
  double temperature = 0.1;

  absl::Status Validate() const;
};

struct HeatmapShape {
  int channels = 0;
  int width = 0;
  int height = 0;
};

// A user correction: keypoint `index` (0-based) belongs at `position`.
struct Click {
  int index = 0;
  Point position;

  friend bool operator==(const Click&, const Click&) = default;
};

struct InteractionMap {
  Heatmap values;
  // Sorted, distinct indices of the channels carrying a Gaussian bump.
  std::vector<int> active_channels;

  bool IsActive(int channel) const;
};

// exp(-((x - cx)^2 + (y - cy)^2) / (2 sigma^2)) over the whole pixel grid.
void RenderGaussian(const Point& center, double sigma, int width, int height,
                    std::span<double> plane);

// Gaussian target heatmap; invisible keypoints give all-zero channels.
// Fails if kps.size() != shape.channels or a visible point is outside the
// image.
absl::StatusOr<Heatmap> EncodeKeypoints(const KeypointSet& kps,
                                        const CodecConfig& config,
                                        const HeatmapShape& shape);

// Channel n is a Gaussian bump at the clicked position when n was clicked and
// all-zero otherwise. Duplicate or out-of-range indices are rejected.
absl::StatusOr<InteractionMap> EncodeInteraction(std::span<const Click> clicks,
                                                 const CodecConfig& config,
                                                 const HeatmapShape& shape);

// Per-channel soft-argmax result with the data needed for its gradient.
struct SoftArgmaxWindow {
  Point location;
  int x0 = 0;  // inclusive window bounds, clipped to the image
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  std::vector<double> weights;  // row-major over the window, sum to 1
  bool flat = false;            // channel carries no localization signal
};

// Finds the first hard-argmax pixel (row-major scan), then returns the
// centroid of the clipped (2r+1)^2 window weighted by softmax(value / T).
template <typename T>
SoftArgmaxWindow LocalSoftArgmax(std::span<const T> plane, int width,
                                 int height, const CodecConfig& config);

// Adds d(loss)/d(plane) given d(loss)/d(x), d(loss)/d(y) of the decoded
// location. The argmax position is treated as locally constant.
template <typename T>
void AccumulateSoftArgmaxGradient(const SoftArgmaxWindow& window, int width,
                                  double temperature, double grad_x,
                                  double grad_y, std::span<T> grad_plane);

struct DecodeResult {
  KeypointSet keypoints;
  // 1 where the channel was flat (e.g. all-zero) and the location is the
  // window centroid rather than a detected peak.
  std::vector<uint8_t> low_confidence;
};

DecodeResult DecodeLocalSoftArgmax(const Heatmap& heatmap,
                                   const CodecConfig& config);

// Mean element-wise binary cross-entropy with pred clamped to
// [eps, 1 - eps]. Fails on shape mismatch or NaN inputs.
absl::StatusOr<double> HeatmapBce(const Heatmap& pred, const Heatmap& target,
                                  double eps = 1e-7);

}  // namespace ikp

#endif  // IKP_KEYPOINT_CODEC_H_
