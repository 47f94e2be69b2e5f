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

// Procedural spine-like images for desk-scale end-to-end runs: a vertical
// chain of similar polygonal vertebrae under smooth correlated pose changes.

#ifndef IKP_SYNTHETIC_SPINE_H_
#define IKP_SYNTHETIC_SPINE_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "ikp/data_io.h"
#include "ikp/types.h"

namespace ikp {

struct SyntheticSpineConfig {
  int num_vertebrae = 5;
  // 4 gives quadrilaterals (TL, TR, BR, BL); 5 adds a bottom-center point.
  int corners_per_vertebra = 4;
  int width = 64;
  int height = 128;
  int num_samples = 200;
  // Fraction of the image height spanned by the chain.
  double chain_extent = 0.6;
  // Vertebra width relative to its height.
  double aspect = 1.35;
  // Gap between vertebrae relative to vertebra height.
  double gap = 0.3;
  // Global pose: translation std (pixels), rotation std (radians), scale std.
  double translation_std = 3.0;
  double rotation_std = 0.04;
  double scale_std = 0.025;
  // Per-vertebra size and tilt std (relative / radians).
  double shape_std = 0.02;
  double tilt_std = 0.015;
  // Lateral bend amplitude std in pixels; the bend is a smooth curve along
  // the chain so neighboring vertebrae move together.
  double bend_std = 5.0;
  // Rendering.
  double body_intensity = 0.7;
  double background_intensity = 0.25;
  double noise_std = 0.12;
  // Relative std of the top/bottom width difference of each vertebra.
  double wedge_std = 0.04;
  // Independent per-corner displacement in pixels.
  double corner_jitter = 0.4;
  // Unannotated vertebrae rendered beyond each end of the chain, and the std
  // of a vertical shift of the whole chain in pixels. Together they make the
  // level of the first annotated vertebra ambiguous from appearance alone.
  int context_vertebrae = 3;
  double chain_shift_std = 10.0;
  // Probability that one vertebra is rendered at low contrast.
  double faint_probability = 0.4;
  double margin = 3.0;
  uint64_t seed = 0;
  double train_fraction = 0.7;
  double val_fraction = 0.05;

  int num_keypoints() const { return num_vertebrae * corners_per_vertebra; }
  absl::Status Validate() const;
};

struct SyntheticSample {
  Image image;
  KeypointSet keypoints;
};

// Renders sample `index`; deterministic in (config, index).
absl::StatusOr<SyntheticSample> RenderSyntheticSpine(
    const SyntheticSpineConfig& config, int index);

// Polygon topology of the generated keypoints.
Topology SyntheticTopology(const SyntheticSpineConfig& config);

struct SyntheticDataset {
  DatasetManifest manifest;
  std::vector<SyntheticSample> samples;  // parallel to manifest.records
};

// Generates every sample in memory. Records reference images/NNNN.png.
absl::StatusOr<SyntheticDataset> GenerateSyntheticSpine(
    const SyntheticSpineConfig& config);

// In-memory samples of one split (native size equals working size).
std::vector<Sample> SamplesInSplit(const SyntheticDataset& dataset, Split split);

// Generates and writes manifest.jsonl plus images/ under `dir`.
absl::StatusOr<DatasetManifest> WriteSyntheticSpine(
    const SyntheticSpineConfig& config, const std::filesystem::path& dir);

}  // namespace ikp

#endif  // IKP_SYNTHETIC_SPINE_H_
