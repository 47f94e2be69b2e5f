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

#ifndef IKP_DATA_IO_H_
#define IKP_DATA_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "ikp/morphology.h"
#include "ikp/types.h"

namespace ikp {

inline constexpr int kManifestSchemaVersion = 1;

enum class Split { kTrain, kVal, kTest };

absl::StatusOr<Split> ParseSplit(std::string_view name);
std::string SplitName(Split split);

struct ManifestRecord {
  // Image path relative to the manifest directory (or absolute).
  std::string image;
  // Coordinates at native image resolution.
  KeypointSet keypoints;
  std::string subject;
  Split split = Split::kTrain;
  int width = 0;  // native size
  int height = 0;
};

// Line-delimited JSON: one header object followed by one object per record.
//
//   {"type":"header","schema_version":1,"name":...,"num_keypoints":K,
//    "keypoint_names":[...],"image_size":[W,H],"topology":[[i,...],...]}
//   {"type":"record","image":"images/0000.png","size":[W,H],
//    "keypoints":[[x,y],...],"visible":[1,...],"subject":"s0000",
//    "split":"train"}
//
// image_size is the working resolution samples are resized to at load.
struct DatasetManifest {
  std::string name;
  int num_keypoints = 0;
  std::vector<std::string> keypoint_names;
  int target_width = 0;
  int target_height = 0;
  Topology topology;
  std::vector<ManifestRecord> records;
  // Directory relative image paths are resolved against.
  std::filesystem::path base_dir;

  std::vector<const ManifestRecord*> RecordsInSplit(Split split) const;
};

// Checks K consistency, finite coordinates, subject/split disjointness and
// topology indices. With check_files, also that every image exists.
absl::Status ValidateManifest(const DatasetManifest& manifest, bool check_files);

absl::StatusOr<DatasetManifest> LoadManifest(const std::filesystem::path& path);
absl::Status WriteManifest(const DatasetManifest& manifest,
                           const std::filesystem::path& path);

// Assigns every subject wholly to one split with approximately the given
// train/val fractions (remainder is test). Deterministic per seed.
void AssignSubjectSplits(std::vector<ManifestRecord>& records,
                         double train_fraction, double val_fraction,
                         uint64_t seed);

// 8-bit grayscale PNG. Color PNGs are converted to luminance on read.
absl::StatusOr<Image> ReadPng(const std::filesystem::path& path);
absl::Status WritePng(const Image& image, const std::filesystem::path& path);
absl::StatusOr<Image> DecodePng(const std::string& bytes);
absl::StatusOr<std::string> EncodePng(const Image& image);
// Width and height from the PNG header without decoding pixels.
absl::StatusOr<std::pair<int, int>> PngSize(const std::filesystem::path& path);

KeypointSet ScaleKeypoints(const KeypointSet& kps, double sx, double sy);

// Bilinear image resampling (half-pixel centers).
absl::StatusOr<Image> ResizeImage(const Image& image, int width, int height);

struct ResizedSample {
  Image image;
  KeypointSet keypoints;
};

// Resamples the image to (width, height) and scales coordinates by
// (width / src_width, height / src_height).
absl::StatusOr<ResizedSample> ResizeSample(const Image& image,
                                           const KeypointSet& kps, int width,
                                           int height);

// A record loaded and resized to the manifest's working resolution.
struct Sample {
  std::string id;
  Image image;
  KeypointSet keypoints;  // working resolution
  int native_width = 0;
  int native_height = 0;
  KeypointSet native_keypoints;  // as annotated, for native-scale metrics
};

absl::StatusOr<Sample> LoadSample(const DatasetManifest& manifest,
                                  const ManifestRecord& record);
absl::StatusOr<std::vector<Sample>> LoadSplit(const DatasetManifest& manifest,
                                              Split split);

// Converts AASCE-style landmark CSVs: `filenames_csv` lists one image name per
// line, `landmarks_csv` holds one row per image with 68 x values followed by
// 68 y values, each normalized to [0, 1] of the image size. Images must be
// PNG under `image_dir`. Each image is its own subject.
struct AasceConvertOptions {
  std::filesystem::path image_dir;
  std::filesystem::path filenames_csv;
  std::filesystem::path landmarks_csv;
  std::string split = "auto";  // train|val|test|auto
  uint64_t seed = 0;
  int target_width = 256;
  int target_height = 512;
};

absl::StatusOr<DatasetManifest> ConvertAasce(const AasceConvertOptions& options);

// Corners per vertebra in AASCE order (TL, TR, BL, BR) as closed polygons.
Topology AasceTopology(int num_vertebrae);

}  // namespace ikp

#endif  // IKP_DATA_IO_H_
