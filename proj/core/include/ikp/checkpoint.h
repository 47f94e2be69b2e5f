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

// Versioned model checkpoints.
//
// Layout: the 8-byte magic "IKPCKPT\0", a little-endian u32 format version, a
// u64 metadata length, UTF-8 JSON metadata, then the float32 parameter data in
// the order listed by the metadata.

#ifndef IKP_CHECKPOINT_H_
#define IKP_CHECKPOINT_H_

#include <filesystem>
#include <memory>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "ikp/keypoint_codec.h"
#include "ikp/model.h"
#include "ikp/morphology.h"
#include "json.hpp"

namespace ikp {

inline constexpr uint32_t kCheckpointVersion = 1;

// Everything besides the weights that inference and evaluation need.
struct CheckpointInfo {
  CodecConfig codec;
  MorphologyConfig morphology;
  RelationSets relations;
  // Free-form: dataset name, training config, epoch, validation MRE, ...
  nlohmann::json extra = nlohmann::json::object();
};

absl::Status SaveCheckpoint(const std::filesystem::path& path, const Model& model,
                            const CheckpointInfo& info);

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  CheckpointInfo info;
};

// Fails on a foreign file, an unknown version, or any parameter name or shape
// mismatch between the metadata and the rebuilt model.
absl::StatusOr<LoadedCheckpoint> LoadCheckpoint(const std::filesystem::path& path);

}  // namespace ikp

#endif  // IKP_CHECKPOINT_H_
