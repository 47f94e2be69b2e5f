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

// JSON forms of configuration and morphology objects.

#ifndef IKP_SERIALIZATION_H_
#define IKP_SERIALIZATION_H_

#include "absl/status/statusor.h"
#include "ikp/keypoint_codec.h"
#include "ikp/model.h"
#include "ikp/morphology.h"
#include "json.hpp"

namespace ikp {

nlohmann::json ToJson(const CodecConfig& config);
nlohmann::json ToJson(const ModelConfig& config);
nlohmann::json ToJson(const MorphologyConfig& config);
nlohmann::json ToJson(const RelationSets& relations);
nlohmann::json ToJson(const RelationStats& stats);
nlohmann::json ToJson(const Topology& topology);

// Missing fields keep their defaults; the result is validated.
absl::StatusOr<CodecConfig> CodecConfigFromJson(const nlohmann::json& j);
absl::StatusOr<ModelConfig> ModelConfigFromJson(const nlohmann::json& j);
absl::StatusOr<MorphologyConfig> MorphologyConfigFromJson(const nlohmann::json& j);
absl::StatusOr<RelationSets> RelationSetsFromJson(const nlohmann::json& j);
absl::StatusOr<RelationStats> RelationStatsFromJson(const nlohmann::json& j);
absl::StatusOr<Topology> TopologyFromJson(const nlohmann::json& j);

}  // namespace ikp

#endif  // IKP_SERIALIZATION_H_
