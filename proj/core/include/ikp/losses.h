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

// Training objective: heatmap BCE plus the morphology-aware loss evaluated on
// soft-argmax-decoded coordinates, with gradients flowing through decoding.

#ifndef IKP_LOSSES_H_
#define IKP_LOSSES_H_

#include <span>

#include "ikp/keypoint_codec.h"
#include "ikp/morphology.h"
#include "ikp/nn/autograd.h"

namespace ikp {

// (N, K, H, W) heatmaps -> (N, K, 2) coordinates (x, y).
nn::Var DecodeKeypointsOp(const nn::Var& heatmaps, const CodecConfig& codec);

std::vector<KeypointSet> CoordsToKeypoints(const nn::Tensor& coords);

// Batch mean of MorphologyLoss over (N, K, 2) predicted coordinates.
nn::Var MorphologyLossOp(const nn::Var& coords, std::span<const KeypointSet> gt,
                         const RelationSets& relations, double lambda_m,
                         double norm);

struct LossBreakdown {
  double total = 0.0;
  double heatmap = 0.0;     // L_g
  double morphology = 0.0;  // L_m
};

// L = L_g(pred, target) + lambda_total * L_m(decode(pred), gt).
// With lambda_total == 0 the morphology branch is not evaluated.
nn::Var TotalLoss(const nn::Var& pred, const nn::Tensor& target,
                  std::span<const KeypointSet> gt, const RelationSets& relations,
                  const CodecConfig& codec, double lambda_m, double lambda_total,
                  double norm, LossBreakdown* breakdown = nullptr);

inline constexpr float kBceEpsilon = 1e-6f;

}  // namespace ikp

#endif  // IKP_LOSSES_H_
