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

// Iterative interactive training with simulated clicks.

#ifndef IKP_TRAINER_H_
#define IKP_TRAINER_H_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "ikp/data_io.h"
#include "ikp/interaction_sim.h"
#include "ikp/keypoint_codec.h"
#include "ikp/model.h"
#include "ikp/morphology.h"

namespace ikp {

struct TrainConfig {
  int batch_size = 4;
  double learning_rate = 1e-3;
  int max_epochs = 40;
  // Stop after this many epochs without a validation improvement.
  int patience = 50;
  SimulationOptions simulation;
  // Run a detached hint-free pass first and feed it as the previous
  // prediction. When false the previous-prediction input is always zero.
  bool iterative = true;
  // Random integer translation of each training sample, up to this many
  // pixels per axis; shifts that would push a visible keypoint out of the
  // image are redrawn. 0 disables augmentation.
  int augment_shift_x = 4;
  int augment_shift_y = 12;
  uint64_t seed = 0;

  absl::Status Validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double heatmap_loss = 0.0;
  double morphology_loss = 0.0;
  double val_mre = 0.0;  // automatic prediction, working resolution
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> history;
  int best_epoch = -1;
  double best_val_mre = 0.0;
};

// Trains in place and leaves the best-validation weights in `model`. With an
// empty validation set the last epoch is kept.
absl::StatusOr<TrainResult> TrainModel(
    Model& model, std::span<const Sample> train, std::span<const Sample> val,
    const RelationSets& relations, const CodecConfig& codec, double lambda_m,
    const TrainConfig& config,
    const std::function<void(const EpochLog&)>& on_epoch = {});

// Relation statistics over working-resolution keypoints, normalized by the
// working image diagonal.
absl::StatusOr<RelationStats> RelationStatsFromSamples(std::span<const Sample> samples,
                                                       int triple_window);

// Translates image and keypoints by whole pixels, replicating border pixels.
Sample ShiftSample(const Sample& sample, int dx, int dy);

// Mean working-resolution MRE of the automatic prediction.
absl::StatusOr<double> AutomaticMre(const Model& model, const CodecConfig& codec,
                                    std::span<const Sample> samples);

}  // namespace ikp

#endif  // IKP_TRAINER_H_
