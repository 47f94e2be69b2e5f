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

// Simulated users for training and evaluation, and interactive revision
// sessions over a trained model.

#ifndef IKP_INTERACTION_SIM_H_
#define IKP_INTERACTION_SIM_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "ikp/keypoint_codec.h"
#include "ikp/model.h"
#include "ikp/types.h"

namespace ikp {

// P(n clicks) proportional to decay^n over n in [0, K].
class ClickBudgetDistribution {
 public:
  static absl::StatusOr<ClickBudgetDistribution> Create(int num_keypoints,
                                                        double decay);

  int Sample(std::mt19937_64& rng) const;
  double Probability(int n) const { return pmf_[static_cast<size_t>(n)]; }
  std::span<const double> pmf() const { return pmf_; }
  int num_keypoints() const { return static_cast<int>(pmf_.size()) - 1; }

 private:
  explicit ClickBudgetDistribution(std::vector<double> pmf);
  std::vector<double> pmf_;
  std::vector<double> cdf_;
};

// n distinct indices drawn uniformly without replacement from [0, K),
// returned in draw order.
absl::StatusOr<std::vector<int>> SampleClickedIndices(int n, int num_keypoints,
                                                      std::mt19937_64& rng);

struct SimulationOptions {
  double click_decay = 0.5;
  // Gaussian click noise in pixels; 0 = clicks land exactly on groundtruth.
  double click_noise_std = 0.0;
  // Feed the previous prediction only on clicked channels (as at inference).
  bool selective_previous = true;
};

struct TrainingExample {
  std::vector<Click> clicks;
  InteractionMap interaction;
  Heatmap previous;  // model input; zeros when there is no previous pass
};

// Samples a click budget and clicked keypoints (among visible ones) and
// places the clicks at their groundtruth positions.
TrainingExample MakeTrainingExample(const KeypointSet& gt,
                                    const Heatmap* previous_prediction,
                                    const ClickBudgetDistribution& budget,
                                    const CodecConfig& codec,
                                    const HeatmapShape& shape,
                                    const SimulationOptions& options,
                                    std::mt19937_64& rng);

// Copies the channels of `corrections` from `heatmap`; other channels zero.
Heatmap RestrictToChannels(const Heatmap& heatmap,
                           std::span<const Click> corrections);

// Overwrites every corrected keypoint with its click position.
KeypointSet PinUserPoints(const KeypointSet& decoded,
                          std::span<const Click> corrections);

inline constexpr int kMaxSessionSteps = 64;

// One image under interactive revision. Holds a read-only model; the session
// itself is single-owner.
class RevisionSession {
 public:
  // Runs the automatic pass (no interaction, no previous prediction).
  static absl::StatusOr<RevisionSession> Start(const Model& model, Image image,
                                               const CodecConfig& codec);

  // Adds or replaces the correction for click.index and re-predicts. On error
  // the session is unchanged.
  absl::Status Refine(const Click& click);
  // Reverts the latest refinement. Returns false when there is nothing to undo.
  bool Undo();

  const KeypointSet& keypoints() const { return keypoints_; }
  const Heatmap& heatmap() const { return heatmap_; }
  const std::vector<Click>& corrections() const { return corrections_; }
  const std::vector<Click>& click_log() const { return click_log_; }
  const Image& image() const { return image_; }
  int step() const { return static_cast<int>(history_.size()); }
  size_t history_size() const { return history_.size(); }
  // Keypoints after each step, starting with the automatic prediction.
  std::vector<KeypointSet> keypoint_history() const;

 private:
  struct Snapshot {
    Heatmap heatmap;
    KeypointSet keypoints;
    std::vector<Click> corrections;
  };

  RevisionSession(const Model& model, Image image, const CodecConfig& codec)
      : model_(&model), image_(std::move(image)), codec_(codec) {}

  const Model* model_;
  Image image_;
  CodecConfig codec_;
  Heatmap heatmap_;
  KeypointSet keypoints_;
  std::vector<Click> corrections_;
  std::vector<Click> click_log_;
  std::vector<Snapshot> history_;
};

}  // namespace ikp

#endif  // IKP_INTERACTION_SIM_H_
