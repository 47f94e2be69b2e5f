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

#include "ikp/interaction_sim.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "absl/strings/str_cat.h"

namespace ikp {

ClickBudgetDistribution::ClickBudgetDistribution(std::vector<double> pmf)
    : pmf_(std::move(pmf)), cdf_(pmf_.size()) {
  std::partial_sum(pmf_.begin(), pmf_.end(), cdf_.begin());
  cdf_.back() = 1.0;
}

absl::StatusOr<ClickBudgetDistribution> ClickBudgetDistribution::Create(
    int num_keypoints, double decay) {
  if (num_keypoints < 0) return absl::InvalidArgumentError("K must be >= 0");
  if (!(decay > 0.0 && decay < 1.0)) {
    return absl::InvalidArgumentError("decay must lie in (0, 1)");
  }
  std::vector<double> pmf(static_cast<size_t>(num_keypoints) + 1);
  double w = 1.0, z = 0.0;
  for (double& p : pmf) {
    p = w;
    z += w;
    w *= decay;
  }
  for (double& p : pmf) p /= z;
  return ClickBudgetDistribution(std::move(pmf));
}

int ClickBudgetDistribution::Sample(std::mt19937_64& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<int>(std::min<ptrdiff_t>(it - cdf_.begin(),
                                              static_cast<ptrdiff_t>(cdf_.size()) - 1));
}

absl::StatusOr<std::vector<int>> SampleClickedIndices(int n, int num_keypoints,
                                                      std::mt19937_64& rng) {
  if (n < 0 || n > num_keypoints) {
    return absl::InvalidArgumentError(
        absl::StrCat("cannot draw ", n, " distinct indices from K=", num_keypoints));
  }
  std::vector<int> pool(static_cast<size_t>(num_keypoints));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pick(i, num_keypoints - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(static_cast<size_t>(n));
  return pool;
}

Heatmap RestrictToChannels(const Heatmap& heatmap,
                           std::span<const Click> corrections) {
  Heatmap out(heatmap.channels(), heatmap.width(), heatmap.height());
  for (const Click& c : corrections) {
    auto src = heatmap.channel(c.index);
    std::copy(src.begin(), src.end(), out.channel(c.index).begin());
  }
  return out;
}

TrainingExample MakeTrainingExample(const KeypointSet& gt,
                                    const Heatmap* previous_prediction,
                                    const ClickBudgetDistribution& budget,
                                    const CodecConfig& codec,
                                    const HeatmapShape& shape,
                                    const SimulationOptions& options,
                                    std::mt19937_64& rng) {
  std::vector<int> visible;
  for (int i = 0; i < gt.size(); ++i) {
    if (gt.is_visible(i)) visible.push_back(i);
  }
  int n = budget.Sample(rng);
  while (n > static_cast<int>(visible.size())) n = budget.Sample(rng);
  const std::vector<int> picks =
      *SampleClickedIndices(n, static_cast<int>(visible.size()), rng);

  TrainingExample ex;
  std::normal_distribution<double> noise(0.0, options.click_noise_std);
  for (int p : picks) {
    Point pos = gt.coords[visible[p]];
    if (options.click_noise_std > 0.0) {
      pos.x = std::clamp(pos.x + noise(rng), 0.0, shape.width - 1.0);
      pos.y = std::clamp(pos.y + noise(rng), 0.0, shape.height - 1.0);
    }
    ex.clicks.push_back({visible[p], pos});
  }
  ex.interaction = *EncodeInteraction(ex.clicks, codec, shape);
  if (previous_prediction == nullptr) {
    ex.previous = Heatmap(shape.channels, shape.width, shape.height);
  } else if (options.selective_previous) {
    ex.previous = RestrictToChannels(*previous_prediction, ex.clicks);
  } else {
    ex.previous = *previous_prediction;
  }
  return ex;
}

KeypointSet PinUserPoints(const KeypointSet& decoded,
                          std::span<const Click> corrections) {
  KeypointSet out = decoded;
  for (const Click& c : corrections) {
    out.coords[c.index] = c.position;
    out.visible[c.index] = 1;
  }
  return out;
}

absl::StatusOr<RevisionSession> RevisionSession::Start(const Model& model,
                                                       Image image,
                                                       const CodecConfig& codec) {
  if (auto s = codec.Validate(); !s.ok()) return s;
  RevisionSession session(model, std::move(image), codec);
  const HeatmapShape shape = model.config().heatmap_shape();
  const InteractionMap none = *EncodeInteraction({}, codec, shape);
  auto hm = model.Predict(session.image_, none,
                          Heatmap(shape.channels, shape.width, shape.height));
  if (!hm.ok()) return hm.status();
  session.heatmap_ = std::move(*hm);
  session.keypoints_ = DecodeLocalSoftArgmax(session.heatmap_, codec).keypoints;
  return session;
}

absl::Status RevisionSession::Refine(const Click& click) {
  const HeatmapShape shape = model_->config().heatmap_shape();
  if (click.index < 0 || click.index >= shape.channels) {
    return absl::OutOfRangeError(
        absl::StrCat("keypoint index ", click.index, " outside [0, ",
                     shape.channels, ")"));
  }
  if (!(click.position.x >= 0 && click.position.x <= shape.width - 1 &&
        click.position.y >= 0 && click.position.y <= shape.height - 1)) {
    return absl::OutOfRangeError("click position outside the image");
  }
  if (history_.size() >= static_cast<size_t>(kMaxSessionSteps)) {
    return absl::ResourceExhaustedError(
        absl::StrCat("session limited to ", kMaxSessionSteps, " steps"));
  }
  std::vector<Click> next = corrections_;
  auto same = std::find_if(next.begin(), next.end(),
                           [&](const Click& c) { return c.index == click.index; });
  if (same != next.end()) {
    same->position = click.position;
  } else {
    next.push_back(click);
  }
  auto interaction = EncodeInteraction(next, codec_, shape);
  if (!interaction.ok()) return interaction.status();
  auto hm = model_->Predict(image_, *interaction, RestrictToChannels(heatmap_, next));
  if (!hm.ok()) return hm.status();

  history_.push_back({std::move(heatmap_), keypoints_, corrections_});
  heatmap_ = std::move(*hm);
  corrections_ = std::move(next);
  keypoints_ =
      PinUserPoints(DecodeLocalSoftArgmax(heatmap_, codec_).keypoints, corrections_);
  click_log_.push_back(click);
  return absl::OkStatus();
}

std::vector<KeypointSet> RevisionSession::keypoint_history() const {
  std::vector<KeypointSet> out;
  for (const Snapshot& s : history_) out.push_back(s.keypoints);
  out.push_back(keypoints_);
  return out;
}

bool RevisionSession::Undo() {
  if (history_.empty()) return false;
  Snapshot& last = history_.back();
  heatmap_ = std::move(last.heatmap);
  keypoints_ = std::move(last.keypoints);
  corrections_ = std::move(last.corrections);
  history_.pop_back();
  click_log_.pop_back();
  return true;
}

}  // namespace ikp
