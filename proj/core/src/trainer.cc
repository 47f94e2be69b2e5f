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

#include "ikp/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "absl/strings/str_cat.h"
#include "glog/logging.h"
#include "ikp/eval.h"
#include "ikp/losses.h"
#include "ikp/nn/layers.h"

namespace ikp {

absl::Status TrainConfig::Validate() const {
  if (batch_size < 1) return absl::InvalidArgumentError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) {
    return absl::InvalidArgumentError("learning_rate must be > 0");
  }
  if (augment_shift_x < 0 || augment_shift_y < 0) {
    return absl::InvalidArgumentError("augmentation shifts must be >= 0");
  }
  if (max_epochs < 1 || patience < 1) {
    return absl::InvalidArgumentError("max_epochs and patience must be >= 1");
  }
  if (!(simulation.click_decay > 0.0 && simulation.click_decay < 1.0)) {
    return absl::InvalidArgumentError("click_decay must lie in (0, 1)");
  }
  if (simulation.click_noise_std < 0.0) {
    return absl::InvalidArgumentError("click_noise_std must be >= 0");
  }
  return absl::OkStatus();
}

absl::StatusOr<RelationStats> RelationStatsFromSamples(std::span<const Sample> samples,
                                                       int triple_window) {
  std::vector<KeypointSet> keypoints;
  std::vector<double> norms;
  for (const Sample& s : samples) {
    keypoints.push_back(s.keypoints);
    norms.push_back(std::hypot(s.image.width, s.image.height));
  }
  return ComputeRelationStats(keypoints, norms, triple_window);
}

Sample ShiftSample(const Sample& sample, int dx, int dy) {
  Sample out = sample;
  const Image& src = sample.image;
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < src.height; ++y) {
      const int sy = std::clamp(y - dy, 0, src.height - 1);
      for (int x = 0; x < src.width; ++x) {
        out.image.at(c, x, y) = src.at(c, std::clamp(x - dx, 0, src.width - 1), sy);
      }
    }
  }
  for (Point& p : out.keypoints.coords) {
    p.x += dx;
    p.y += dy;
  }
  return out;
}

namespace {

bool VisibleInside(const KeypointSet& k, int width, int height) {
  for (int i = 0; i < k.size(); ++i) {
    const Point& p = k.coords[i];
    if (k.is_visible(i) && (p.x < 0 || p.y < 0 || p.x > width - 1 || p.y > height - 1)) {
      return false;
    }
  }
  return true;
}

Sample Augment(const Sample& s, const TrainConfig& config, std::mt19937_64& rng) {
  if (config.augment_shift_x == 0 && config.augment_shift_y == 0) return s;
  std::uniform_int_distribution<int> ux(-config.augment_shift_x, config.augment_shift_x);
  std::uniform_int_distribution<int> uy(-config.augment_shift_y, config.augment_shift_y);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const int dx = ux(rng), dy = uy(rng);
    Sample shifted = ShiftSample(s, dx, dy);
    if (VisibleInside(shifted.keypoints, s.image.width, s.image.height)) return shifted;
  }
  return s;
}

}  // namespace

absl::StatusOr<double> AutomaticMre(const Model& model, const CodecConfig& codec,
                                    std::span<const Sample> samples) {
  if (samples.empty()) return absl::InvalidArgumentError("no samples");
  const HeatmapShape shape = model.config().heatmap_shape();
  const InteractionMap none = *EncodeInteraction({}, codec, shape);
  const Heatmap zeros(shape.channels, shape.width, shape.height);
  double sum = 0.0;
  for (const Sample& s : samples) {
    auto hm = model.Predict(s.image, none, zeros);
    if (!hm.ok()) return hm.status();
    auto mre = MeanRadialError(DecodeLocalSoftArgmax(*hm, codec).keypoints, s.keypoints);
    if (!mre.ok()) return mre.status();
    sum += *mre;
  }
  return sum / samples.size();
}

absl::StatusOr<TrainResult> TrainModel(
    Model& model, std::span<const Sample> train, std::span<const Sample> val,
    const RelationSets& relations, const CodecConfig& codec, double lambda_m,
    const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
  if (auto s = config.Validate(); !s.ok()) return s;
  if (auto s = codec.Validate(); !s.ok()) return s;
  if (train.empty()) return absl::InvalidArgumentError("empty training set");
  const ModelConfig& mc = model.config();
  const HeatmapShape shape = mc.heatmap_shape();
  for (const Sample& s : train) {
    if (s.image.width != mc.width || s.image.height != mc.height ||
        s.image.channels != mc.image_channels || s.keypoints.size() != mc.num_keypoints) {
      return absl::InvalidArgumentError(
          absl::StrCat("sample ", s.id, " does not match the model input shape"));
    }
  }
  auto budget = ClickBudgetDistribution::Create(mc.num_keypoints,
                                                config.simulation.click_decay);
  if (!budget.ok()) return budget.status();

  std::mt19937_64 rng(config.seed);
  nn::Adam adam(model.parameters(), {.learning_rate = config.learning_rate});
  const double norm = std::hypot(mc.width, mc.height);
  const int K = mc.num_keypoints;

  TrainResult result;
  std::vector<nn::Tensor> best;
  int since_best = 0;
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    int batches = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      const int n = static_cast<int>(
          std::min<size_t>(config.batch_size, order.size() - b0));
      ModelInputs in{nn::Tensor({n, mc.image_channels, mc.height, mc.width}),
                     nn::Tensor({n, K, mc.height, mc.width}),
                     nn::Tensor({n, K, mc.height, mc.width}),
                     {}};
      nn::Tensor target({n, K, mc.height, mc.width});
      std::vector<KeypointSet> gt;
      for (int i = 0; i < n; ++i) {
        const Sample s = Augment(train[order[b0 + i]], config, rng);
        CopyIntoBatch(s.image, i, in.image);
        auto hm = EncodeKeypoints(s.keypoints, codec, shape);
        if (!hm.ok()) return hm.status();
        CopyIntoBatch(*hm, i, target);
        gt.push_back(s.keypoints);
      }

      nn::Tensor first;
      if (config.iterative) {
        nn::NoGradGuard no_grad;
        first = model.Forward(in).value();
      }
      for (int i = 0; i < n; ++i) {
        Heatmap prev;
        if (config.iterative) prev = TensorToHeatmap(first, i);
        const TrainingExample ex =
            MakeTrainingExample(gt[i], config.iterative ? &prev : nullptr, *budget,
                                codec, shape, config.simulation, rng);
        CopyIntoBatch(ex.interaction.values, i, in.interaction);
        CopyIntoBatch(ex.previous, i, in.previous);
      }

      model.parameters().ZeroGrad();
      const nn::Var pred = model.Forward(in);
      LossBreakdown parts;
      nn::Var loss = TotalLoss(pred, target, gt, relations, codec, lambda_m,
                               mc.lambda_total, norm, &parts);
      if (!std::isfinite(parts.total)) {
        return absl::InternalError(
            absl::StrCat("non-finite loss at epoch ", epoch, " batch ", batches));
      }
      loss.Backward();
      adam.Step();
      log.loss += parts.total;
      log.heatmap_loss += parts.heatmap;
      log.morphology_loss += parts.morphology;
      ++batches;
    }
    log.loss /= batches;
    log.heatmap_loss /= batches;
    log.morphology_loss /= batches;

    if (!val.empty()) {
      auto mre = AutomaticMre(model, codec, val);
      if (!mre.ok()) return mre.status();
      log.val_mre = *mre;
    }
    log.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);

    if (val.empty() || result.best_epoch < 0 || log.val_mre < result.best_val_mre) {
      result.best_epoch = epoch;
      result.best_val_mre = log.val_mre;
      since_best = 0;
      best.clear();
      for (const auto& p : model.parameters().items()) best.push_back(p.var.value());
    } else if (++since_best >= config.patience) {
      LOG(INFO) << "early stop at epoch " << epoch << ", best " << result.best_epoch;
      break;
    }
  }
  auto& items = model.parameters().items();
  for (size_t i = 0; i < best.size(); ++i) items[i].var.mutable_value() = best[i];
  return result;
}

}  // namespace ikp
