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

// Interactive keypoint network.
//
//   image, interaction U, previous prediction
//        |  hint fusion (concat + conv block, stride 2)
//        v
//   backbone --> F_c (stride 4), F_h (stride 16)
//   gate:   [avgpool(U) -> 1x1 conv ; F_h] -> 1x1 conv -> global pool
//           -> FC -> ReLU -> FC -> sigmoid = A
//   head:   (A * F_c) -> 3x3 -> 3x3 -> 1x1 (K) -> sigmoid -> bilinear x4

#ifndef IKP_MODEL_H_
#define IKP_MODEL_H_

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "ikp/keypoint_codec.h"
#include "ikp/nn/autograd.h"
#include "ikp/nn/layers.h"
#include "ikp/types.h"

namespace ikp {

enum class GatePooling { kMax, kAverage };
enum class GateActivation { kSigmoid, kSoftmax };

struct ModelConfig {
  int num_keypoints = 20;
  int image_channels = 1;
  int width = 64;
  int height = 128;
  std::string backbone = "encoder_decoder";
  // Channel widths at strides 2, 4, 8 and 16.
  std::vector<int> encoder_channels = {16, 24, 32, 48};
  // k_c: channels of the gated feature map F_c.
  int gated_channels = 32;
  int gate_projection_channels = 16;
  int gate_reduction = 4;
  int head_channels = 32;
  bool gate_enabled = true;
  GatePooling gate_pooling = GatePooling::kMax;
  GateActivation gate_activation = GateActivation::kSigmoid;
  // Weight of the morphology loss relative to the heatmap BCE.
  double lambda_total = 0.01;

  static constexpr int kFeatureStride = 4;
  static constexpr int kContextStride = 16;

  absl::Status Validate() const;
  HeatmapShape heatmap_shape() const { return {num_keypoints, width, height}; }
};

struct BackboneFeatures {
  nn::Var fine;     // F_c at stride 4
  nn::Var context;  // F_h at stride 16
};

// backbone(fused stride-2 features) -> (F_c, F_h).
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual BackboneFeatures Forward(const nn::Var& fused) const = 0;
  virtual int fine_channels() const = 0;
  virtual int context_channels() const = 0;
};

// Small encoder-decoder with skip connections.
class EncoderDecoderBackbone : public Backbone {
 public:
  EncoderDecoderBackbone(nn::ParameterList& params, const ModelConfig& config,
                         std::mt19937_64& rng);
  BackboneFeatures Forward(const nn::Var& fused) const override;
  int fine_channels() const override { return fine_channels_; }
  int context_channels() const override { return context_channels_; }

 private:
  nn::Conv2dLayer down4_a_, down4_b_, down8_a_, down8_b_, down16_a_, down16_b_;
  nn::Conv2dLayer up8_, up4_;
  int fine_channels_ = 0;
  int context_channels_ = 0;
};

absl::StatusOr<std::unique_ptr<Backbone>> MakeBackbone(
    nn::ParameterList& params, const ModelConfig& config, std::mt19937_64& rng);

// Batched NCHW inputs. interaction and previous have K channels.
struct ModelInputs {
  nn::Tensor image;
  nn::Tensor interaction;
  nn::Tensor previous;
  // When non-empty, fed to the gate instead of `interaction`. Used to probe
  // the two paths through which interaction reaches the output.
  nn::Tensor gate_interaction;
};

// Intermediate activations of one forward pass.
struct ForwardTrace {
  nn::Var fused;
  nn::Var fine;
  nn::Var context;
  nn::Var gate;
  nn::Var gated;
  nn::Var logits;
};

class Model {
 public:
  static absl::StatusOr<std::unique_ptr<Model>> Create(const ModelConfig& config,
                                                       uint64_t seed);

  const ModelConfig& config() const { return config_; }
  nn::ParameterList& parameters() { return params_; }
  const nn::ParameterList& parameters() const { return params_; }
  size_t NumParameters() const { return params_.NumScalars(); }

  // Concatenates the inputs channel-wise and applies the fusion block. The
  // result has the shape of the backbone's first-block output.
  nn::Var HintFusion(const nn::Var& image, const nn::Var& interaction,
                     const nn::Var& previous) const;
  // Channel gate A in (0, 1)^{k_c} from the interaction and F_h.
  nn::Var InteractionGate(const nn::Var& interaction,
                          const nn::Var& context) const;
  // Full pipeline; returns (N, K, H, W) probabilities.
  nn::Var Forward(const ModelInputs& inputs, ForwardTrace* trace = nullptr) const;

  // Single-image inference with gradients disabled. Fails on shape errors or
  // non-finite activations.
  absl::StatusOr<Heatmap> Predict(const Image& image,
                                  const InteractionMap& interaction,
                                  const Heatmap& previous) const;

 private:
  Model(const ModelConfig& config, uint64_t seed);

  ModelConfig config_;
  nn::ParameterList params_;
  nn::Conv2dLayer fusion_a_, fusion_b_;
  std::unique_ptr<Backbone> backbone_;
  nn::Conv2dLayer gate_project_, gate_fuse_;
  nn::LinearLayer gate_fc1_, gate_fc2_;
  nn::Conv2dLayer head_a_, head_b_, head_out_;
};

// A * F_c, channel-wise.
nn::Var ApplyGate(const nn::Var& features, const nn::Var& gate);

// Tensor <-> domain conversions for a single batch element.
nn::Tensor ImageToTensor(const Image& image);
nn::Tensor HeatmapToTensor(const Heatmap& heatmap);
Heatmap TensorToHeatmap(const nn::Tensor& batch, int index);
// Copies `heatmap` into batch slot `index` of an (N, K, H, W) tensor.
void CopyIntoBatch(const Heatmap& heatmap, int index, nn::Tensor& batch);
void CopyIntoBatch(const Image& image, int index, nn::Tensor& batch);

}  // namespace ikp

#endif  // IKP_MODEL_H_
