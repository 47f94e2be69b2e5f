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

#include "ikp/model.h"

#include <algorithm>
#include <array>

#include <glog/logging.h>

#include "absl/strings/str_cat.h"

namespace ikp {
namespace {

using nn::Var;

Var ConvRelu(const nn::Conv2dLayer& layer, const Var& x) {
  return nn::Relu(layer(x));
}

Var Concat(std::initializer_list<Var> parts) {
  std::vector<Var> v(parts);
  return nn::ConcatChannels(v);
}

absl::Status CheckBatchShape(const nn::Tensor& t, int batch, int channels,
                             int height, int width, const char* what) {
  if (t.rank() != 4 || t.dim(0) != batch || t.dim(1) != channels ||
      t.dim(2) != height || t.dim(3) != width) {
    return absl::InvalidArgumentError(absl::StrCat(
        what, " has shape ", t.ShapeString(), ", expected (", batch, ", ",
        channels, ", ", height, ", ", width, ")"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::Status ModelConfig::Validate() const {
  if (num_keypoints < 1) return absl::InvalidArgumentError("K must be >= 1");
  if (image_channels < 1) {
    return absl::InvalidArgumentError("image_channels must be >= 1");
  }
  if (width % kContextStride != 0 || height % kContextStride != 0 ||
      width <= 0 || height <= 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "input size ", width, "x", height, " must be a positive multiple of ",
        kContextStride));
  }
  if (encoder_channels.size() != 4 ||
      std::any_of(encoder_channels.begin(), encoder_channels.end(),
                  [](int c) { return c < 1; })) {
    return absl::InvalidArgumentError("encoder_channels needs 4 widths >= 1");
  }
  if (gated_channels < 1 || gate_projection_channels < 1 || head_channels < 1) {
    return absl::InvalidArgumentError("channel counts must be >= 1");
  }
  if (gate_reduction < 1 || gated_channels / gate_reduction < 1) {
    return absl::InvalidArgumentError("gate_reduction too large for k_c");
  }
  if (lambda_total < 0.0) {
    return absl::InvalidArgumentError("lambda_total must be >= 0");
  }
  return absl::OkStatus();
}

EncoderDecoderBackbone::EncoderDecoderBackbone(nn::ParameterList& params,
                                               const ModelConfig& config,
                                               std::mt19937_64& rng) {
  const auto& ch = config.encoder_channels;
  down4_a_ = nn::Conv2dLayer(params, "backbone.down4.a", ch[0], ch[1], 3, 2, rng);
  down4_b_ = nn::Conv2dLayer(params, "backbone.down4.b", ch[1], ch[1], 3, 1, rng);
  down8_a_ = nn::Conv2dLayer(params, "backbone.down8.a", ch[1], ch[2], 3, 2, rng);
  down8_b_ = nn::Conv2dLayer(params, "backbone.down8.b", ch[2], ch[2], 3, 1, rng);
  down16_a_ = nn::Conv2dLayer(params, "backbone.down16.a", ch[2], ch[3], 3, 2, rng);
  down16_b_ = nn::Conv2dLayer(params, "backbone.down16.b", ch[3], ch[3], 3, 1, rng);
  up8_ = nn::Conv2dLayer(params, "backbone.up8", ch[3] + ch[2], ch[2], 3, 1, rng);
  up4_ = nn::Conv2dLayer(params, "backbone.up4", ch[2] + ch[1],
                         config.gated_channels, 3, 1, rng);
  fine_channels_ = config.gated_channels;
  context_channels_ = ch[3];
}

BackboneFeatures EncoderDecoderBackbone::Forward(const Var& fused) const {
  const Var s4 = ConvRelu(down4_b_, ConvRelu(down4_a_, fused));
  const Var s8 = ConvRelu(down8_b_, ConvRelu(down8_a_, s4));
  const Var s16 = ConvRelu(down16_b_, ConvRelu(down16_a_, s8));
  const Var u8 = nn::UpsampleBilinear(s16, s8.shape()[2], s8.shape()[3]);
  const Var d8 = ConvRelu(up8_, Concat({u8, s8}));
  const Var u4 = nn::UpsampleBilinear(d8, s4.shape()[2], s4.shape()[3]);
  const Var d4 = ConvRelu(up4_, Concat({u4, s4}));
  return {d4, s16};
}

absl::StatusOr<std::unique_ptr<Backbone>> MakeBackbone(
    nn::ParameterList& params, const ModelConfig& config,
    std::mt19937_64& rng) {
  if (config.backbone == "encoder_decoder") {
    return std::make_unique<EncoderDecoderBackbone>(params, config, rng);
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown backbone '", config.backbone, "'"));
}

absl::StatusOr<std::unique_ptr<Model>> Model::Create(const ModelConfig& config,
                                                     uint64_t seed) {
  if (auto s = config.Validate(); !s.ok()) return s;
  if (config.backbone != "encoder_decoder") {
    return absl::InvalidArgumentError(
        absl::StrCat("unknown backbone '", config.backbone, "'"));
  }
  return std::unique_ptr<Model>(new Model(config, seed));
}

Model::Model(const ModelConfig& config, uint64_t seed) : config_(config) {
  std::mt19937_64 rng(seed);
  const int k = config.num_keypoints;
  const int c0 = config.encoder_channels[0];
  fusion_a_ = nn::Conv2dLayer(params_, "fusion.a",
                              config.image_channels + 2 * k, c0, 3, 2, rng);
  fusion_b_ = nn::Conv2dLayer(params_, "fusion.b", c0, c0, 3, 1, rng);
  backbone_ = *MakeBackbone(params_, config, rng);
  const int kc = config.gated_channels;
  gate_project_ = nn::Conv2dLayer(params_, "gate.project", k,
                                  config.gate_projection_channels, 1, 1, rng);
  gate_fuse_ = nn::Conv2dLayer(
      params_, "gate.fuse",
      config.gate_projection_channels + backbone_->context_channels(), kc, 1, 1,
      rng);
  gate_fc1_ = nn::LinearLayer(params_, "gate.fc1", kc, kc / config.gate_reduction,
                              rng);
  gate_fc2_ = nn::LinearLayer(params_, "gate.fc2", kc / config.gate_reduction,
                              kc, rng);
  head_a_ = nn::Conv2dLayer(params_, "head.a", kc, config.head_channels, 3, 1, rng);
  head_b_ = nn::Conv2dLayer(params_, "head.b", config.head_channels,
                            config.head_channels, 3, 1, rng);
  head_out_ = nn::Conv2dLayer(params_, "head.out", config.head_channels, k, 1, 1,
                              rng);
  // Start near the heatmap background level so early BCE steps are stable.
  for (auto& p : params_.items()) {
    if (p.name == "head.out.bias") p.var.mutable_value().Fill(-4.0f);
  }
}

Var Model::HintFusion(const Var& image, const Var& interaction,
                      const Var& previous) const {
  return ConvRelu(fusion_b_, ConvRelu(fusion_a_, Concat({image, interaction, previous})));
}

Var Model::InteractionGate(const Var& interaction, const Var& context) const {
  const int factor = interaction.shape()[2] / context.shape()[2];
  const Var projected = nn::Relu(gate_project_(nn::AvgPool(interaction, factor)));
  const Var fused = nn::Relu(gate_fuse_(Concat({projected, context})));
  const Var pooled = config_.gate_pooling == GatePooling::kMax
                         ? nn::GlobalMaxPool(fused)
                         : nn::GlobalAvgPool(fused);
  const Var hidden = nn::Relu(gate_fc1_(pooled));
  const Var logits = gate_fc2_(hidden);
  return config_.gate_activation == GateActivation::kSigmoid
             ? nn::Sigmoid(logits)
             : nn::Softmax(logits);
}

Var ApplyGate(const Var& features, const Var& gate) {
  return nn::ChannelScale(features, gate);
}

Var Model::Forward(const ModelInputs& inputs, ForwardTrace* trace) const {
  const Var image(inputs.image);
  const Var interaction(inputs.interaction);
  const Var previous(inputs.previous);
  const Var fused = HintFusion(image, interaction, previous);
  const BackboneFeatures features = backbone_->Forward(fused);
  Var gate;
  Var gated = features.fine;
  if (config_.gate_enabled) {
    const Var gate_input = inputs.gate_interaction.empty()
                               ? interaction
                               : Var(inputs.gate_interaction);
    gate = InteractionGate(gate_input, features.context);
    gated = ApplyGate(features.fine, gate);
  }
  const Var logits = head_out_(ConvRelu(head_b_, ConvRelu(head_a_, gated)));
  const Var probs = nn::UpsampleBilinear(nn::Sigmoid(logits), config_.height,
                                         config_.width);
  if (trace != nullptr) {
    *trace = {fused, features.fine, features.context, gate, gated, logits};
  }
  return probs;
}

absl::StatusOr<Heatmap> Model::Predict(const Image& image,
                                       const InteractionMap& interaction,
                                       const Heatmap& previous) const {
  const int k = config_.num_keypoints, w = config_.width, h = config_.height;
  ModelInputs in{ImageToTensor(image), HeatmapToTensor(interaction.values),
                 HeatmapToTensor(previous), {}};
  if (auto s = CheckBatchShape(in.image, 1, config_.image_channels, h, w, "image");
      !s.ok()) {
    return s;
  }
  if (auto s = CheckBatchShape(in.interaction, 1, k, h, w, "interaction");
      !s.ok()) {
    return s;
  }
  if (auto s = CheckBatchShape(in.previous, 1, k, h, w, "previous prediction");
      !s.ok()) {
    return s;
  }
  nn::NoGradGuard no_grad;
  ForwardTrace trace;
  const Var out = Forward(in, &trace);
  if (!out.value().AllFinite()) {
    return absl::InternalError(absl::StrCat(
        "non-finite activations (fused finite: ", trace.fused.value().AllFinite(),
        ", F_c finite: ", trace.fine.value().AllFinite(),
        ", logits finite: ", trace.logits.value().AllFinite(), ")"));
  }
  return TensorToHeatmap(out.value(), 0);
}

nn::Tensor ImageToTensor(const Image& image) {
  nn::Tensor t({1, image.channels, image.height, image.width});
  CopyIntoBatch(image, 0, t);
  return t;
}

nn::Tensor HeatmapToTensor(const Heatmap& heatmap) {
  nn::Tensor t({1, heatmap.channels(), heatmap.height(), heatmap.width()});
  CopyIntoBatch(heatmap, 0, t);
  return t;
}

Heatmap TensorToHeatmap(const nn::Tensor& batch, int index) {
  Heatmap hm(batch.dim(1), batch.dim(3), batch.dim(2));
  const size_t block = hm.values().size();
  auto dst = hm.mutable_values();
  const float* src = batch.data() + static_cast<size_t>(index) * block;
  for (size_t i = 0; i < block; ++i) dst[i] = src[i];
  return hm;
}

void CopyIntoBatch(const Heatmap& heatmap, int index, nn::Tensor& batch) {
  const auto src = heatmap.values();
  CHECK_EQ(static_cast<size_t>(batch.dim(1)) * batch.dim(2) * batch.dim(3),
           src.size());
  float* dst = batch.data() + static_cast<size_t>(index) * src.size();
  for (size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
}

void CopyIntoBatch(const Image& image, int index, nn::Tensor& batch) {
  CHECK_EQ(static_cast<size_t>(batch.dim(1)) * batch.dim(2) * batch.dim(3),
           image.pixels.size());
  std::copy(image.pixels.begin(), image.pixels.end(),
            batch.data() + static_cast<size_t>(index) * image.pixels.size());
}

}  // namespace ikp
