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

#include "ikp/losses.h"

#include <glog/logging.h>

namespace ikp {

nn::Var DecodeKeypointsOp(const nn::Var& heatmaps, const CodecConfig& codec) {
  const nn::Tensor& hm = heatmaps.value();
  CHECK_EQ(hm.rank(), 4);
  const int batch = hm.dim(0), k = hm.dim(1), height = hm.dim(2),
            width = hm.dim(3);
  const size_t plane = static_cast<size_t>(height) * width;
  nn::Tensor coords({batch, k, 2});
  std::vector<SoftArgmaxWindow> windows;
  windows.reserve(static_cast<size_t>(batch) * k);
  for (int i = 0; i < batch * k; ++i) {
    std::span<const float> channel(hm.data() + i * plane, plane);
    windows.push_back(LocalSoftArgmax<float>(channel, width, height, codec));
    coords[2 * i] = static_cast<float>(windows.back().location.x);
    coords[2 * i + 1] = static_cast<float>(windows.back().location.y);
  }
  const double temperature = codec.temperature;
  return nn::MakeResult(
      std::move(coords), {heatmaps},
      [heatmaps, windows = std::move(windows), plane, width,
       temperature](nn::Node& self) {
        nn::Tensor& g = heatmaps.node()->MutableGrad();
        for (size_t i = 0; i < windows.size(); ++i) {
          const double gx = self.grad[2 * i], gy = self.grad[2 * i + 1];
          if (gx == 0.0 && gy == 0.0) continue;
          AccumulateSoftArgmaxGradient<float>(
              windows[i], width, temperature, gx, gy,
              std::span<float>(g.data() + i * plane, plane));
        }
      });
}

std::vector<KeypointSet> CoordsToKeypoints(const nn::Tensor& coords) {
  std::vector<KeypointSet> out;
  const int batch = coords.dim(0), k = coords.dim(1);
  for (int n = 0; n < batch; ++n) {
    std::vector<Point> pts;
    for (int j = 0; j < k; ++j) {
      const size_t base = (static_cast<size_t>(n) * k + j) * 2;
      pts.push_back({coords[base], coords[base + 1]});
    }
    out.emplace_back(std::move(pts));
  }
  return out;
}

nn::Var MorphologyLossOp(const nn::Var& coords, std::span<const KeypointSet> gt,
                         const RelationSets& relations, double lambda_m,
                         double norm) {
  const std::vector<KeypointSet> pred = CoordsToKeypoints(coords.value());
  CHECK_EQ(pred.size(), gt.size());
  const int k = coords.value().dim(1);
  nn::Tensor grad({static_cast<int>(pred.size()), k, 2});
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(pred.size());
  for (size_t n = 0; n < pred.size(); ++n) {
    const MorphologyLossResult r =
        MorphologyLoss(pred[n], gt[n], relations, lambda_m, norm);
    total += r.value * inv;
    for (int j = 0; j < k; ++j) {
      grad[(n * k + j) * 2] = static_cast<float>(r.grad[j].x * inv);
      grad[(n * k + j) * 2 + 1] = static_cast<float>(r.grad[j].y * inv);
    }
  }
  nn::Tensor out({1});
  out[0] = static_cast<float>(total);
  return nn::MakeResult(std::move(out), {coords},
                        [coords, grad = std::move(grad)](nn::Node& self) {
                          nn::Tensor& g = coords.node()->MutableGrad();
                          for (size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[0] * grad[i];
                        });
}

nn::Var TotalLoss(const nn::Var& pred, const nn::Tensor& target,
                  std::span<const KeypointSet> gt, const RelationSets& relations,
                  const CodecConfig& codec, double lambda_m, double lambda_total,
                  double norm, LossBreakdown* breakdown) {
  const nn::Var bce = nn::BinaryCrossEntropy(pred, target, kBceEpsilon);
  nn::Var total = bce;
  double morph = 0.0;
  if (lambda_total > 0.0) {
    const nn::Var coords = DecodeKeypointsOp(pred, codec);
    const nn::Var lm = MorphologyLossOp(coords, gt, relations, lambda_m, norm);
    morph = lm.value()[0];
    total = nn::Add(bce, nn::Scale(lm, static_cast<float>(lambda_total)));
  }
  if (breakdown != nullptr) {
    *breakdown = {total.value()[0], bce.value()[0], morph};
  }
  return total;
}

}  // namespace ikp
