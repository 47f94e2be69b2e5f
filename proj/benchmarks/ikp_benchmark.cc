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

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "benchmark/benchmark.h"
#include "ikp/keypoint_codec.h"
#include "ikp/losses.h"
#include "ikp/model.h"
#include "ikp/morphology.h"
#include "ikp/synthetic_spine.h"

namespace ikp {
namespace {

constexpr int kWidth = 64;
constexpr int kHeight = 128;
constexpr int kKeypoints = 20;

KeypointSet RandomKeypoints(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(8, kWidth - 9), uy(8, kHeight - 9);
  std::vector<Point> pts;
  for (int i = 0; i < kKeypoints; ++i) pts.push_back({ux(rng), uy(rng)});
  return KeypointSet(std::move(pts));
}

void BM_EncodeInteraction(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const KeypointSet kps = RandomKeypoints(rng);
  std::vector<Click> clicks;
  for (int i = 0; i < state.range(0); ++i) clicks.push_back({i, kps.coords[i]});
  for (auto _ : state) {
    auto u = EncodeInteraction(clicks, {}, {kKeypoints, kWidth, kHeight});
    benchmark::DoNotOptimize(u);
  }
}
BENCHMARK(BM_EncodeInteraction)->Arg(1)->Arg(5)->Arg(20);

void BM_EncodeKeypoints(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const KeypointSet kps = RandomKeypoints(rng);
  for (auto _ : state) {
    auto hm = EncodeKeypoints(kps, {}, {kKeypoints, kWidth, kHeight});
    benchmark::DoNotOptimize(hm);
  }
}
BENCHMARK(BM_EncodeKeypoints);

void BM_DecodeLocalSoftArgmax(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Heatmap hm = *EncodeKeypoints(RandomKeypoints(rng), {}, {kKeypoints, kWidth, kHeight});
  for (auto _ : state) {
    DecodeResult d = DecodeLocalSoftArgmax(hm, {});
    benchmark::DoNotOptimize(d);
  }
}
BENCHMARK(BM_DecodeLocalSoftArgmax);

void BM_ComputeRelationStats(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::vector<KeypointSet> data;
  std::vector<double> norms;
  for (int i = 0; i < state.range(0); ++i) {
    data.push_back(RandomKeypoints(rng));
    norms.push_back(std::hypot(kWidth, kHeight));
  }
  for (auto _ : state) {
    auto stats = ComputeRelationStats(data, norms, 8);
    benchmark::DoNotOptimize(stats);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ComputeRelationStats)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_MorphologyLoss(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const KeypointSet gt = RandomKeypoints(rng), pred = RandomKeypoints(rng);
  RelationSets rel;
  for (int m = 0; m < kKeypoints; ++m) {
    for (int n = m + 1; n < kKeypoints; ++n) rel.pairs.push_back({m, n});
  }
  rel.triples = EnumerateTriples(kKeypoints, 8);
  for (auto _ : state) {
    MorphologyLossResult r = MorphologyLoss(pred, gt, rel, 1.0, std::hypot(kWidth, kHeight));
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_MorphologyLoss);

nn::Tensor RandomTensor(std::vector<int> shape, std::mt19937_64& rng) {
  nn::Tensor t(std::move(shape));
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  for (float& v : t.values()) v = d(rng);
  return t;
}

ModelInputs RandomInputs(int batch, std::mt19937_64& rng) {
  return {RandomTensor({batch, 1, kHeight, kWidth}, rng),
          RandomTensor({batch, kKeypoints, kHeight, kWidth}, rng),
          RandomTensor({batch, kKeypoints, kHeight, kWidth}, rng),
          {}};
}

void BM_ModelForward(benchmark::State& state) {
  std::mt19937_64 rng(6);
  auto model = *Model::Create(ModelConfig{}, 1);
  const ModelInputs in = RandomInputs(static_cast<int>(state.range(0)), rng);
  nn::NoGradGuard no_grad;
  for (auto _ : state) {
    nn::Var out = model->Forward(in);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ModelForward)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

// One optimizer-free training step: forward, total loss and backward.
void BM_TrainStep(benchmark::State& state) {
  std::mt19937_64 rng(7);
  auto model = *Model::Create(ModelConfig{}, 1);
  constexpr int kBatch = 4;
  const ModelInputs in = RandomInputs(kBatch, rng);
  std::vector<KeypointSet> gts;
  nn::Tensor target({kBatch, kKeypoints, kHeight, kWidth});
  for (int b = 0; b < kBatch; ++b) {
    gts.push_back(RandomKeypoints(rng));
    const Heatmap hm = *EncodeKeypoints(gts.back(), {}, {kKeypoints, kWidth, kHeight});
    const nn::Tensor t = HeatmapToTensor(hm);
    std::copy(t.values().begin(), t.values().end(),
              target.values().begin() + static_cast<std::ptrdiff_t>(b) * t.size());
  }
  RelationSets rel;
  for (int m = 0; m + 1 < kKeypoints; ++m) rel.pairs.push_back({m, m + 1});
  rel.triples = EnumerateTriples(kKeypoints, 3);
  for (auto _ : state) {
    model->parameters().ZeroGrad();
    nn::Var loss = TotalLoss(model->Forward(in), target, gts, rel, {}, 1.0, 0.01,
                             std::hypot(kWidth, kHeight));
    loss.Backward();
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * kBatch);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_RenderSyntheticSpine(benchmark::State& state) {
  const SyntheticSpineConfig config;
  int index = 0;
  for (auto _ : state) {
    auto sample = RenderSyntheticSpine(config, index++);
    benchmark::DoNotOptimize(sample);
  }
}
BENCHMARK(BM_RenderSyntheticSpine);

}  // namespace
}  // namespace ikp

BENCHMARK_MAIN();
