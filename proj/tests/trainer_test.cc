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

#include <cmath>
#include <cstring>
#include <vector>

#include "gtest/gtest.h"
#include "ikp/synthetic_spine.h"
#include "test_util.h"

namespace ikp {
namespace {

TEST(TrainConfigTest, Validation) {
  EXPECT_OK(TrainConfig{}.Validate());
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_FALSE(c.Validate().ok());
  c = TrainConfig{};
  c.learning_rate = 0.0;
  EXPECT_FALSE(c.Validate().ok());
  c = TrainConfig{};
  c.simulation.click_decay = 1.0;
  EXPECT_FALSE(c.Validate().ok());
  c = TrainConfig{};
  c.augment_shift_y = -1;
  EXPECT_FALSE(c.Validate().ok());
}

TEST(ShiftSampleTest, MovesPixelsAndKeypointsTogether) {
  Sample s;
  s.image = Image(1, 6, 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) s.image.at(0, x, y) = 0.1f * x + 0.01f * y;
  }
  s.keypoints = KeypointSet({{2.5, 1.0}});
  const Sample out = ShiftSample(s, 2, -1);
  EXPECT_EQ(out.keypoints.coords[0], (Point{4.5, 0.0}));
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) {
      const int sx = std::clamp(x - 2, 0, 5), sy = std::clamp(y + 1, 0, 4);
      EXPECT_EQ(out.image.at(0, x, y), s.image.at(0, sx, sy)) << x << "," << y;
    }
  }
  const Sample same = ShiftSample(s, 0, 0);
  EXPECT_EQ(same.image, s.image);
}

TEST(RelationStatsFromSamplesTest, NormalizesByWorkingDiagonal) {
  std::vector<Sample> samples(2);
  samples[0].image = samples[1].image = Image(1, 30, 40);
  samples[0].keypoints = KeypointSet({{0, 0}, {0, 10}});
  samples[1].keypoints = KeypointSet({{0, 0}, {0, 20}});
  ASSERT_OK_AND_ASSIGN(RelationStats stats, RelationStatsFromSamples(samples, 0));
  ASSERT_EQ(stats.pairs.size(), 1u);
  EXPECT_NEAR(stats.pairs[0].mean, 15.0 / 50.0, 1e-12);
  EXPECT_NEAR(stats.pairs[0].std, 5.0 / 50.0, 1e-12);
}

class TrainModelTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SyntheticSpineConfig sc;
    sc.num_vertebrae = 2;
    sc.context_vertebrae = 1;
    sc.num_samples = 16;
    sc.train_fraction = 0.75;
    sc.val_fraction = 0.25;
    sc.seed = 4;
    auto dataset = GenerateSyntheticSpine(sc);
    ASSERT_OK(dataset);
    dataset_ = std::move(*dataset);
    train_ = SamplesInSplit(dataset_, Split::kTrain);
    val_ = SamplesInSplit(dataset_, Split::kVal);
    model_config_.num_keypoints = sc.num_keypoints();
    model_config_.width = sc.width;
    model_config_.height = sc.height;
    model_config_.encoder_channels = {6, 8, 8, 10};
    model_config_.gated_channels = 8;
    model_config_.gate_projection_channels = 4;
    model_config_.gate_reduction = 2;
    model_config_.head_channels = 8;
    train_config_.max_epochs = 6;
    train_config_.learning_rate = 3e-3;
    train_config_.seed = 9;
    relations_ = {{{0, 1}, {2, 3}}, {{0, 1, 3}}};
  }

  SyntheticDataset dataset_;
  std::vector<Sample> train_, val_;
  ModelConfig model_config_;
  TrainConfig train_config_;
  RelationSets relations_;
  CodecConfig codec_;
};

TEST_F(TrainModelTest, LossDecreasesAndRunsAreBitIdentical) {
  ASSERT_FALSE(train_.empty());
  ASSERT_FALSE(val_.empty());
  ASSERT_OK_AND_ASSIGN(auto a, Model::Create(model_config_, 1));
  ASSERT_OK_AND_ASSIGN(auto b, Model::Create(model_config_, 1));
  int epochs_seen = 0;
  ASSERT_OK_AND_ASSIGN(TrainResult ra,
                       TrainModel(*a, train_, val_, relations_, codec_, 1.0, train_config_,
                                  [&](const EpochLog&) { ++epochs_seen; }));
  ASSERT_OK_AND_ASSIGN(TrainResult rb, TrainModel(*b, train_, val_, relations_, codec_,
                                                  1.0, train_config_));
  EXPECT_EQ(epochs_seen, 6);
  ASSERT_EQ(ra.history.size(), 6u);
  EXPECT_LT(ra.history.back().loss, ra.history.front().loss);
  EXPECT_GE(ra.best_epoch, 0);
  for (const EpochLog& e : ra.history) {
    EXPECT_TRUE(std::isfinite(e.loss));
    EXPECT_GE(e.val_mre, ra.best_val_mre);
  }
  for (size_t i = 0; i < ra.history.size(); ++i) {
    EXPECT_EQ(ra.history[i].loss, rb.history[i].loss);
    EXPECT_EQ(ra.history[i].val_mre, rb.history[i].val_mre);
  }
  const auto& pa = a->parameters().items();
  const auto& pb = b->parameters().items();
  for (size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(std::memcmp(pa[i].var.value().data(), pb[i].var.value().data(),
                          pa[i].var.value().size() * sizeof(float)),
              0)
        << pa[i].name;
  }
  // The restored weights are the best-validation ones.
  ASSERT_OK_AND_ASSIGN(double mre, AutomaticMre(*a, codec_, val_));
  EXPECT_NEAR(mre, ra.best_val_mre, 1e-9);
}

TEST_F(TrainModelTest, RejectsMismatchedInputs) {
  ASSERT_OK_AND_ASSIGN(auto model, Model::Create(model_config_, 1));
  EXPECT_FALSE(TrainModel(*model, {}, val_, relations_, codec_, 1.0, train_config_).ok());
  ModelConfig wrong = model_config_;
  wrong.num_keypoints = 3;
  ASSERT_OK_AND_ASSIGN(auto other, Model::Create(wrong, 1));
  EXPECT_FALSE(TrainModel(*other, train_, val_, relations_, codec_, 1.0, train_config_).ok());
  TrainConfig bad = train_config_;
  bad.batch_size = 0;
  EXPECT_FALSE(TrainModel(*model, train_, val_, relations_, codec_, 1.0, bad).ok());
}

}  // namespace
}  // namespace ikp
