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

#include "ikp/checkpoint.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>

#include "gtest/gtest.h"
#include "ikp/serialization.h"
#include "test_util.h"

namespace ikp {
namespace {

namespace fs = std::filesystem;

ModelConfig TinyConfig() {
  ModelConfig c;
  c.num_keypoints = 3;
  c.width = 16;
  c.height = 32;
  c.encoder_channels = {4, 4, 6, 6};
  c.gated_channels = 4;
  c.gate_projection_channels = 2;
  c.gate_reduction = 2;
  c.head_channels = 4;
  return c;
}

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void WriteAll(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ikp_ckpt_" + std::string(::testing::UnitTest::GetInstance()
                                          ->current_test_info()
                                          ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    model_ = *Model::Create(TinyConfig(), 42);
    // Perturb weights away from their initial values so a roundtrip cannot
    // pass by re-running initialization.
    std::mt19937_64 rng(1);
    for (auto& p : model_->parameters().items()) {
      for (float& v : p.var.mutable_value().values()) {
        v += std::uniform_real_distribution<float>(-0.1f, 0.1f)(rng);
      }
    }
    info_.codec.sigma = 2.5;
    info_.morphology.t_d = 0.02;
    info_.morphology.mode = SelectionMode::kTopKHighVariance;
    info_.relations = {{{0, 1}, {1, 2}}, {{0, 1, 2}}};
    info_.extra = {{"dataset", "tiny"}, {"epoch", 3}};
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  std::unique_ptr<Model> model_;
  CheckpointInfo info_;
};

TEST_F(CheckpointTest, RoundTripIsBitIdentical) {
  const fs::path path = dir_ / "m.ikp";
  ASSERT_OK(SaveCheckpoint(path, *model_, info_));
  ASSERT_OK_AND_ASSIGN(LoadedCheckpoint loaded, LoadCheckpoint(path));
  const auto& a = model_->parameters().items();
  const auto& b = loaded.model->parameters().items();
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    ASSERT_EQ(a[i].var.shape(), b[i].var.shape());
    EXPECT_EQ(std::memcmp(a[i].var.value().data(), b[i].var.value().data(),
                          a[i].var.value().size() * sizeof(float)),
              0)
        << a[i].name;
  }
  EXPECT_EQ(loaded.info.codec.sigma, 2.5);
  EXPECT_EQ(loaded.info.morphology.t_d, 0.02);
  EXPECT_EQ(loaded.info.morphology.mode, SelectionMode::kTopKHighVariance);
  EXPECT_EQ(loaded.info.relations, info_.relations);
  EXPECT_EQ(loaded.info.extra, info_.extra);
  EXPECT_EQ(ToJson(loaded.model->config()), ToJson(model_->config()));

  // Saving the loaded model reproduces the file byte for byte.
  ASSERT_OK(SaveCheckpoint(dir_ / "again.ikp", *loaded.model, loaded.info));
  EXPECT_EQ(ReadAll(path), ReadAll(dir_ / "again.ikp"));
  EXPECT_FALSE(fs::exists(dir_ / "m.ikp.tmp"));
}

TEST_F(CheckpointTest, RejectsForeignFiles) {
  WriteAll(dir_ / "junk.bin", "PNG\x89 this is not a checkpoint at all");
  EXPECT_EQ(LoadCheckpoint(dir_ / "junk.bin").status().code(),
            absl::StatusCode::kInvalidArgument);
  WriteAll(dir_ / "empty.bin", "");
  EXPECT_FALSE(LoadCheckpoint(dir_ / "empty.bin").ok());
  EXPECT_FALSE(LoadCheckpoint(dir_ / "missing.ikp").ok());
}

TEST_F(CheckpointTest, RejectsOtherVersions) {
  ASSERT_OK(SaveCheckpoint(dir_ / "m.ikp", *model_, info_));
  std::string bytes = ReadAll(dir_ / "m.ikp");
  const uint32_t future = kCheckpointVersion + 1;
  std::memcpy(bytes.data() + 8, &future, sizeof(future));
  WriteAll(dir_ / "v2.ikp", bytes);
  EXPECT_EQ(LoadCheckpoint(dir_ / "v2.ikp").status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST_F(CheckpointTest, RejectsTruncationAndTrailingBytes) {
  ASSERT_OK(SaveCheckpoint(dir_ / "m.ikp", *model_, info_));
  const std::string bytes = ReadAll(dir_ / "m.ikp");
  for (size_t cut : {bytes.size() - 1, bytes.size() - 100, size_t{30}}) {
    WriteAll(dir_ / "cut.ikp", bytes.substr(0, cut));
    EXPECT_EQ(LoadCheckpoint(dir_ / "cut.ikp").status().code(),
              absl::StatusCode::kDataLoss)
        << cut;
  }
  WriteAll(dir_ / "long.ikp", bytes + "xyz");
  EXPECT_EQ(LoadCheckpoint(dir_ / "long.ikp").status().code(),
            absl::StatusCode::kDataLoss);
}

TEST_F(CheckpointTest, RejectsShapeAndNameMismatch) {
  ASSERT_OK(SaveCheckpoint(dir_ / "m.ikp", *model_, info_));
  const std::string bytes = ReadAll(dir_ / "m.ikp");
  uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 12, sizeof(len));
  nlohmann::json meta = nlohmann::json::parse(bytes.substr(20, len));
  const std::string data = bytes.substr(20 + len);

  auto write_with = [&](const nlohmann::json& m, const fs::path& p) {
    const std::string text = m.dump();
    std::string out = bytes.substr(0, 12);
    const uint64_t n = text.size();
    out.append(reinterpret_cast<const char*>(&n), sizeof(n));
    out += text;
    out += data;
    WriteAll(p, out);
  };
  // Sanity check of the splice itself.
  write_with(meta, dir_ / "same.ikp");
  EXPECT_OK(LoadCheckpoint(dir_ / "same.ikp").status());

  nlohmann::json renamed = meta;
  renamed["parameters"][0]["name"] = "bogus.weight";
  write_with(renamed, dir_ / "renamed.ikp");
  EXPECT_EQ(LoadCheckpoint(dir_ / "renamed.ikp").status().code(),
            absl::StatusCode::kFailedPrecondition);

  nlohmann::json wider = meta;
  wider["model"]["gated_channels"] = 6;
  write_with(wider, dir_ / "wider.ikp");
  EXPECT_EQ(LoadCheckpoint(dir_ / "wider.ikp").status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(SerializationTest, ConfigsRoundTrip) {
  ModelConfig m = TinyConfig();
  m.gate_pooling = GatePooling::kAverage;
  m.gate_activation = GateActivation::kSoftmax;
  m.lambda_total = 0.25;
  ASSERT_OK_AND_ASSIGN(ModelConfig m2, ModelConfigFromJson(ToJson(m)));
  EXPECT_EQ(ToJson(m2), ToJson(m));
  EXPECT_EQ(m2.gate_pooling, GatePooling::kAverage);

  CodecConfig c;
  c.window_radius = 3;
  ASSERT_OK_AND_ASSIGN(CodecConfig c2, CodecConfigFromJson(ToJson(c)));
  EXPECT_EQ(c2.window_radius, 3);

  MorphologyConfig mc;
  mc.mode = SelectionMode::kAdjacentPoints;
  mc.top_k = 4;
  ASSERT_OK_AND_ASSIGN(MorphologyConfig mc2, MorphologyConfigFromJson(ToJson(mc)));
  EXPECT_EQ(mc2.mode, SelectionMode::kAdjacentPoints);
  EXPECT_EQ(mc2.top_k, 4);

  const Topology t{{{0, 1, 2, 3}}};
  ASSERT_OK_AND_ASSIGN(Topology t2, TopologyFromJson(ToJson(t)));
  EXPECT_EQ(t2, t);
}

TEST(SerializationTest, RelationStatsKeepInfiniteStd) {
  RelationStats s;
  s.num_keypoints = 3;
  s.sample_count = 2;
  s.pairs.push_back({{0, 1}, 0.5, 0.1, 2, true});
  s.triples.push_back({{0, 1, 2}, 0.0, 0.0, std::numeric_limits<double>::infinity(), 2, true});
  ASSERT_OK_AND_ASSIGN(RelationStats back, RelationStatsFromJson(ToJson(s)));
  ASSERT_EQ(back.triples.size(), 1u);
  EXPECT_TRUE(std::isinf(back.triples[0].std));
  EXPECT_EQ(back.pairs[0].std, 0.1);
}

TEST(SerializationTest, RejectsInvalidJson) {
  EXPECT_FALSE(CodecConfigFromJson({{"sigma", -1.0}}).ok());
  EXPECT_FALSE(CodecConfigFromJson({{"sigma", "wide"}}).ok());
  nlohmann::json m = ToJson(TinyConfig());
  m["gate_pooling"] = "median";
  EXPECT_FALSE(ModelConfigFromJson(m).ok());
  EXPECT_FALSE(RelationSetsFromJson({{"pairs", {{0}}}, {"triples", nlohmann::json::array()}}).ok());
  EXPECT_FALSE(TopologyFromJson(nlohmann::json::object({{"polygons", 3}})).ok());
}

}  // namespace
}  // namespace ikp
