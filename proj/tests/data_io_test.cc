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

#include "ikp/data_io.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "absl/strings/str_cat.h"
#include "gtest/gtest.h"
#include "ikp/morphology.h"
#include "ikp/synthetic_spine.h"
#include "test_util.h"

namespace ikp {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / absl::StrCat("ikp_data_io_", name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Image Gradient(int w, int h) {
  Image img(1, w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(0, x, y) = static_cast<float>(x + 2 * y) / (w + 2 * h);
  }
  return img;
}

DatasetManifest SmallManifest(const fs::path& dir) {
  DatasetManifest m;
  m.name = "tiny";
  m.num_keypoints = 3;
  m.keypoint_names = {"a", "b", "c"};
  m.target_width = 16;
  m.target_height = 32;
  m.topology = Topology{{{0, 1, 2}}};
  m.base_dir = dir;
  const std::pair<const char*, Split> subjects[] = {
      {"s0", Split::kTrain}, {"s1", Split::kTrain}, {"s2", Split::kVal}, {"s3", Split::kTest}};
  int i = 0;
  for (const auto& [subject, split] : subjects) {
    ManifestRecord r;
    r.image = absl::StrCat("img", i, ".png");
    r.width = 32;
    r.height = 48;
    r.keypoints = KeypointSet({{1.5 + i, 2.0}, {10.25, 20.0}, {30.0, 47.0}});
    r.keypoints.visible[1] = i % 2;
    r.subject = subject;
    r.split = split;
    EXPECT_OK(WritePng(Gradient(32, 48), dir / r.image));
    m.records.push_back(r);
    ++i;
  }
  return m;
}

TEST(SplitTest, NamesRoundTrip) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    ASSERT_OK_AND_ASSIGN(Split back, ParseSplit(SplitName(s)));
    EXPECT_EQ(back, s);
  }
  EXPECT_FALSE(ParseSplit("holdout").ok());
}

TEST(ManifestTest, WriteLoadRoundTrip) {
  TempDir dir("roundtrip");
  const DatasetManifest m = SmallManifest(dir.path());
  ASSERT_OK(ValidateManifest(m, true));
  ASSERT_OK(WriteManifest(m, dir.path() / "manifest.jsonl"));
  ASSERT_OK_AND_ASSIGN(DatasetManifest back, LoadManifest(dir.path() / "manifest.jsonl"));
  EXPECT_EQ(back.name, m.name);
  EXPECT_EQ(back.num_keypoints, 3);
  EXPECT_EQ(back.keypoint_names, m.keypoint_names);
  EXPECT_EQ(back.target_width, 16);
  EXPECT_EQ(back.target_height, 32);
  EXPECT_EQ(back.topology.polygons, m.topology.polygons);
  ASSERT_EQ(back.records.size(), m.records.size());
  for (size_t i = 0; i < m.records.size(); ++i) {
    EXPECT_EQ(back.records[i].image, m.records[i].image);
    EXPECT_EQ(back.records[i].keypoints, m.records[i].keypoints);
    EXPECT_EQ(back.records[i].subject, m.records[i].subject);
    EXPECT_EQ(back.records[i].split, m.records[i].split);
    EXPECT_EQ(back.records[i].width, 32);
  }
  EXPECT_EQ(back.RecordsInSplit(Split::kTrain).size(), 2u);
}

TEST(ManifestTest, RejectsSubjectLeakage) {
  TempDir dir("leak");
  DatasetManifest m = SmallManifest(dir.path());
  m.records[3].subject = "s0";
  const absl::Status s = ValidateManifest(m, false);
  EXPECT_FALSE(s.ok());
  EXPECT_NE(s.message().find("s0"), std::string::npos) << s;
}

TEST(ManifestTest, RejectsKMismatchBadTopologyAndMissingFiles) {
  TempDir dir("invalid");
  DatasetManifest m = SmallManifest(dir.path());
  m.records[1].keypoints = KeypointSet({{1, 1}});
  EXPECT_FALSE(ValidateManifest(m, false).ok());

  m = SmallManifest(dir.path());
  m.records[0].keypoints.coords[0].x = std::nan("");
  EXPECT_FALSE(ValidateManifest(m, false).ok());

  m = SmallManifest(dir.path());
  m.topology.polygons[0].push_back(7);
  EXPECT_FALSE(ValidateManifest(m, false).ok());

  m = SmallManifest(dir.path());
  fs::remove(dir.path() / m.records[2].image);
  EXPECT_OK(ValidateManifest(m, false));
  EXPECT_FALSE(ValidateManifest(m, true).ok());
}

TEST(ManifestTest, LoadRejectsMalformedLines) {
  TempDir dir("malformed");
  std::ofstream(dir.path() / "m.jsonl") << "{\"type\":\"header\",\"schema_version\":99}\n";
  EXPECT_FALSE(LoadManifest(dir.path() / "m.jsonl").ok());
  std::ofstream(dir.path() / "n.jsonl") << "not json\n";
  EXPECT_FALSE(LoadManifest(dir.path() / "n.jsonl").ok());
  EXPECT_FALSE(LoadManifest(dir.path() / "missing.jsonl").ok());
}

TEST(LoadSampleTest, ResizesToWorkingResolution) {
  TempDir dir("load");
  const DatasetManifest m = SmallManifest(dir.path());
  ASSERT_OK_AND_ASSIGN(Sample s, LoadSample(m, m.records[0]));
  EXPECT_EQ(s.image.width, 16);
  EXPECT_EQ(s.image.height, 32);
  EXPECT_EQ(s.native_width, 32);
  EXPECT_EQ(s.native_height, 48);
  EXPECT_EQ(s.native_keypoints, m.records[0].keypoints);
  EXPECT_DOUBLE_EQ(s.keypoints.coords[1].x, 10.25 * 0.5);
  EXPECT_DOUBLE_EQ(s.keypoints.coords[1].y, 20.0 * 32.0 / 48.0);
  ASSERT_OK_AND_ASSIGN(std::vector<Sample> test, LoadSplit(m, Split::kTest));
  ASSERT_EQ(test.size(), 1u);
}

TEST(PngTest, RoundTripQuantizesTo8Bits) {
  TempDir dir("png");
  const Image img = Gradient(13, 7);
  ASSERT_OK(WritePng(img, dir.path() / "g.png"));
  ASSERT_OK_AND_ASSIGN(auto size, PngSize(dir.path() / "g.png"));
  EXPECT_EQ(size, std::make_pair(13, 7));
  ASSERT_OK_AND_ASSIGN(Image back, ReadPng(dir.path() / "g.png"));
  ASSERT_EQ(back.pixels.size(), img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    EXPECT_NEAR(back.pixels[i], img.pixels[i], 0.5 / 255.0 + 1e-6);
  }
  ASSERT_OK_AND_ASSIGN(std::string bytes, EncodePng(back));
  ASSERT_OK_AND_ASSIGN(Image again, DecodePng(bytes));
  EXPECT_EQ(again, back);
  EXPECT_FALSE(DecodePng("definitely not a png").ok());
  EXPECT_FALSE(ReadPng(dir.path() / "absent.png").ok());
}

TEST(ResizeTest, ConstantStaysConstantAndExactHalving) {
  Image c(1, 10, 6);
  for (float& p : c.pixels) p = 0.3f;
  ASSERT_OK_AND_ASSIGN(Image up, ResizeImage(c, 17, 23));
  for (float p : up.pixels) EXPECT_NEAR(p, 0.3f, 1e-6);

  // With half-pixel centers a 2x downsample samples exactly between four
  // source pixels, giving their mean.
  const Image g = Gradient(8, 6);
  ASSERT_OK_AND_ASSIGN(Image half, ResizeImage(g, 4, 3));
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) {
      const double mean = (g.at(0, 2 * x, 2 * y) + g.at(0, 2 * x + 1, 2 * y) +
                           g.at(0, 2 * x, 2 * y + 1) + g.at(0, 2 * x + 1, 2 * y + 1)) /
                          4.0;
      EXPECT_NEAR(half.at(0, x, y), mean, 1e-6);
    }
  }
  EXPECT_FALSE(ResizeImage(g, 0, 3).ok());
}

TEST(ResizeTest, KeypointScalingInvertsExactly) {
  std::mt19937_64 rng(3);
  const KeypointSet k = ::ikp::testing::RandomKeypoints(10, 300, 700, 0, rng);
  ASSERT_OK_AND_ASSIGN(ResizedSample r, ResizeSample(Image(1, 300, 700), k, 64, 128));
  EXPECT_EQ(r.image.width, 64);
  const KeypointSet back = ScaleKeypoints(r.keypoints, 300.0 / 64, 700.0 / 128);
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(back.coords[i].x, k.coords[i].x, 1e-6);
    EXPECT_NEAR(back.coords[i].y, k.coords[i].y, 1e-6);
  }
}

TEST(SubjectSplitTest, SubjectsStayTogetherAndSeedIsDeterministic) {
  std::vector<ManifestRecord> records;
  for (int i = 0; i < 300; ++i) {
    ManifestRecord r;
    r.subject = absl::StrCat("s", i / 3);
    records.push_back(r);
  }
  std::vector<ManifestRecord> a = records, b = records;
  AssignSubjectSplits(a, 0.7, 0.1, 5);
  AssignSubjectSplits(b, 0.7, 0.1, 5);
  std::map<std::string, Split> seen;
  std::map<Split, int> counts;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].split, b[i].split);
    auto [it, inserted] = seen.emplace(a[i].subject, a[i].split);
    if (!inserted) {
      EXPECT_EQ(it->second, a[i].split);
    }
    ++counts[a[i].split];
  }
  EXPECT_NEAR(counts[Split::kTrain], 210, 15);
  EXPECT_NEAR(counts[Split::kVal], 30, 15);
}

TEST(SyntheticSpineTest, DeterministicAndWellFormed) {
  SyntheticSpineConfig cfg;
  cfg.num_samples = 40;
  cfg.seed = 3;
  EXPECT_EQ(cfg.num_keypoints(), 20);
  ASSERT_OK_AND_ASSIGN(SyntheticSample a, RenderSyntheticSpine(cfg, 7));
  ASSERT_OK_AND_ASSIGN(SyntheticSample b, RenderSyntheticSpine(cfg, 7));
  ASSERT_OK_AND_ASSIGN(SyntheticSample c, RenderSyntheticSpine(cfg, 8));
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.keypoints, b.keypoints);
  EXPECT_NE(a.keypoints, c.keypoints);

  ASSERT_OK_AND_ASSIGN(SyntheticDataset ds, GenerateSyntheticSpine(cfg));
  ASSERT_OK(ValidateManifest(ds.manifest, false));
  EXPECT_EQ(ds.manifest.num_keypoints, 20);
  ASSERT_EQ(ds.samples.size(), 40u);
  ASSERT_OK(ValidateTopology(ds.manifest.topology, 20));
  for (const SyntheticSample& s : ds.samples) {
    EXPECT_EQ(s.image.width, 64);
    EXPECT_EQ(s.image.height, 128);
    ASSERT_EQ(s.keypoints.size(), 20);
    for (const Point& p : s.keypoints.coords) {
      EXPECT_GE(p.x, 0.0);
      EXPECT_LE(p.x, 63.0);
      EXPECT_GE(p.y, 0.0);
      EXPECT_LE(p.y, 127.0);
    }
    for (float v : s.image.pixels) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  const size_t total = SamplesInSplit(ds, Split::kTrain).size() +
                       SamplesInSplit(ds, Split::kVal).size() +
                       SamplesInSplit(ds, Split::kTest).size();
  EXPECT_EQ(total, 40u);
}

TEST(SyntheticSpineTest, IntraVertebraDistancesVaryLessThanFarPairs) {
  SyntheticSpineConfig cfg;
  cfg.num_samples = 200;
  ASSERT_OK_AND_ASSIGN(SyntheticDataset ds, GenerateSyntheticSpine(cfg));
  std::vector<KeypointSet> kps;
  std::vector<double> norms;
  for (const auto& s : ds.samples) {
    kps.push_back(s.keypoints);
    norms.push_back(std::hypot(cfg.width, cfg.height));
  }
  ASSERT_OK_AND_ASSIGN(RelationStats stats, ComputeRelationStats(kps, norms, 0));
  double max_intra = 0.0, min_far = 1e9;
  for (const PairStat& p : stats.pairs) {
    const int vm = p.relation.m / 4, vn = p.relation.n / 4;
    if (vm == vn) max_intra = std::max(max_intra, p.std);
    if (std::abs(vm - vn) >= 3) min_far = std::min(min_far, p.std);
  }
  EXPECT_LT(max_intra, min_far);
}

TEST(SyntheticSpineTest, WritesLoadableDataset) {
  TempDir dir("synth");
  SyntheticSpineConfig cfg;
  cfg.num_samples = 6;
  ASSERT_OK_AND_ASSIGN(DatasetManifest m, WriteSyntheticSpine(cfg, dir.path()));
  ASSERT_OK_AND_ASSIGN(DatasetManifest back, LoadManifest(dir.path() / "manifest.jsonl"));
  ASSERT_OK(ValidateManifest(back, true));
  ASSERT_OK_AND_ASSIGN(Sample s, LoadSample(back, back.records[0]));
  ASSERT_OK_AND_ASSIGN(SyntheticSample direct, RenderSyntheticSpine(cfg, 0));
  EXPECT_EQ(s.keypoints, direct.keypoints);
}

TEST(SyntheticSpineTest, ValidatesConfig) {
  SyntheticSpineConfig cfg;
  cfg.num_vertebrae = 0;
  EXPECT_FALSE(cfg.Validate().ok());
  cfg = SyntheticSpineConfig{};
  cfg.noise_std = -1;
  EXPECT_FALSE(cfg.Validate().ok());
  cfg = SyntheticSpineConfig{};
  cfg.context_vertebrae = -1;
  EXPECT_FALSE(cfg.Validate().ok());
}

TEST(AasceConvertTest, ConvertsNormalizedLandmarks) {
  TempDir dir("aasce");
  ASSERT_OK(WritePng(Gradient(40, 100), dir.path() / "a.png"));
  ASSERT_OK(WritePng(Gradient(50, 80), dir.path() / "b.png"));
  std::ofstream(dir.path() / "names.csv") << "a.png\nb.png\n";
  {
    std::ofstream marks(dir.path() / "marks.csv");
    for (int row = 0; row < 2; ++row) {
      for (int i = 0; i < 136; ++i) {
        const double v = i < 68 ? 0.01 * (i % 50) + 0.2 : 0.01 * (i - 68) + 0.1;
        marks << (i ? "," : "") << (row == 1 && i == 0 ? 1.5 : v);
      }
      marks << "\n";
    }
  }
  AasceConvertOptions opt;
  opt.image_dir = dir.path();
  opt.filenames_csv = dir.path() / "names.csv";
  opt.landmarks_csv = dir.path() / "marks.csv";
  opt.split = "test";
  ASSERT_OK_AND_ASSIGN(DatasetManifest m, ConvertAasce(opt));
  ASSERT_OK(ValidateManifest(m, true));
  EXPECT_EQ(m.num_keypoints, 68);
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[0].width, 40);
  EXPECT_NEAR(m.records[0].keypoints.coords[3].x, (0.03 + 0.2) * 40, 1e-9);
  EXPECT_NEAR(m.records[0].keypoints.coords[3].y, (0.03 + 0.1) * 100, 1e-9);
  EXPECT_EQ(m.records[1].keypoints.visible[0], 0);  // x = 1.5 * width is outside
  EXPECT_EQ(m.records[1].split, Split::kTest);
  EXPECT_EQ(m.topology.polygons.size(), 17u);

  std::ofstream(dir.path() / "short.csv") << "0.1,0.2\n0.3,0.4\n";
  opt.landmarks_csv = dir.path() / "short.csv";
  EXPECT_FALSE(ConvertAasce(opt).ok());
  {
    std::ofstream bad(dir.path() / "bad.csv");
    bad << "x";
    for (int i = 1; i < 136; ++i) bad << ",0.5";
    bad << "\n";
  }
  opt.landmarks_csv = dir.path() / "bad.csv";
  const absl::Status not_a_number = ConvertAasce(opt).status();
  EXPECT_NE(not_a_number.message().find("not a number"), std::string::npos) << not_a_number;
}

}  // namespace
}  // namespace ikp
