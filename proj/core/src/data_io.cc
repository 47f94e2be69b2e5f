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

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "json.hpp"

namespace ikp {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

absl::StatusOr<std::string> ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path Resolve(const DatasetManifest& m, const std::string& image) {
  const fs::path p(image);
  return p.is_absolute() ? p : m.base_dir / p;
}

json HeaderToJson(const DatasetManifest& m) {
  json topo = json::array();
  for (const auto& poly : m.topology.polygons) topo.push_back(poly);
  return {{"type", "header"},
          {"schema_version", kManifestSchemaVersion},
          {"name", m.name},
          {"num_keypoints", m.num_keypoints},
          {"keypoint_names", m.keypoint_names},
          {"image_size", {m.target_width, m.target_height}},
          {"topology", topo}};
}

json RecordToJson(const ManifestRecord& r) {
  json pts = json::array();
  for (const Point& p : r.keypoints.coords) pts.push_back({p.x, p.y});
  json vis = json::array();
  for (uint8_t v : r.keypoints.visible) vis.push_back(v ? 1 : 0);
  return {{"type", "record"},   {"image", r.image},
          {"size", {r.width, r.height}}, {"keypoints", pts},
          {"visible", vis},     {"subject", r.subject},
          {"split", SplitName(r.split)}};
}

absl::StatusOr<ManifestRecord> RecordFromJson(const json& j, int line) {
  ManifestRecord r;
  try {
    r.image = j.at("image").get<std::string>();
    r.subject = j.at("subject").get<std::string>();
    auto split = ParseSplit(j.at("split").get<std::string>());
    if (!split.ok()) return split.status();
    r.split = *split;
    r.width = j.at("size").at(0).get<int>();
    r.height = j.at("size").at(1).get<int>();
    for (const auto& p : j.at("keypoints")) {
      r.keypoints.coords.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    if (j.contains("visible")) {
      for (const auto& v : j.at("visible")) {
        r.keypoints.visible.push_back(v.get<int>() ? 1 : 0);
      }
    } else {
      r.keypoints.visible.assign(r.keypoints.coords.size(), 1);
    }
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("manifest line ", line, ": ", e.what()));
  }
  return r;
}

}  // namespace

absl::StatusOr<Split> ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown split '", std::string(name), "'"));
}

std::string SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

std::vector<const ManifestRecord*> DatasetManifest::RecordsInSplit(
    Split split) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(&r);
  }
  return out;
}

absl::Status ValidateManifest(const DatasetManifest& m, bool check_files) {
  if (m.num_keypoints < 1) {
    return absl::InvalidArgumentError("num_keypoints must be >= 1");
  }
  if (!m.keypoint_names.empty() &&
      static_cast<int>(m.keypoint_names.size()) != m.num_keypoints) {
    return absl::InvalidArgumentError("keypoint_names length differs from K");
  }
  if (m.target_width <= 0 || m.target_height <= 0) {
    return absl::InvalidArgumentError("image_size must be positive");
  }
  if (auto s = ValidateTopology(m.topology, m.num_keypoints); !s.ok()) return s;
  std::map<std::string, Split> subject_split;
  std::vector<std::string> missing;
  for (size_t i = 0; i < m.records.size(); ++i) {
    const ManifestRecord& r = m.records[i];
    if (r.keypoints.size() != m.num_keypoints ||
        r.keypoints.visible.size() != r.keypoints.coords.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("record ", i, " (", r.image, ") has ", r.keypoints.size(),
                       " keypoints, header declares K=", m.num_keypoints));
    }
    for (const Point& p : r.keypoints.coords) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        return absl::InvalidArgumentError(
            absl::StrCat("record ", i, " has a non-finite coordinate"));
      }
    }
    if (r.width <= 0 || r.height <= 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("record ", i, " has a non-positive size"));
    }
    auto [it, inserted] = subject_split.emplace(r.subject, r.split);
    if (!inserted && it->second != r.split) {
      return absl::FailedPreconditionError(absl::StrCat(
          "subject '", r.subject, "' appears in both ", SplitName(it->second),
          " and ", SplitName(r.split)));
    }
    if (check_files && !fs::exists(Resolve(m, r.image))) {
      missing.push_back(Resolve(m, r.image).string());
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& p : missing) absl::StrAppend(&list, "\n  ", p);
    return absl::NotFoundError(
        absl::StrCat(missing.size(), " image file(s) missing:", list));
  }
  return absl::OkStatus();
}

absl::StatusOr<DatasetManifest> LoadManifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      return absl::InvalidArgumentError(
          absl::StrCat(path.string(), ":", line_no, ": ", e.what()));
    }
    const std::string type = j.value("type", "");
    if (!have_header) {
      if (type != "header") {
        return absl::InvalidArgumentError("manifest must start with a header");
      }
      try {
        const int version = j.at("schema_version").get<int>();
        if (version != kManifestSchemaVersion) {
          return absl::UnimplementedError(
              absl::StrCat("unsupported manifest schema_version ", version));
        }
        m.name = j.value("name", "");
        m.num_keypoints = j.at("num_keypoints").get<int>();
        m.keypoint_names =
            j.value("keypoint_names", std::vector<std::string>{});
        m.target_width = j.at("image_size").at(0).get<int>();
        m.target_height = j.at("image_size").at(1).get<int>();
        if (j.contains("topology")) {
          m.topology.polygons =
              j.at("topology").get<std::vector<std::vector<int>>>();
        }
      } catch (const json::exception& e) {
        return absl::InvalidArgumentError(
            absl::StrCat("manifest header: ", e.what()));
      }
      have_header = true;
      continue;
    }
    if (type != "record") {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", line_no, ": expected a record"));
    }
    auto rec = RecordFromJson(j, line_no);
    if (!rec.ok()) return rec.status();
    m.records.push_back(std::move(*rec));
  }
  if (!have_header) return absl::InvalidArgumentError("empty manifest");
  if (auto s = ValidateManifest(m, /*check_files=*/true); !s.ok()) return s;
  return m;
}

absl::Status WriteManifest(const DatasetManifest& m, const fs::path& path) {
  if (auto s = ValidateManifest(m, /*check_files=*/false); !s.ok()) return s;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) return absl::PermissionDeniedError(absl::StrCat("cannot write ", path.string()));
  out << HeaderToJson(m).dump() << "\n";
  for (const auto& r : m.records) out << RecordToJson(r).dump() << "\n";
  return out.good() ? absl::OkStatus()
                    : absl::DataLossError("manifest write failed");
}

void AssignSubjectSplits(std::vector<ManifestRecord>& records,
                         double train_fraction, double val_fraction,
                         uint64_t seed) {
  std::vector<std::string> subjects;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.subject).second) subjects.push_back(r.subject);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  const size_t n = subjects.size();
  const size_t n_train = static_cast<size_t>(std::llround(train_fraction * n));
  const size_t n_val = std::min(
      n - std::min(n, n_train), static_cast<size_t>(std::llround(val_fraction * n)));
  std::map<std::string, Split> assignment;
  for (size_t i = 0; i < n; ++i) {
    assignment[subjects[i]] = i < n_train           ? Split::kTrain
                              : i < n_train + n_val ? Split::kVal
                                                    : Split::kTest;
  }
  for (auto& r : records) r.split = assignment[r.subject];
}

absl::StatusOr<Image> DecodePng(const std::string& bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    return absl::InvalidArgumentError(
        absl::StrCat("not a decodable PNG: ", png.message));
  }
  png.format = PNG_FORMAT_GRAY;
  if (png.width == 0 || png.height == 0) {
    png_image_free(&png);
    return absl::InvalidArgumentError("zero-sized PNG");
  }
  std::vector<uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    return absl::InvalidArgumentError(absl::StrCat("PNG decode failed: ", png.message));
  }
  Image img(1, static_cast<int>(png.width), static_cast<int>(png.height));
  for (size_t i = 0; i < buffer.size(); ++i) img.pixels[i] = buffer[i] / 255.0f;
  return img;
}

absl::StatusOr<std::string> EncodePng(const Image& image) {
  if (image.channels != 1 || image.width <= 0 || image.height <= 0) {
    return absl::InvalidArgumentError("EncodePng expects a non-empty gray image");
  }
  std::vector<uint8_t> gray(image.pixels.size());
  for (size_t i = 0; i < gray.size(); ++i) {
    gray[i] = static_cast<uint8_t>(
        std::lround(std::clamp(image.pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, gray.data(), 0,
                                 nullptr)) {
    return absl::InternalError(absl::StrCat("PNG sizing failed: ", png.message));
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, gray.data(), 0,
                                 nullptr)) {
    return absl::InternalError(absl::StrCat("PNG encode failed: ", png.message));
  }
  out.resize(size);
  return out;
}

absl::StatusOr<Image> ReadPng(const fs::path& path) {
  auto bytes = ReadFile(path);
  if (!bytes.ok()) return bytes.status();
  auto img = DecodePng(*bytes);
  if (!img.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path.string(), ": ", img.status().message()));
  }
  return img;
}

absl::Status WritePng(const Image& image, const fs::path& path) {
  auto bytes = EncodePng(image);
  if (!bytes.ok()) return bytes.status();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(bytes->data(), static_cast<std::streamsize>(bytes->size()));
  return out.good() ? absl::OkStatus()
                    : absl::DataLossError(absl::StrCat("cannot write ", path.string()));
}

absl::StatusOr<std::pair<int, int>> PngSize(const fs::path& path) {
  auto bytes = ReadFile(path);
  if (!bytes.ok()) return bytes.status();
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes->data(), bytes->size())) {
    return absl::InvalidArgumentError(
        absl::StrCat(path.string(), ": not a PNG: ", png.message));
  }
  std::pair<int, int> size{static_cast<int>(png.width),
                           static_cast<int>(png.height)};
  png_image_free(&png);
  return size;
}

KeypointSet ScaleKeypoints(const KeypointSet& kps, double sx, double sy) {
  KeypointSet out = kps;
  for (Point& p : out.coords) {
    p.x *= sx;
    p.y *= sy;
  }
  return out;
}

absl::StatusOr<Image> ResizeImage(const Image& image, int width, int height) {
  if (image.width <= 0 || image.height <= 0) {
    return absl::InvalidArgumentError("cannot resize a zero-sized image");
  }
  if (width <= 0 || height <= 0) {
    return absl::InvalidArgumentError("resize target must be positive");
  }
  if (width == image.width && height == image.height) return image;
  Image out(image.channels, width, height);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < height; ++y) {
      const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
      const int y0 = std::min(static_cast<int>(fy), image.height - 1);
      const int y1 = std::min(y0 + 1, image.height - 1);
      const double wy = fy - y0;
      for (int x = 0; x < width; ++x) {
        const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
        const int x0 = std::min(static_cast<int>(fx), image.width - 1);
        const int x1 = std::min(x0 + 1, image.width - 1);
        const double wx = fx - x0;
        const double top = image.at(c, x0, y0) * (1 - wx) + image.at(c, x1, y0) * wx;
        const double bot = image.at(c, x0, y1) * (1 - wx) + image.at(c, x1, y1) * wx;
        out.at(c, x, y) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

absl::StatusOr<ResizedSample> ResizeSample(const Image& image,
                                           const KeypointSet& kps, int width,
                                           int height) {
  auto resized = ResizeImage(image, width, height);
  if (!resized.ok()) return resized.status();
  return ResizedSample{
      std::move(*resized),
      ScaleKeypoints(kps, static_cast<double>(width) / image.width,
                     static_cast<double>(height) / image.height)};
}

absl::StatusOr<Sample> LoadSample(const DatasetManifest& m,
                                  const ManifestRecord& r) {
  auto img = ReadPng(Resolve(m, r.image));
  if (!img.ok()) return img.status();
  if (img->width != r.width || img->height != r.height) {
    return absl::FailedPreconditionError(absl::StrCat(
        r.image, " is ", img->width, "x", img->height, " but the manifest says ",
        r.width, "x", r.height));
  }
  auto resized = ResizeSample(*img, r.keypoints, m.target_width, m.target_height);
  if (!resized.ok()) return resized.status();
  Sample s{r.image, std::move(resized->image), std::move(resized->keypoints),
           r.width, r.height, r.keypoints};
  // Clamped at ingestion so every visible point lies inside the image.
  ClampToImage(s.keypoints, m.target_width, m.target_height);
  return s;
}

absl::StatusOr<std::vector<Sample>> LoadSplit(const DatasetManifest& m,
                                              Split split) {
  std::vector<Sample> out;
  for (const ManifestRecord* r : m.RecordsInSplit(split)) {
    auto s = LoadSample(m, *r);
    if (!s.ok()) return s.status();
    out.push_back(std::move(*s));
  }
  return out;
}

Topology AasceTopology(int num_vertebrae) {
  Topology t;
  for (int v = 0; v < num_vertebrae; ++v) {
    t.polygons.push_back({4 * v, 4 * v + 1, 4 * v + 3, 4 * v + 2});
  }
  return t;
}

absl::StatusOr<DatasetManifest> ConvertAasce(const AasceConvertOptions& opt) {
  constexpr int kPoints = 68;
  auto names_text = ReadFile(opt.filenames_csv);
  if (!names_text.ok()) return names_text.status();
  auto marks_text = ReadFile(opt.landmarks_csv);
  if (!marks_text.ok()) return marks_text.status();

  std::vector<std::string> names;
  {
    std::istringstream in(*names_text);
    std::string line;
    while (std::getline(in, line)) {
      line.erase(std::remove(line.begin(), line.end(), '\r'), line.end());
      if (!line.empty()) names.push_back(line.substr(0, line.find(',')));
    }
  }
  std::vector<std::vector<double>> rows;
  {
    std::istringstream in(*marks_text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::vector<double> row;
      std::istringstream cells(line);
      std::string cell;
      while (std::getline(cells, cell, ',')) {
        double v = 0.0;
        if (!absl::SimpleAtod(cell, &v)) {
          return absl::InvalidArgumentError(absl::StrCat(
              "landmark row ", rows.size(), ": not a number: '", cell, "'"));
        }
        row.push_back(v);
      }
      if (row.size() != 2 * kPoints) {
        return absl::InvalidArgumentError(absl::StrCat(
            "landmark row ", rows.size(), " has ", row.size(), " values, expected ",
            2 * kPoints));
      }
      rows.push_back(std::move(row));
    }
  }
  if (names.size() != rows.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        names.size(), " filenames but ", rows.size(), " landmark rows"));
  }
  DatasetManifest m;
  m.name = "aasce";
  m.num_keypoints = kPoints;
  m.target_width = opt.target_width;
  m.target_height = opt.target_height;
  m.topology = AasceTopology(kPoints / 4);
  static constexpr const char* kCorner[] = {"tl", "tr", "bl", "br"};
  for (int i = 0; i < kPoints; ++i) {
    m.keypoint_names.push_back(absl::StrCat("v", i / 4, "_", kCorner[i % 4]));
  }
  m.base_dir = opt.image_dir;
  for (size_t i = 0; i < names.size(); ++i) {
    auto size = PngSize(opt.image_dir / names[i]);
    if (!size.ok()) return size.status();
    ManifestRecord r;
    r.image = names[i];
    r.width = size->first;
    r.height = size->second;
    r.subject = fs::path(names[i]).stem().string();
    std::vector<Point> pts;
    for (int k = 0; k < kPoints; ++k) {
      pts.push_back({rows[i][k] * r.width, rows[i][kPoints + k] * r.height});
    }
    r.keypoints = KeypointSet(std::move(pts));
    for (int k = 0; k < kPoints; ++k) {
      const Point& p = r.keypoints.coords[k];
      if (p.x < 0 || p.y < 0 || p.x >= r.width || p.y >= r.height) {
        r.keypoints.visible[k] = 0;
      }
    }
    m.records.push_back(std::move(r));
  }
  if (opt.split == "auto") {
    AssignSubjectSplits(m.records, 0.7, 0.15, opt.seed);
  } else {
    auto split = ParseSplit(opt.split);
    if (!split.ok()) return split.status();
    for (auto& r : m.records) r.split = *split;
  }
  return m;
}

}  // namespace ikp
