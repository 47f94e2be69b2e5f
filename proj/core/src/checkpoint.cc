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

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "ikp/serialization.h"

namespace ikp {
namespace {

using nlohmann::json;

constexpr std::array<char, 8> kMagic = {'I', 'K', 'P', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void WriteLe(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool ReadLe(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

absl::Status SaveCheckpoint(const std::filesystem::path& path, const Model& model,
                            const CheckpointInfo& info) {
  json params = json::array();
  for (const auto& p : model.parameters().items()) {
    params.push_back({{"name", p.name}, {"shape", p.var.value().shape()}});
  }
  const json meta = {{"model", ToJson(model.config())},
                     {"codec", ToJson(info.codec)},
                     {"morphology", ToJson(info.morphology)},
                     {"relations", ToJson(info.relations)},
                     {"extra", info.extra},
                     {"parameters", params}};
  const std::string text = meta.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", tmp.string()));
    out.write(kMagic.data(), kMagic.size());
    WriteLe<uint32_t>(out, kCheckpointVersion);
    WriteLe<uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.parameters().items()) {
      const auto& v = p.var.value().values();
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(float)));
    }
    if (!out) return absl::DataLossError(absl::StrCat("short write to ", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) return absl::UnavailableError(absl::StrCat("rename failed: ", ec.message()));
  return absl::OkStatus();
}

absl::StatusOr<LoadedCheckpoint> LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    return absl::InvalidArgumentError(
        absl::StrCat(path.string(), " is not an ikp checkpoint"));
  }
  uint32_t version = 0;
  uint64_t length = 0;
  if (!ReadLe(in, version) || !ReadLe(in, length)) {
    return absl::DataLossError("truncated checkpoint header");
  }
  if (version != kCheckpointVersion) {
    return absl::FailedPreconditionError(absl::StrCat(
        "checkpoint format version ", version, " is not supported (expected ",
        kCheckpointVersion, ")"));
  }
  if (length > (1u << 26)) return absl::DataLossError("implausible metadata length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
    return absl::DataLossError("truncated checkpoint metadata");
  }
  json meta = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (meta.is_discarded() || !meta.is_object()) {
    return absl::DataLossError("checkpoint metadata is not valid JSON");
  }

  auto config = ModelConfigFromJson(meta.value("model", json::object()));
  if (!config.ok()) return config.status();
  LoadedCheckpoint ck;
  auto codec = CodecConfigFromJson(meta.value("codec", json::object()));
  if (!codec.ok()) return codec.status();
  auto morph = MorphologyConfigFromJson(meta.value("morphology", json::object()));
  if (!morph.ok()) return morph.status();
  auto rel = RelationSetsFromJson(meta.value("relations", json::object()));
  if (!rel.ok()) return rel.status();
  ck.info = {*codec, *morph, std::move(*rel), meta.value("extra", json::object())};

  auto model = Model::Create(*config, /*seed=*/0);
  if (!model.ok()) return model.status();
  auto& items = (*model)->parameters().items();
  const json& listed = meta.value("parameters", json::array());
  if (listed.size() != items.size()) {
    return absl::FailedPreconditionError(absl::StrCat(
        "checkpoint lists ", listed.size(), " parameters, model has ", items.size()));
  }
  for (size_t i = 0; i < items.size(); ++i) {
    const std::string name = listed[i].value("name", "");
    const auto shape = listed[i].value("shape", std::vector<int>{});
    nn::Tensor& t = items[i].var.mutable_value();
    if (name != items[i].name || shape != t.shape()) {
      return absl::FailedPreconditionError(absl::StrCat(
          "parameter ", i, " mismatch: checkpoint has ", name, ", model expects ",
          items[i].name, " ", t.ShapeString()));
    }
    if (!in.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(float)))) {
      return absl::DataLossError(absl::StrCat("truncated data for ", name));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    return absl::DataLossError("trailing bytes after parameter data");
  }
  ck.model = std::move(*model);
  return ck;
}

}  // namespace ikp
