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

#include "ikp/serialization.h"

#include <cmath>
#include <limits>
#include <string>

#include "absl/strings/str_cat.h"

namespace ikp {
namespace {

using nlohmann::json;

// JSON has no infinity; an unbounded std is written as null.
json FiniteOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double FromFiniteOrNull(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

template <typename T, typename Fn>
absl::StatusOr<T> Parse(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("malformed ", what, ": ", e.what()));
  }
}

template <typename T>
void Get(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

json ToJson(const CodecConfig& c) {
  return {{"sigma", c.sigma},
          {"window_radius", c.window_radius},
          {"temperature", c.temperature}};
}

json ToJson(const ModelConfig& c) {
  return {{"num_keypoints", c.num_keypoints},
          {"image_channels", c.image_channels},
          {"width", c.width},
          {"height", c.height},
          {"backbone", c.backbone},
          {"encoder_channels", c.encoder_channels},
          {"gated_channels", c.gated_channels},
          {"gate_projection_channels", c.gate_projection_channels},
          {"gate_reduction", c.gate_reduction},
          {"head_channels", c.head_channels},
          {"gate_enabled", c.gate_enabled},
          {"gate_pooling", c.gate_pooling == GatePooling::kMax ? "max" : "avg"},
          {"gate_activation",
           c.gate_activation == GateActivation::kSigmoid ? "sigmoid" : "softmax"},
          {"lambda_total", c.lambda_total}};
}

json ToJson(const MorphologyConfig& c) {
  return {{"t_d", c.t_d},
          {"t_a", c.t_a},
          {"lambda_m", c.lambda_m},
          {"mode", SelectionModeName(c.mode)},
          {"top_k", c.top_k},
          {"triple_window", c.triple_window}};
}

json ToJson(const RelationSets& r) {
  json pairs = json::array(), triples = json::array();
  for (const auto& p : r.pairs) pairs.push_back({p.m, p.n});
  for (const auto& t : r.triples) triples.push_back({t.m, t.n, t.l});
  return {{"pairs", pairs}, {"triples", triples}};
}

json ToJson(const RelationStats& s) {
  json pairs = json::array(), triples = json::array();
  for (const auto& p : s.pairs) {
    pairs.push_back({{"m", p.relation.m},
                     {"n", p.relation.n},
                     {"mean", p.mean},
                     {"std", FiniteOrNull(p.std)},
                     {"count", p.count},
                     {"available", p.available}});
  }
  for (const auto& t : s.triples) {
    triples.push_back({{"m", t.relation.m},
                       {"n", t.relation.n},
                       {"l", t.relation.l},
                       {"mean_ux", t.mean_ux},
                       {"mean_uy", t.mean_uy},
                       {"std", FiniteOrNull(t.std)},
                       {"count", t.count},
                       {"available", t.available}});
  }
  return {{"num_keypoints", s.num_keypoints},
          {"sample_count", s.sample_count},
          {"triple_window", s.triple_window},
          {"pairs", pairs},
          {"triples", triples}};
}

json ToJson(const Topology& t) { return t.polygons; }

absl::StatusOr<CodecConfig> CodecConfigFromJson(const json& j) {
  auto c = Parse<CodecConfig>("codec config", [&] {
    CodecConfig c;
    Get(j, "sigma", c.sigma);
    Get(j, "window_radius", c.window_radius);
    Get(j, "temperature", c.temperature);
    return c;
  });
  if (!c.ok()) return c;
  if (auto s = c->Validate(); !s.ok()) return s;
  return c;
}

absl::StatusOr<ModelConfig> ModelConfigFromJson(const json& j) {
  auto c = Parse<ModelConfig>("model config", [&] {
    ModelConfig c;
    Get(j, "num_keypoints", c.num_keypoints);
    Get(j, "image_channels", c.image_channels);
    Get(j, "width", c.width);
    Get(j, "height", c.height);
    Get(j, "backbone", c.backbone);
    Get(j, "encoder_channels", c.encoder_channels);
    Get(j, "gated_channels", c.gated_channels);
    Get(j, "gate_projection_channels", c.gate_projection_channels);
    Get(j, "gate_reduction", c.gate_reduction);
    Get(j, "head_channels", c.head_channels);
    Get(j, "gate_enabled", c.gate_enabled);
    Get(j, "lambda_total", c.lambda_total);
    std::string pooling = "max", activation = "sigmoid";
    Get(j, "gate_pooling", pooling);
    Get(j, "gate_activation", activation);
    if (pooling != "max" && pooling != "avg") {
      throw json::other_error::create(501, "gate_pooling must be max|avg", &j);
    }
    if (activation != "sigmoid" && activation != "softmax") {
      throw json::other_error::create(501, "gate_activation must be sigmoid|softmax",
                                      &j);
    }
    c.gate_pooling = pooling == "max" ? GatePooling::kMax : GatePooling::kAverage;
    c.gate_activation =
        activation == "sigmoid" ? GateActivation::kSigmoid : GateActivation::kSoftmax;
    return c;
  });
  if (!c.ok()) return c;
  if (auto s = c->Validate(); !s.ok()) return s;
  return c;
}

absl::StatusOr<MorphologyConfig> MorphologyConfigFromJson(const json& j) {
  std::string mode_name;
  auto c = Parse<MorphologyConfig>("morphology config", [&] {
    MorphologyConfig c;
    Get(j, "t_d", c.t_d);
    Get(j, "t_a", c.t_a);
    Get(j, "lambda_m", c.lambda_m);
    Get(j, "top_k", c.top_k);
    Get(j, "triple_window", c.triple_window);
    mode_name = SelectionModeName(c.mode);
    Get(j, "mode", mode_name);
    return c;
  });
  if (!c.ok()) return c;
  auto mode = ParseSelectionMode(mode_name);
  if (!mode.ok()) return mode.status();
  c->mode = *mode;
  if (auto s = c->Validate(); !s.ok()) return s;
  return c;
}

absl::StatusOr<RelationSets> RelationSetsFromJson(const json& j) {
  return Parse<RelationSets>("relation sets", [&] {
    RelationSets r;
    for (const auto& p : j.at("pairs")) {
      r.pairs.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    }
    for (const auto& t : j.at("triples")) {
      r.triples.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    }
    return r;
  });
}

absl::StatusOr<RelationStats> RelationStatsFromJson(const json& j) {
  return Parse<RelationStats>("relation stats", [&] {
    RelationStats s;
    s.num_keypoints = j.at("num_keypoints").get<int>();
    s.sample_count = j.at("sample_count").get<int>();
    s.triple_window = j.at("triple_window").get<int>();
    for (const auto& p : j.at("pairs")) {
      PairStat ps;
      ps.relation = {p.at("m").get<int>(), p.at("n").get<int>()};
      ps.mean = p.at("mean").get<double>();
      ps.std = FromFiniteOrNull(p.at("std"));
      ps.count = p.at("count").get<int>();
      ps.available = p.at("available").get<bool>();
      s.pairs.push_back(ps);
    }
    for (const auto& t : j.at("triples")) {
      TripleStat ts;
      ts.relation = {t.at("m").get<int>(), t.at("n").get<int>(), t.at("l").get<int>()};
      ts.mean_ux = t.at("mean_ux").get<double>();
      ts.mean_uy = t.at("mean_uy").get<double>();
      ts.std = FromFiniteOrNull(t.at("std"));
      ts.count = t.at("count").get<int>();
      ts.available = t.at("available").get<bool>();
      s.triples.push_back(ts);
    }
    return s;
  });
}

absl::StatusOr<Topology> TopologyFromJson(const json& j) {
  return Parse<Topology>("topology", [&] {
    Topology t;
    t.polygons = j.get<std::vector<std::vector<int>>>();
    return t;
  });
}

}  // namespace ikp
