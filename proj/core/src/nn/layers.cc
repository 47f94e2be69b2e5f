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

#include "ikp/nn/layers.h"

#include <cmath>

#include <glog/logging.h>

namespace ikp::nn {
namespace {

Tensor HeNormal(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> dist(0.0f,
                                       std::sqrt(2.0f / static_cast<float>(fan_in)));
  for (float& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

Var ParameterList::Add(std::string name, Tensor init) {
  for (const auto& p : items_) CHECK_NE(p.name, name) << "duplicate parameter";
  Var v(std::move(init), /*requires_grad=*/true);
  items_.push_back({std::move(name), v});
  return v;
}

size_t ParameterList::NumScalars() const {
  size_t n = 0;
  for (const auto& p : items_) n += p.var.value().size();
  return n;
}

void ParameterList::ZeroGrad() {
  for (auto& p : items_) p.var.ZeroGrad();
}

Conv2dLayer::Conv2dLayer(ParameterList& params, const std::string& name,
                         int in_channels, int out_channels, int kernel,
                         int stride, std::mt19937_64& rng)
    : stride_(stride), padding_(kernel / 2) {
  weight_ = params.Add(name + ".weight",
                       HeNormal({out_channels, in_channels, kernel, kernel},
                                in_channels * kernel * kernel, rng));
  bias_ = params.Add(name + ".bias", Tensor({out_channels}));
}

LinearLayer::LinearLayer(ParameterList& params, const std::string& name,
                         int in_features, int out_features,
                         std::mt19937_64& rng) {
  weight_ = params.Add(name + ".weight",
                       HeNormal({out_features, in_features}, in_features, rng));
  bias_ = params.Add(name + ".bias", Tensor({out_features}));
}

Adam::Adam(ParameterList& params, AdamOptions options)
    : params_(params), options_(options) {
  for (const auto& p : params_.items()) {
    first_moment_.push_back(Tensor::Like(p.var.value()));
    second_moment_.push_back(Tensor::Like(p.var.value()));
  }
}

void Adam::Step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const double step = options_.learning_rate * std::sqrt(c2) / c1;
  auto& items = params_.items();
  for (size_t i = 0; i < items.size(); ++i) {
    Var& var = items[i].var;
    if (!var.has_grad()) continue;
    Tensor& value = var.mutable_value();
    const Tensor& grad = var.grad();
    Tensor& m = first_moment_[i];
    Tensor& v = second_moment_[i];
    for (size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      m[j] = static_cast<float>(options_.beta1 * m[j] + (1.0 - options_.beta1) * g);
      v[j] = static_cast<float>(options_.beta2 * v[j] +
                                (1.0 - options_.beta2) * g * g);
      value[j] -= static_cast<float>(step * m[j] /
                                     (std::sqrt(static_cast<double>(v[j])) +
                                      options_.epsilon * std::sqrt(c2)));
    }
  }
}

}  // namespace ikp::nn
