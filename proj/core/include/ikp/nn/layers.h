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

#ifndef IKP_NN_LAYERS_H_
#define IKP_NN_LAYERS_H_

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ikp/nn/autograd.h"

namespace ikp::nn {

// A named trainable tensor. Names are stable and used as checkpoint keys.
struct Parameter {
  std::string name;
  Var var;
};

class ParameterList {
 public:
  Var Add(std::string name, Tensor init);
  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }
  size_t NumScalars() const;
  void ZeroGrad();

 private:
  std::vector<Parameter> items_;
};

class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  // He-normal weights, zero bias.
  Conv2dLayer(ParameterList& params, const std::string& name, int in_channels,
              int out_channels, int kernel, int stride, std::mt19937_64& rng);

  Var operator()(const Var& x) const {
    return Conv2d(x, weight_, bias_, stride_, padding_);
  }
  int out_channels() const { return weight_.value().dim(0); }

 private:
  Var weight_;
  Var bias_;
  int stride_ = 1;
  int padding_ = 0;
};

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(ParameterList& params, const std::string& name, int in_features,
              int out_features, std::mt19937_64& rng);

  Var operator()(const Var& x) const { return Linear(x, weight_, bias_); }

 private:
  Var weight_;
  Var bias_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(ParameterList& params, AdamOptions options);

  // Applies one update from accumulated gradients. Parameters without a
  // gradient are skipped.
  void Step();
  int64_t steps() const { return steps_; }

 private:
  ParameterList& params_;
  AdamOptions options_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  int64_t steps_ = 0;
};

}  // namespace ikp::nn

#endif  // IKP_NN_LAYERS_H_
