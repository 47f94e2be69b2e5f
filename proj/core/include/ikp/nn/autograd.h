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

// Minimal tape-free reverse-mode autodiff. Every Var owns a node holding its
// value, its gradient and a closure that pushes the gradient to its parents.
// Backward() topologically sorts the graph reachable from a scalar root.

#ifndef IKP_NN_AUTOGRAD_H_
#define IKP_NN_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ikp/nn/tensor.h"

namespace ikp::nn {

struct Node {
  Tensor value;
  Tensor grad;  // Allocated on first accumulation.
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& MutableGrad();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->value.shape(); }

  void ZeroGrad();
  // Seeds d(root)/d(root) = 1 and propagates. The value must be a scalar.
  void Backward();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Creates an op result. If gradients are disabled or no parent requires a
// gradient the parents and closure are dropped.
Var MakeResult(Tensor value, std::vector<Var> parents,
               std::function<void(Node&)> backward);

bool GradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// --- Ops -----------------------------------------------------------------

// x: (N, Cin, H, W); weight: (Cout, Cin, k, k); bias: (Cout).
Var Conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int padding);
Var Relu(const Var& x);
Var Sigmoid(const Var& x);
Var Add(const Var& a, const Var& b);
Var Scale(const Var& a, float factor);
Var ConcatChannels(std::span<const Var> inputs);
// Non-overlapping average pooling with window = stride = factor.
Var AvgPool(const Var& x, int factor);
// Bilinear resize with half-pixel centers (align_corners = false).
Var UpsampleBilinear(const Var& x, int out_height, int out_width);
// (N, C, H, W) -> (N, C). Gradient routed to the first maximal position.
Var GlobalMaxPool(const Var& x);
// (N, C, H, W) -> (N, C).
Var GlobalAvgPool(const Var& x);
// x: (N, in); weight: (out, in); bias: (out).
Var Linear(const Var& x, const Var& weight, const Var& bias);
// x: (N, C, H, W) scaled per (n, c) by gate: (N, C).
Var ChannelScale(const Var& x, const Var& gate);
// Softmax over the channel axis of (N, C).
Var Softmax(const Var& x);
// Mean binary cross-entropy; pred is clamped to [eps, 1 - eps].
Var BinaryCrossEntropy(const Var& pred, const Tensor& target, float eps);

}  // namespace ikp::nn

#endif  // IKP_NN_AUTOGRAD_H_
