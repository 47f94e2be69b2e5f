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

#include "ikp/nn/autograd.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>
#include <utility>

#include <Eigen/Core>
#include <glog/logging.h>

namespace ikp::nn {
namespace {

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

thread_local bool grad_enabled = true;

void CheckRank(const Tensor& t, int rank, const char* op) {
  CHECK_EQ(t.rank(), rank) << op << ": unexpected shape " << t.ShapeString();
}

// Unfolds one image (Cin, H, W) into (Cin*k*k, Ho*Wo) columns.
void Im2Col(const float* image, int channels, int height, int width, int k,
            int stride, int pad, int out_h, int out_w, float* cols) {
  const int out_size = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    const float* plane = image + static_cast<size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row =
            cols + static_cast<size_t>((c * k + ky) * k + kx) * out_size;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          float* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void Col2Im(const float* cols, int channels, int height, int width, int k,
            int stride, int pad, int out_h, int out_w, float* image) {
  const int out_size = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    float* plane = image + static_cast<size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row =
            cols + static_cast<size_t>((c * k + ky) * k + kx) * out_size;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          float* dst = plane + static_cast<size_t>(iy) * width;
          const float* src = row + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

struct ResizeTap {
  int lo;
  int hi;
  float frac;
};

std::vector<ResizeTap> ResizeTaps(int in_size, int out_size) {
  std::vector<ResizeTap> taps(static_cast<size_t>(out_size));
  const float scale = static_cast<float>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    float src = (o + 0.5f) * scale - 0.5f;
    if (src < 0.0f) src = 0.0f;
    int lo = static_cast<int>(src);
    if (lo > in_size - 1) lo = in_size - 1;
    const int hi = std::min(lo + 1, in_size - 1);
    taps[static_cast<size_t>(o)] = {lo, hi, src - static_cast<float>(lo)};
  }
  return taps;
}

}  // namespace

Tensor& Node::MutableGrad() {
  if (grad.empty()) grad = Tensor::Like(value);
  return grad;
}

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::ZeroGrad() {
  if (!node_->grad.empty()) node_->grad.Fill(0.0f);
}

void Var::Backward() {
  CHECK_EQ(node_->value.size(), 1u) << "Backward() needs a scalar root";
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS.
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  node_->MutableGrad().Fill(1.0f);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

bool GradEnabled() { return grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

Var MakeResult(Tensor value, std::vector<Var> parents,
               std::function<void(Node&)> backward) {
  Var out(std::move(value));
  if (!grad_enabled) return out;
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const Var& p) { return p.requires_grad(); });
  if (!needs) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (const Var& p : parents) node.parents.push_back(p.node());
  node.backward = std::move(backward);
  return out;
}

Var Conv2d(const Var& x, const Var& weight, const Var& bias, int stride,
           int padding) {
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  CheckRank(in, 4, "Conv2d");
  CheckRank(w, 4, "Conv2d weight");
  const int batch = in.dim(0), cin = in.dim(1), height = in.dim(2),
            width = in.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  CHECK_EQ(w.dim(1), cin) << "Conv2d channel mismatch";
  CHECK_EQ(w.dim(3), k);
  CHECK_EQ(bias.value().size(), static_cast<size_t>(cout));
  const int out_h = (height + 2 * padding - k) / stride + 1;
  const int out_w = (width + 2 * padding - k) / stride + 1;
  CHECK_GT(out_h, 0);
  CHECK_GT(out_w, 0);
  const int patch = cin * k * k;
  const int out_size = out_h * out_w;
  const bool direct = (k == 1 && stride == 1 && padding == 0);

  Tensor out({batch, cout, out_h, out_w});
  FloatBuffer cols(direct ? 0 : static_cast<size_t>(patch) * out_size);
  ConstMatrixMap wmat(w.data(), cout, patch);
  for (int n = 0; n < batch; ++n) {
    const float* image = in.data() + static_cast<size_t>(n) * cin * height * width;
    const float* col_ptr = image;
    if (!direct) {
      Im2Col(image, cin, height, width, k, stride, padding, out_h, out_w,
             cols.data());
      col_ptr = cols.data();
    }
    MatrixMap y(out.data() + static_cast<size_t>(n) * cout * out_size, cout,
                out_size);
    y.noalias() = wmat * ConstMatrixMap(col_ptr, patch, out_size);
    for (int c = 0; c < cout; ++c) y.row(c).array() += bias.value()[c];
  }

  return MakeResult(
      std::move(out), {x, weight, bias},
      [x, weight, bias, stride, padding, batch, cin, height, width, cout, k,
       out_h, out_w, patch, out_size, direct](Node& self) {
        const Tensor& in = x.value();
        const Tensor& w = weight.value();
        const Tensor& gy = self.grad;
        ConstMatrixMap wmat(w.data(), cout, patch);
        FloatBuffer cols(direct ? 0
                                       : static_cast<size_t>(patch) * out_size);
        FloatBuffer dcols(static_cast<size_t>(patch) * out_size);
        for (int n = 0; n < batch; ++n) {
          ConstMatrixMap dy(gy.data() + static_cast<size_t>(n) * cout * out_size,
                            cout, out_size);
          const float* image =
              in.data() + static_cast<size_t>(n) * cin * height * width;
          if (weight.requires_grad()) {
            const float* col_ptr = image;
            if (!direct) {
              Im2Col(image, cin, height, width, k, stride, padding, out_h,
                     out_w, cols.data());
              col_ptr = cols.data();
            }
            MatrixMap dw(weight.node()->MutableGrad().data(), cout, patch);
            dw.noalias() += dy * ConstMatrixMap(col_ptr, patch, out_size).transpose();
          }
          if (bias.requires_grad()) {
            Tensor& db = bias.node()->MutableGrad();
            for (int c = 0; c < cout; ++c) db[c] += dy.row(c).sum();
          }
          if (x.requires_grad()) {
            float* dx = x.node()->MutableGrad().data() +
                        static_cast<size_t>(n) * cin * height * width;
            if (direct) {
              MatrixMap(dx, patch, out_size).noalias() += wmat.transpose() * dy;
            } else {
              MatrixMap(dcols.data(), patch, out_size).noalias() =
                  wmat.transpose() * dy;
              Col2Im(dcols.data(), cin, height, width, k, stride, padding,
                     out_h, out_w, dx);
            }
          }
        }
      });
}

Var Relu(const Var& x) {
  Tensor out = x.value();
  for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return MakeResult(std::move(out), {x}, [x](Node& self) {
    Tensor& gx = x.node()->MutableGrad();
    const Tensor& in = x.value();
    for (size_t i = 0; i < in.size(); ++i) {
      if (in[i] > 0.0f) gx[i] += self.grad[i];
    }
  });
}

Var Sigmoid(const Var& x) {
  Tensor out = x.value();
  for (float& v : out.values()) {
    v = v >= 0.0f ? 1.0f / (1.0f + std::exp(-v))
                  : std::exp(v) / (1.0f + std::exp(v));
  }
  return MakeResult(std::move(out), {x}, [x](Node& self) {
    Tensor& gx = x.node()->MutableGrad();
    for (size_t i = 0; i < self.value.size(); ++i) {
      const float s = self.value[i];
      gx[i] += self.grad[i] * s * (1.0f - s);
    }
  });
}

Var Add(const Var& a, const Var& b) {
  CHECK(a.value().SameShape(b.value()))
      << "Add: " << a.value().ShapeString() << " vs " << b.value().ShapeString();
  Tensor out = a.value();
  out.AddInPlace(b.value());
  return MakeResult(std::move(out), {a, b}, [a, b](Node& self) {
    if (a.requires_grad()) a.node()->MutableGrad().AddInPlace(self.grad);
    if (b.requires_grad()) b.node()->MutableGrad().AddInPlace(self.grad);
  });
}

Var Scale(const Var& a, float factor) {
  Tensor out = a.value();
  for (float& v : out.values()) v *= factor;
  return MakeResult(std::move(out), {a}, [a, factor](Node& self) {
    Tensor& ga = a.node()->MutableGrad();
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += factor * self.grad[i];
  });
}

Var ConcatChannels(std::span<const Var> inputs) {
  CHECK(!inputs.empty());
  const Tensor& first = inputs[0].value();
  CheckRank(first, 4, "ConcatChannels");
  const int batch = first.dim(0), height = first.dim(2), width = first.dim(3);
  int total = 0;
  std::vector<int> offsets;
  for (const Var& v : inputs) {
    const Tensor& t = v.value();
    CheckRank(t, 4, "ConcatChannels");
    CHECK(t.dim(0) == batch && t.dim(2) == height && t.dim(3) == width)
        << "ConcatChannels: " << t.ShapeString() << " vs "
        << first.ShapeString();
    offsets.push_back(total);
    total += t.dim(1);
  }
  const size_t plane = static_cast<size_t>(height) * width;
  Tensor out({batch, total, height, width});
  for (size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& t = inputs[i].value();
    const size_t block = static_cast<size_t>(t.dim(1)) * plane;
    for (int n = 0; n < batch; ++n) {
      std::copy_n(t.data() + n * block, block,
                  out.data() + (static_cast<size_t>(n) * total + offsets[i]) * plane);
    }
  }
  std::vector<Var> parents(inputs.begin(), inputs.end());
  return MakeResult(
      std::move(out), parents,
      [parents, offsets, batch, total, plane](Node& self) {
        for (size_t i = 0; i < parents.size(); ++i) {
          if (!parents[i].requires_grad()) continue;
          Tensor& g = parents[i].node()->MutableGrad();
          const size_t block = static_cast<size_t>(g.dim(1)) * plane;
          for (int n = 0; n < batch; ++n) {
            const float* src =
                self.grad.data() + (static_cast<size_t>(n) * total + offsets[i]) * plane;
            float* dst = g.data() + n * block;
            for (size_t j = 0; j < block; ++j) dst[j] += src[j];
          }
        }
      });
}

Var AvgPool(const Var& x, int factor) {
  const Tensor& in = x.value();
  CheckRank(in, 4, "AvgPool");
  const int batch = in.dim(0), channels = in.dim(1);
  const int out_h = in.dim(2) / factor, out_w = in.dim(3) / factor;
  CHECK(out_h * factor == in.dim(2) && out_w * factor == in.dim(3))
      << "AvgPool factor " << factor << " does not divide " << in.ShapeString();
  Tensor out({batch, channels, out_h, out_w});
  const float inv = 1.0f / static_cast<float>(factor * factor);
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < in.dim(2); ++y)
        for (int xx = 0; xx < in.dim(3); ++xx)
          out.at(n, c, y / factor, xx / factor) += in.at(n, c, y, xx) * inv;
  return MakeResult(std::move(out), {x}, [x, factor, inv](Node& self) {
    Tensor& g = x.node()->MutableGrad();
    for (int n = 0; n < g.dim(0); ++n)
      for (int c = 0; c < g.dim(1); ++c)
        for (int y = 0; y < g.dim(2); ++y)
          for (int xx = 0; xx < g.dim(3); ++xx)
            g.at(n, c, y, xx) += self.grad.at(n, c, y / factor, xx / factor) * inv;
  });
}

Var UpsampleBilinear(const Var& x, int out_height, int out_width) {
  const Tensor& in = x.value();
  CheckRank(in, 4, "UpsampleBilinear");
  const int batch = in.dim(0), channels = in.dim(1), in_h = in.dim(2),
            in_w = in.dim(3);
  auto ty = ResizeTaps(in_h, out_height);
  auto tx = ResizeTaps(in_w, out_width);
  Tensor out({batch, channels, out_height, out_width});
  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < out_height; ++y) {
        const ResizeTap& a = ty[y];
        for (int xx = 0; xx < out_width; ++xx) {
          const ResizeTap& b = tx[xx];
          const float top = in.at(n, c, a.lo, b.lo) * (1 - b.frac) +
                            in.at(n, c, a.lo, b.hi) * b.frac;
          const float bottom = in.at(n, c, a.hi, b.lo) * (1 - b.frac) +
                               in.at(n, c, a.hi, b.hi) * b.frac;
          out.at(n, c, y, xx) = top * (1 - a.frac) + bottom * a.frac;
        }
      }
    }
  }
  return MakeResult(std::move(out), {x}, [x, ty, tx](Node& self) {
    Tensor& g = x.node()->MutableGrad();
    const Tensor& gy = self.grad;
    for (int n = 0; n < gy.dim(0); ++n) {
      for (int c = 0; c < gy.dim(1); ++c) {
        for (int y = 0; y < gy.dim(2); ++y) {
          const ResizeTap& a = ty[y];
          for (int xx = 0; xx < gy.dim(3); ++xx) {
            const ResizeTap& b = tx[xx];
            const float d = gy.at(n, c, y, xx);
            g.at(n, c, a.lo, b.lo) += d * (1 - a.frac) * (1 - b.frac);
            g.at(n, c, a.lo, b.hi) += d * (1 - a.frac) * b.frac;
            g.at(n, c, a.hi, b.lo) += d * a.frac * (1 - b.frac);
            g.at(n, c, a.hi, b.hi) += d * a.frac * b.frac;
          }
        }
      }
    }
  });
}

Var GlobalMaxPool(const Var& x) {
  const Tensor& in = x.value();
  CheckRank(in, 4, "GlobalMaxPool");
  const int batch = in.dim(0), channels = in.dim(1);
  const size_t plane = static_cast<size_t>(in.dim(2)) * in.dim(3);
  Tensor out({batch, channels});
  std::vector<size_t> argmax(static_cast<size_t>(batch) * channels);
  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      const size_t base = (static_cast<size_t>(n) * channels + c) * plane;
      const float* p = in.data() + base;
      const size_t best = static_cast<size_t>(std::max_element(p, p + plane) - p);
      argmax[n * channels + c] = base + best;
      out[n * channels + c] = p[best];
    }
  }
  return MakeResult(std::move(out), {x}, [x, argmax](Node& self) {
    Tensor& g = x.node()->MutableGrad();
    for (size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
  });
}

Var GlobalAvgPool(const Var& x) {
  const Tensor& in = x.value();
  CheckRank(in, 4, "GlobalAvgPool");
  const int batch = in.dim(0), channels = in.dim(1);
  const size_t plane = static_cast<size_t>(in.dim(2)) * in.dim(3);
  Tensor out({batch, channels});
  for (size_t i = 0; i < out.size(); ++i) {
    double sum = 0.0;
    for (size_t j = 0; j < plane; ++j) sum += in[i * plane + j];
    out[i] = static_cast<float>(sum / plane);
  }
  return MakeResult(std::move(out), {x}, [x, plane](Node& self) {
    Tensor& g = x.node()->MutableGrad();
    const float inv = 1.0f / static_cast<float>(plane);
    for (size_t i = 0; i < self.grad.size(); ++i)
      for (size_t j = 0; j < plane; ++j) g[i * plane + j] += self.grad[i] * inv;
  });
}

Var Linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  CheckRank(in, 2, "Linear");
  CheckRank(w, 2, "Linear weight");
  const int batch = in.dim(0), nin = in.dim(1), nout = w.dim(0);
  CHECK_EQ(w.dim(1), nin) << "Linear input width mismatch";
  Tensor out({batch, nout});
  MatrixMap y(out.data(), batch, nout);
  y.noalias() = ConstMatrixMap(in.data(), batch, nin) *
                ConstMatrixMap(w.data(), nout, nin).transpose();
  for (int n = 0; n < batch; ++n)
    for (int o = 0; o < nout; ++o) y(n, o) += bias.value()[o];
  return MakeResult(
      std::move(out), {x, weight, bias},
      [x, weight, bias, batch, nin, nout](Node& self) {
        ConstMatrixMap dy(self.grad.data(), batch, nout);
        if (weight.requires_grad()) {
          MatrixMap(weight.node()->MutableGrad().data(), nout, nin).noalias() +=
              dy.transpose() * ConstMatrixMap(x.value().data(), batch, nin);
        }
        if (bias.requires_grad()) {
          Tensor& db = bias.node()->MutableGrad();
          for (int o = 0; o < nout; ++o) db[o] += dy.col(o).sum();
        }
        if (x.requires_grad()) {
          MatrixMap(x.node()->MutableGrad().data(), batch, nin).noalias() +=
              dy * ConstMatrixMap(weight.value().data(), nout, nin);
        }
      });
}

Var ChannelScale(const Var& x, const Var& gate) {
  const Tensor& in = x.value();
  const Tensor& a = gate.value();
  CheckRank(in, 4, "ChannelScale");
  CheckRank(a, 2, "ChannelScale gate");
  CHECK(a.dim(0) == in.dim(0) && a.dim(1) == in.dim(1))
      << "ChannelScale: gate " << a.ShapeString() << " vs features "
      << in.ShapeString();
  const size_t plane = static_cast<size_t>(in.dim(2)) * in.dim(3);
  Tensor out = in;
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < plane; ++j) out[i * plane + j] *= a[i];
  return MakeResult(std::move(out), {x, gate}, [x, gate, plane](Node& self) {
    const Tensor& in = x.value();
    const Tensor& a = gate.value();
    if (x.requires_grad()) {
      Tensor& gx = x.node()->MutableGrad();
      for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < plane; ++j)
          gx[i * plane + j] += self.grad[i * plane + j] * a[i];
    }
    if (gate.requires_grad()) {
      Tensor& ga = gate.node()->MutableGrad();
      for (size_t i = 0; i < a.size(); ++i) {
        double sum = 0.0;
        for (size_t j = 0; j < plane; ++j)
          sum += static_cast<double>(self.grad[i * plane + j]) * in[i * plane + j];
        ga[i] += static_cast<float>(sum);
      }
    }
  });
}

Var Softmax(const Var& x) {
  const Tensor& in = x.value();
  CheckRank(in, 2, "Softmax");
  const int rows = in.dim(0), cols = in.dim(1);
  Tensor out = in;
  for (int r = 0; r < rows; ++r) {
    float* row = out.data() + static_cast<size_t>(r) * cols;
    const float peak = *std::max_element(row, row + cols);
    double z = 0.0;
    for (int c = 0; c < cols; ++c) z += (row[c] = std::exp(row[c] - peak));
    for (int c = 0; c < cols; ++c) row[c] = static_cast<float>(row[c] / z);
  }
  return MakeResult(std::move(out), {x}, [x, rows, cols](Node& self) {
    Tensor& g = x.node()->MutableGrad();
    for (int r = 0; r < rows; ++r) {
      const size_t base = static_cast<size_t>(r) * cols;
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += self.grad[base + c] * self.value[base + c];
      for (int c = 0; c < cols; ++c)
        g[base + c] += self.value[base + c] *
                       static_cast<float>(self.grad[base + c] - dot);
    }
  });
}

Var BinaryCrossEntropy(const Var& pred, const Tensor& target, float eps) {
  const Tensor& p = pred.value();
  CHECK(p.SameShape(target)) << "BinaryCrossEntropy: " << p.ShapeString()
                             << " vs " << target.ShapeString();
  double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp<double>(p[i], eps, 1.0 - eps);
    const double t = target[i];
    sum -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
  }
  Tensor out({1});
  out[0] = static_cast<float>(sum / static_cast<double>(p.size()));
  return MakeResult(std::move(out), {pred}, [pred, target, eps](Node& self) {
    Tensor& g = pred.node()->MutableGrad();
    const Tensor& p = pred.value();
    const float scale = self.grad[0] / static_cast<float>(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
      const float q = p[i];
      if (q < eps || q > 1.0f - eps) continue;
      g[i] += scale * (q - target[i]) / (q * (1.0f - q));
    }
  });
}

}  // namespace ikp::nn
