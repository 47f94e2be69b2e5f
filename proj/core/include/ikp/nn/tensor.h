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

#ifndef IKP_NN_TENSOR_H_
#define IKP_NN_TENSOR_H_

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace ikp::nn {

// Dense row-major float tensor. Image tensors use NCHW layout.
// 64-byte aligned storage. Eigen's vectorized reductions peel leading
// elements based on the buffer address, so fixed alignment fixes the
// floating-point summation order.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, size_t) { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);

  static Tensor Like(const Tensor& other, float fill = 0.0f) {
    return Tensor(other.shape_, fill);
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float& operator[](size_t i) { return data_[i]; }
  float operator[](size_t i) const { return data_[i]; }

  // NCHW accessors.
  float& at(int n, int c, int y, int x) {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + y) *
                     shape_[3] +
                 x];
  }
  float at(int n, int c, int y, int x) const {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + y) *
                     shape_[3] +
                 x];
  }

  void Fill(float v);
  // this += other (same shape).
  void AddInPlace(const Tensor& other);
  bool AllFinite() const;
  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string ShapeString() const;

 private:
  std::vector<int> shape_;
  FloatBuffer data_;
};

size_t NumElements(const std::vector<int>& shape);

}  // namespace ikp::nn

#endif  // IKP_NN_TENSOR_H_
