/* Copyright 2026 The vidseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef VIDSEG_TENSOR_H_
#define VIDSEG_TENSOR_H_

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vidseg {

using Shape = std::vector<int>;

// Number of elements implied by `shape`. Throws InvalidArgument on
// non-positive extents or rank > 4.
std::int64_t ShapeSize(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major array of doubles, rank 1..4. Rank-4 tensors follow the
// N x C x H x W convention. An optional gradient buffer of identical shape
// can be attached; the autodiff tape uses it to accumulate adjoints.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor Scalar(double value) { return Tensor({1}, {value}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(axis); }
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
  bool empty() const { return values_.empty(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::int64_t i) { return values_[i]; }
  double operator[](std::int64_t i) const { return values_[i]; }

  // Rank-4 element access.
  double& at(int n, int c, int h, int w) {
    return values_[((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(int n, int c, int h, int w) const {
    return values_[((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  // Same values, new shape with identical element count.
  Tensor Reshaped(Shape shape) const;

  bool has_grad() const { return grad_.has_value(); }
  // Allocates a zero gradient on first use.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void ClearGrad() { grad_.reset(); }

  bool AllFinite() const;
  double Sum() const;
  double Max() const;

  // Bitwise equality of shape and values (gradients ignored).
  bool operator==(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> values_;
  std::optional<std::vector<double>> grad_;
};

// Tensor snapshot file: "TSR1", u32 rank, u32 extents, f64 values, all
// little-endian.
void WriteTensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor ReadTensor(const std::filesystem::path& path);

// 64-bit FNV-1a over the little-endian value bytes; used by checkpoint
// manifests.
std::uint64_t TensorChecksum(const Tensor& tensor);

}  // namespace vidseg

#endif  // VIDSEG_TENSOR_H_
