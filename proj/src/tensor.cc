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
#include "vidseg/tensor.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "vidseg/errors.h"

namespace vidseg {
namespace {

static_assert(std::endian::native == std::endian::little,
              "snapshot I/O assumes a little-endian host");

constexpr char kMagic[4] = {'T', 'S', 'R', '1'};

template <typename T>
void WritePod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool ReadPod(std::istream& in, T* value) {
  in.read(reinterpret_cast<char*>(value), sizeof(T));
  return static_cast<bool>(in);
}

}  // namespace

std::int64_t ShapeSize(const Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw InvalidArgument("tensor rank must be in [1, 4], got " +
                          std::to_string(shape.size()));
  }
  std::int64_t n = 1;
  for (int extent : shape) {
    if (extent <= 0) {
      throw InvalidArgument("non-positive extent in shape " +
                            ShapeToString(shape));
    }
    n *= extent;
  }
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(ShapeSize(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (ShapeSize(shape_) != static_cast<std::int64_t>(values_.size())) {
    throw InvalidArgument("value count " + std::to_string(values_.size()) +
                          " does not match shape " + ShapeToString(shape_));
  }
}

Tensor Tensor::Reshaped(Shape shape) const {
  return Tensor(std::move(shape), values_);
}

std::vector<double>& Tensor::grad() {
  if (!grad_) grad_.emplace(values_.size(), 0.0);
  return *grad_;
}

const std::vector<double>& Tensor::grad() const {
  if (!grad_) throw InvalidArgument("tensor has no gradient buffer");
  return *grad_;
}

bool Tensor::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::Sum() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0);
}

double Tensor::Max() const {
  if (values_.empty()) return -std::numeric_limits<double>::infinity();
  return *std::max_element(values_.begin(), values_.end());
}

bool Tensor::operator==(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (values_.empty() ||
          std::memcmp(values_.data(), other.values_.data(),
                      values_.size() * sizeof(double)) == 0);
}

void WriteTensor(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
  for (int extent : tensor.shape()) {
    WritePod<std::uint32_t>(out, static_cast<std::uint32_t>(extent));
  }
  out.write(reinterpret_cast<const char*>(tensor.data()),
            static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  if (!out) throw DataError("write failed: " + path.string());
}

Tensor ReadTensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("bad tensor magic in " + path.string());
  }
  std::uint32_t rank = 0;
  if (!ReadPod(in, &rank) || rank < 1 || rank > 4) {
    throw DataError("bad tensor rank in " + path.string());
  }
  Shape shape(rank);
  for (auto& extent : shape) {
    std::uint32_t e = 0;
    if (!ReadPod(in, &e) || e == 0 || e > (1u << 24)) {
      throw DataError("bad tensor extent in " + path.string());
    }
    extent = static_cast<int>(e);
  }
  std::vector<double> values(ShapeSize(shape));
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw DataError("truncated tensor file: " + path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes in tensor file: " + path.string());
  }
  return Tensor(std::move(shape), std::move(values));
}

std::uint64_t TensorChecksum(const Tensor& tensor) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(tensor.data());
  const size_t n = tensor.size() * sizeof(double);
  for (size_t i = 0; i < n; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

}  // namespace vidseg
