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

#ifndef VIDSEG_IMAGE_IO_H_
#define VIDSEG_IMAGE_IO_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vidseg/tensor.h"

namespace vidseg {

// 8-bit RGB image, interleaved row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  std::uint8_t at(int y, int x, int ch) const { return pixels[(y * width + x) * 3 + ch]; }
  std::uint8_t& at(int y, int x, int ch) { return pixels[(y * width + x) * 3 + ch]; }
  bool operator==(const RgbImage&) const = default;
};

// Per-pixel class ids, row-major.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(int y, int x) const { return labels[y * width + x]; }
  std::uint8_t& at(int y, int x) { return labels[y * width + x]; }
  bool operator==(const LabelMap&) const = default;
};

// Dense displacement field, interleaved (u, v) per pixel in pixels/frame.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> uv;

  float u(int y, int x) const { return uv[(y * width + x) * 2]; }
  float v(int y, int x) const { return uv[(y * width + x) * 2 + 1]; }
  bool operator==(const FlowField&) const = default;
};

// Binary PPM (P6) / PGM (P5), maxval 255.
void WritePpm(const std::filesystem::path& path, const RgbImage& image);
RgbImage ReadPpm(const std::filesystem::path& path);
void WritePgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap ReadPgm(const std::filesystem::path& path);

// Middlebury .flo: float 202021.25, i32 width, i32 height, then interleaved
// float32 (u, v), little-endian.
void WriteFlo(const std::filesystem::path& path, const FlowField& flow);
FlowField ReadFlo(const std::filesystem::path& path);

// Network input encoding of an RGB image: 1 x 3 x H x W with
// (value - 127.5) / 64 per channel.
Tensor ImageToTensor(const RgbImage& image);

}  // namespace vidseg

#endif  // VIDSEG_IMAGE_IO_H_
