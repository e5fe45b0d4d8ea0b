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
#include "vidseg/image_io.h"

#include <cctype>
#include <cstring>
#include <fstream>
#include <string>

#include "vidseg/errors.h"

namespace vidseg {
namespace {

constexpr float kFloMagic = 202021.25f;

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string NextToken(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

int ParsePositive(const std::string& token, const std::filesystem::path& path) {
  try {
    size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used == token.size() && value > 0) return value;
  } catch (const std::exception&) {
  }
  throw DataError("malformed header field '" + token + "' in " + path.string());
}

struct NetpbmHeader {
  int width;
  int height;
};

NetpbmHeader ReadNetpbmHeader(std::istream& in, const char* magic,
                              const std::filesystem::path& path) {
  if (NextToken(in) != magic) {
    throw DataError(std::string("expected ") + magic + " header in " + path.string());
  }
  NetpbmHeader h{};
  h.width = ParsePositive(NextToken(in), path);
  h.height = ParsePositive(NextToken(in), path);
  if (ParsePositive(NextToken(in), path) != 255) {
    throw DataError("unsupported maxval (need 255) in " + path.string());
  }
  // NextToken consumed exactly one whitespace byte after maxval.
  return h;
}

template <typename T>
void ReadExact(std::istream& in, T* dst, size_t count,
               const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw DataError("truncated file: " + path.string());
}

std::ifstream OpenIn(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  return in;
}

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

}  // namespace

void WritePpm(const std::filesystem::path& path, const RgbImage& image) {
  auto out = OpenOut(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

RgbImage ReadPpm(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  const NetpbmHeader h = ReadNetpbmHeader(in, "P6", path);
  RgbImage image{h.width, h.height,
                 std::vector<std::uint8_t>(static_cast<size_t>(h.width) * h.height * 3)};
  ReadExact(in, image.pixels.data(), image.pixels.size(), path);
  return image;
}

void WritePgm(const std::filesystem::path& path, const LabelMap& labels) {
  auto out = OpenOut(path);
  out << "P5\n" << labels.width << ' ' << labels.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(labels.labels.data()),
            static_cast<std::streamsize>(labels.labels.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

LabelMap ReadPgm(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  const NetpbmHeader h = ReadNetpbmHeader(in, "P5", path);
  LabelMap labels{h.width, h.height,
                  std::vector<std::uint8_t>(static_cast<size_t>(h.width) * h.height)};
  ReadExact(in, labels.labels.data(), labels.labels.size(), path);
  return labels;
}

void WriteFlo(const std::filesystem::path& path, const FlowField& flow) {
  auto out = OpenOut(path);
  const std::int32_t w = flow.width, h = flow.height;
  out.write(reinterpret_cast<const char*>(&kFloMagic), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(flow.uv.data()),
            static_cast<std::streamsize>(flow.uv.size() * sizeof(float)));
  if (!out) throw DataError("write failed: " + path.string());
}

FlowField ReadFlo(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  float magic = 0.0f;
  std::int32_t w = 0, h = 0;
  ReadExact(in, &magic, 1, path);
  if (std::memcmp(&magic, &kFloMagic, 4) != 0) {
    throw DataError("bad .flo magic in " + path.string());
  }
  ReadExact(in, &w, 1, path);
  ReadExact(in, &h, 1, path);
  if (w <= 0 || h <= 0 || w > 1 << 15 || h > 1 << 15) {
    throw DataError("bad .flo dimensions in " + path.string());
  }
  FlowField flow{w, h, std::vector<float>(static_cast<size_t>(w) * h * 2)};
  ReadExact(in, flow.uv.data(), flow.uv.size(), path);
  return flow;
}

Tensor ImageToTensor(const RgbImage& image) {
  Tensor out({1, 3, image.height, image.width});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        out.at(0, c, y, x) = (image.at(y, x, c) - 127.5) / 64.0;
      }
    }
  }
  return out;
}

}  // namespace vidseg
