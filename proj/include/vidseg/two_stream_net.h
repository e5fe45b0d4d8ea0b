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

#ifndef VIDSEG_TWO_STREAM_NET_H_
#define VIDSEG_TWO_STREAM_NET_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vidseg/autodiff.h"
#include "vidseg/image_io.h"
#include "vidseg/tensor.h"

namespace vidseg {

// Motion encoding of `frame_count` consecutive flow fields around a
// reference frame: 1 x 2L x H x W with channels u_1, v_1, u_2, v_2, ...
struct FlowStack {
  int reference_frame = 0;
  int frame_count = 0;
  std::vector<int> frames;  // flow indices, ascending
  Tensor channels;
};

// Inclusive [first, last] flow indices of the window (t - ceil(L/2), t + floor(L/2)].
// For even L this is (t - L/2, t + L/2].
std::pair<int, int> FlowWindow(int reference_frame, int frame_count);

// `flows[n]` is the displacement from frame n to frame n + 1. Throws
// InvalidArgument if any flow index of the window is missing.
FlowStack EncodeFlowStack(const std::vector<FlowField>& flows, int reference_frame,
                          int frame_count);

struct NetConfig {
  int num_classes = 5;
  std::vector<int> widths = {16, 32, 64};
  int fusion_width = 64;
  int height = 32;
  int width = 32;
  int flow_frames = 10;
  bool use_motion = true;  // false: appearance stream only
  double init_std = 0.1;

  void Validate() const;
  // Resolution of the deepest feature map relative to the input.
  int OutputStride() const { return 1 << (widths.size() - 1); }
  bool operator==(const NetConfig&) const = default;
};

// Named parameter tensors in a fixed order.
class StreamWeights {
 public:
  void Add(std::string name, Tensor value);
  const Tensor& Get(const std::string& name) const;
  Tensor& Get(const std::string& name);
  bool Has(const std::string& name) const;

  int size() const { return static_cast<int>(tensors_.size()); }
  const std::string& name(int i) const { return tensors_[i].first; }
  const Tensor& tensor(int i) const { return tensors_[i].second; }
  Tensor& tensor(int i) { return tensors_[i].second; }
  std::int64_t NumParameters() const;

  bool operator==(const StreamWeights& other) const;

 private:
  std::vector<std::pair<std::string, Tensor>> tensors_;
};

// Conv kernels ~ N(0, init_std^2) / sqrt(fan_in), biases zero.
StreamWeights InitWeights(const NetConfig& config, std::uint64_t seed);

struct ForwardVars {
  Var appearance_scores;  // K x h x w before upsampling
  Var motion_scores;      // spatio-temporal score map; null without motion
  Var scores;             // full resolution
  Var probs;
};

// Records the network on the tape of `image`. `params[i]` corresponds to weights.tensor(i).
// `flow` may be null when the config has no motion stream.
ForwardVars ForwardOnTape(std::span<const Var> params,
                          const StreamWeights& weights, Var image, Var flow,
                          const NetConfig& config);

struct NetOutput {
  Tensor scores;  // 1 x K x H x W
  Tensor probs;   // 1 x K x H x W
};

// `image` is 1 x 3 x H x W (see ImageToTensor); `flow` is ignored for
// appearance-only configs.
NetOutput Forward(const Tensor& image, const FlowStack* flow,
                  const StreamWeights& weights, const NetConfig& config);

// Checkpoint directory: one snapshot per tensor plus manifest.txt recording
// the network config and, per tensor, its file, shape and checksum.
void SaveCheckpoint(const std::filesystem::path& dir, const StreamWeights& weights,
                    const NetConfig& config);
std::pair<StreamWeights, NetConfig> LoadCheckpoint(const std::filesystem::path& dir);

}  // namespace vidseg

#endif  // VIDSEG_TWO_STREAM_NET_H_
