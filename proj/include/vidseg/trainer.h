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

#ifndef VIDSEG_TRAINER_H_
#define VIDSEG_TRAINER_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "vidseg/dense_crf.h"
#include "vidseg/heatmap.h"
#include "vidseg/losses.h"
#include "vidseg/synth_scenes.h"
#include "vidseg/two_stream_net.h"

namespace vidseg {

struct TrainConfig {
  double base_lr = 1e-5;
  double lr_decay = 0.1;  // multiplier applied every decay_interval iterations
  int decay_interval = 1000;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 1;
  int max_iterations = 3000;
  LossWeights loss_weights;
  // Restrict the heatmap loss to these classes (Foreground-Heatmap arm).
  bool heatmap_foreground_only = false;
  std::vector<int> foreground_classes;
  double lse_r = kDefaultLseR;
  double mask_ratio = 0.2;
  KlDirection kl_direction = KlDirection::kCrfToNet;
  int crf_every = 1;
  CrfConfig crf;
  std::uint64_t seed = 1;

  void Validate() const;
  // base_lr * lr_decay^floor(iteration / decay_interval), iteration 0-based.
  double LearningRate(int iteration) const;
};

// Momentum velocities, one buffer per weight tensor.
struct SgdState {
  std::vector<std::vector<double>> velocity;
};

// v <- momentum * v - lr * (g + weight_decay * w); w <- w + v.
// Throws NumericError on non-finite gradients.
void SgdStep(StreamWeights& weights, const std::vector<std::vector<double>>& grads,
             SgdState& state, const TrainConfig& config, int iteration);

struct TrainResult {
  StreamWeights weights;
  std::vector<LossReport> curve;  // one entry per iteration
};

// Called after every iteration with its 0-based index.
using TrainObserver = std::function<void(int iteration, const LossReport& report)>;

// SGD over clips in a seeded shuffled order, one reference frame per step.
// Every present class must have a heatmap in `heatmaps` for the clip's
// reference frame.
TrainResult Train(const std::vector<ClipSample>& dataset, const TrainConfig& config,
                  const NetConfig& net_config, const HeatmapCache& heatmaps,
                  const TrainObserver& observer = nullptr);

// Heatmaps of every class at each clip's reference frame.
HeatmapCache BuildHeatmapCache(const ClassifierBank& bank,
                               const std::vector<ClipSample>& clips);

// Per-pixel argmax over channels; ties go to the lowest class id.
LabelMap ArgmaxLabels(const Tensor& probs);

struct InferOptions {
  bool use_crf = false;
  CrfConfig crf;
};

// Throws InvalidArgument when the frame resolution differs from the
// network's configured input.
LabelMap Infer(const StreamWeights& weights, const NetConfig& net_config,
               const RgbImage& image, const FlowStack* flow, const InferOptions& options);
// Reference-frame prediction for a clip.
LabelMap InferClip(const StreamWeights& weights, const NetConfig& net_config,
                   const ClipSample& clip, const InferOptions& options);

}  // namespace vidseg

#endif  // VIDSEG_TRAINER_H_
