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

#ifndef VIDSEG_ABLATION_H_
#define VIDSEG_ABLATION_H_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "vidseg/config.h"
#include "vidseg/heatmap.h"
#include "vidseg/metrics.h"
#include "vidseg/synth_scenes.h"

namespace vidseg {

struct Splits {
  std::vector<ClipSample> train;
  std::vector<ClipSample> eval;
};

// Training clips take ids [0, train_clips), evaluation clips follow.
Splits GenerateSplits(const ExperimentConfig& config);

// One-vs-all classifiers trained on iconic images of the configured scene.
ClassifierBank TrainHeatmapClassifiers(const ExperimentConfig& config);

std::vector<LabelMap> PredictClips(const StreamWeights& weights, const NetConfig& net,
                                   const std::vector<ClipSample>& clips, const InferOptions& options);
std::vector<LabelMap> ReferenceLabels(const std::vector<ClipSample>& clips);

struct AblationArm {
  std::string name;
  ExperimentConfig config;
};

// No-Heatmap, Foreground-Heatmap, Our-Heatmap and Two-Stream, in that order.
// Throws InvalidArgument if any arm differs from `base` outside the
// fields listed by AblationFields().
std::vector<AblationArm> MakeAblationArms(const ExperimentConfig& base);
const std::vector<std::string>& AblationFields();

struct ArmResult {
  std::string name;
  MetricsReport metrics;
  double final_loss = 0.0;
};

// Writes <out>/ablation.csv and, per arm, <out>/<arm>/{checkpoint/,loss.csv,
// metrics.csv,config.txt,pred/}. Progress goes to `log` when non-null.
std::vector<ArmResult> RunAblation(const ExperimentConfig& base, const std::filesystem::path& out,
                                   std::ostream* log = nullptr);

void WriteAblationTable(std::ostream& out, const std::vector<ArmResult>& results);

}  // namespace vidseg

#endif  // VIDSEG_ABLATION_H_
