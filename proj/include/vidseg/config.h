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

#ifndef VIDSEG_CONFIG_H_
#define VIDSEG_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "vidseg/heatmap.h"
#include "vidseg/synth_scenes.h"
#include "vidseg/trainer.h"
#include "vidseg/two_stream_net.h"

namespace vidseg {

// Everything one pipeline run needs. Network resolution, class count and
// foreground classes follow the scene.
struct ExperimentConfig {
  SceneSpec scene = SceneSpec::Default();
  int train_clips = 16;
  int eval_clips = 8;

  int iconic_per_class = 24;
  int classifier_epochs = 30;
  ClassifierOptions classifier;

  NetConfig net;
  TrainConfig train;
  bool eval_use_crf = false;

  std::uint64_t seed = 1;

  // Copies scene-derived fields into net/train and validates everything.
  void Finalize();
};

// Sorted key -> value text of every configurable field.
std::map<std::string, std::string> ToKeyValues(const ExperimentConfig& config);
// Throws DataError for an unknown key or an unparsable value.
void SetKeyValue(ExperimentConfig& config, const std::string& key, const std::string& value);

// `key = value` lines; `#` starts a comment. Throws DataError with the line
// number on malformed input. The result is finalized.
ExperimentConfig ParseConfig(std::istream& in, const std::string& source = "<config>");
ExperimentConfig LoadConfig(const std::filesystem::path& path);
void WriteConfig(std::ostream& out, const ExperimentConfig& config);

// Keys whose values differ between the two configs.
std::vector<std::string> DiffConfigs(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace vidseg

#endif  // VIDSEG_CONFIG_H_
