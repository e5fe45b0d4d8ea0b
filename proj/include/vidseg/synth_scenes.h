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

#ifndef VIDSEG_SYNTH_SCENES_H_
#define VIDSEG_SYNTH_SCENES_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vidseg/heatmap.h"
#include "vidseg/image_io.h"
#include "vidseg/losses.h"

namespace vidseg {

enum class MotionAxis { kHorizontal, kVertical };

struct ClassStyle {
  std::string name;
  bool foreground = false;
  std::array<int, 3> color = {0, 0, 0};
  // Foreground only: object extents and the axis it moves along.
  MotionAxis axis = MotionAxis::kHorizontal;
  int min_w = 4, max_w = 8;
  int min_h = 4, max_h = 8;
};

// Scene generator parameters. Background classes tile the frame: all but the
// last background class form horizontal bands from top to bottom; with three
// or more background classes the last one is drawn as an elliptical blob
// over the bands (with probability blob_prob). Foreground objects are
// textured rectangles moving at a constant integer velocity. A camouflaged
// object takes the color of the background under its center in the
// reference frame, so only its motion distinguishes it.
struct SceneSpec {
  int height = 32;
  int width = 32;
  std::vector<ClassStyle> palette;
  int noise_amplitude = 30;
  int min_objects = 1;
  int max_objects = 3;
  int min_speed = 1;  // pixels / frame
  int max_speed = 2;
  int clip_length = 12;
  double blob_prob = 0.75;
  double camouflage_prob = 0.5;
  double flow_noise = 0.0;  // std of Gaussian noise added to every flow value
  std::uint64_t seed = 1;

  // 3 background (sky, road, vegetation) + 2 foreground (car, person).
  static SceneSpec Default();

  void Validate() const;
  int num_classes() const { return static_cast<int>(palette.size()); }
  // Middle frame of the clip.
  int ReferenceFrame() const { return (clip_length - 1) / 2; }
  std::vector<int> ForegroundClasses() const;
  std::vector<int> BackgroundClasses() const;
};

struct ClipSample {
  int clip_id = 0;
  int reference_frame = 0;
  std::vector<RgbImage> frames;
  std::vector<FlowField> flows;      // flows[n]: frame n -> n + 1
  TagSet tags;                       // classes present at the reference frame
  std::vector<LabelMap> gt_labels;   // evaluation only

  // Identifier of the reference frame, used for heatmap cache names.
  std::string FrameId() const;
  bool operator==(const ClipSample&) const = default;
};

// Deterministic in (spec.seed, clip_id). Throws InvalidArgument when an
// object cannot stay inside the frame for the whole clip.
ClipSample GenerateClip(const SceneSpec& spec, int clip_id);

TagSet DeriveTags(const LabelMap& labels, int num_classes);

// Layout: root/clip_<id>/frame_<n>.ppm, flow_<n>.flo, gt_<n>.pgm, tags.txt.
void WriteDataset(const std::filesystem::path& root, const std::vector<ClipSample>& clips);
// Clips sorted by id; a missing or empty root yields no clips. Malformed
// files raise DataError naming the file.
std::vector<ClipSample> ReadDataset(const std::filesystem::path& root, int num_classes);

// Single-class "iconic" images for classifier training: background classes
// fill the frame with their texture; foreground classes show one object in
// its canonical color over a random background texture.
std::vector<LabeledImage> GenerateIconicImages(const SceneSpec& spec, int per_class,
                                               int size, std::uint64_t seed);

}  // namespace vidseg

#endif  // VIDSEG_SYNTH_SCENES_H_
