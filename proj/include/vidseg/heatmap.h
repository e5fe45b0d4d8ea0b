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

#ifndef VIDSEG_HEATMAP_H_
#define VIDSEG_HEATMAP_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vidseg/tensor.h"

namespace vidseg {

// Pre-pooling classifier scores for one class, 1 x 1 x h x w, at a fraction
// of the input resolution.
struct Heatmap {
  int class_id = 0;
  Tensor scores;
};

// Thresholded localization mask at full input resolution.
struct BinaryMask {
  int class_id = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> mask;  // row-major, values in {0, 1}
  int count = 0;                   // number of ones

  bool empty() const { return count == 0; }
  bool at(int y, int x) const { return mask[y * width + x] != 0; }
};

struct LabeledImage {
  Tensor image;  // 1 x 3 x H x W, network-normalized
  int label = 0;
};

// Small fully-convolutional one-vs-all classifier:
//   conv3x3 -> relu -> maxpool -> conv3x3 -> relu -> maxpool -> conv1x1
// The final 1-channel map is the heatmap; its spatial mean is the logit.
struct ClassifierOptions {
  int width1 = 8;
  int width2 = 16;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double init_std = 1.4;
};

struct Classifier {
  int class_id = 0;
  // kernel1, bias1, kernel2, bias2, kernel3, bias3
  std::vector<Tensor> params;
  double train_accuracy = 0.0;
  int positives = 0;
  int negatives = 0;

  // Total downsampling of the score map relative to the input.
  static constexpr int kStride = 4;
};

// One classifier per dataset class, indexed by class id.
struct ClassifierBank {
  std::vector<Classifier> classifiers;

  const Classifier& at(int class_id) const { return classifiers.at(class_id); }
  int size() const { return static_cast<int>(classifiers.size()); }
};

// Binary logistic training on the average-pooled score map, positives being
// images labeled `class_id`. Deterministic given `seed`. Throws
// InvalidArgument with fewer than two positives or negatives and
// NumericError if the loss becomes NaN.
Classifier TrainClassifier(const std::vector<LabeledImage>& images, int class_id,
                           int epochs, std::uint64_t seed,
                           const ClassifierOptions& options = {});

ClassifierBank TrainClassifierBank(const std::vector<LabeledImage>& images,
                                   int num_classes, int epochs, std::uint64_t seed,
                                   const ClassifierOptions& options = {});

// Average-pooled logit of the classifier on `image`.
double ClassifierLogit(const Classifier& classifier, const Tensor& image);

// Applies the classifier fully-convolutionally; no pooling. Throws
// InvalidArgument if the image is smaller than the receptive field or not a
// multiple of the classifier stride.
Heatmap ExtractHeatmap(const Classifier& classifier, const Tensor& image);

// Bilinearly upsamples the heatmap to target_h x target_w (integer factor),
// then marks pixels strictly above ratio * max. A non-positive maximum gives
// an empty mask.
BinaryMask Binarize(const Heatmap& heatmap, int target_h, int target_w,
                    double ratio = 0.2);

// Cache files are tensor snapshots named <frame_id>.<class_id>.hm.
std::filesystem::path HeatmapCachePath(const std::filesystem::path& dir,
                                       const std::string& frame_id, int class_id);
void WriteHeatmap(const std::filesystem::path& dir, const std::string& frame_id,
                  const Heatmap& heatmap);
Heatmap ReadHeatmap(const std::filesystem::path& dir, const std::string& frame_id,
                    int class_id);

// In-memory (frame, class) -> heatmap store mirroring the cache directory.
class HeatmapCache {
 public:
  void Put(const std::string& frame_id, Heatmap heatmap);
  bool Has(const std::string& frame_id, int class_id) const;
  // Throws DataError for a missing entry.
  const Heatmap& Get(const std::string& frame_id, int class_id) const;
  int size() const { return static_cast<int>(entries_.size()); }

  void Save(const std::filesystem::path& dir) const;
  // Loads every *.hm file in `dir`.
  static HeatmapCache Load(const std::filesystem::path& dir);

 private:
  std::map<std::pair<std::string, int>, Heatmap> entries_;
};

}  // namespace vidseg

#endif  // VIDSEG_HEATMAP_H_
