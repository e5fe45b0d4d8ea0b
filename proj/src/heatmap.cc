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
#include "vidseg/heatmap.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

#include "vidseg/autodiff.h"
#include "vidseg/errors.h"
#include "vidseg/random.h"

namespace vidseg {
namespace {

constexpr int kMinExtent = 8;

Tensor GaussianKernel(Rng& rng, Shape shape, double std) {
  Tensor t(std::move(shape));
  const double fan_in = static_cast<double>(t.dim(1)) * t.dim(2) * t.dim(3);
  const double scale = std / std::sqrt(fan_in);
  for (double& v : t.values()) v = scale * rng.Normal();
  return t;
}

Var Forward(std::span<const Var> p, Var image) {
  Var x = MaxPool2(Relu(Conv2d(image, p[0], p[1], 1, 1)));
  x = MaxPool2(Relu(Conv2d(x, p[2], p[3], 1, 1)));
  return Conv2d(x, p[4], p[5], 1, 0);
}

void CheckImage(const Tensor& image) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw InvalidArgument("classifier input must be 1x3xHxW, got " +
                          ShapeToString(image.shape()));
  }
  const int h = image.dim(2), w = image.dim(3);
  if (h < kMinExtent || w < kMinExtent || h % Classifier::kStride != 0 ||
      w % Classifier::kStride != 0) {
    throw InvalidArgument("image " + ShapeToString(image.shape()) +
                          " too small or not a multiple of the classifier stride");
  }
}

}  // namespace

Classifier TrainClassifier(const std::vector<LabeledImage>& images, int class_id,
                           int epochs, std::uint64_t seed,
                           const ClassifierOptions& options) {
  int positives = 0;
  for (const auto& s : images) positives += s.label == class_id ? 1 : 0;
  const int negatives = static_cast<int>(images.size()) - positives;
  if (positives < 2 || negatives < 2) {
    throw InvalidArgument("class " + std::to_string(class_id) + ": need >= 2 positive and " +
                          ">= 2 negative samples, got " + std::to_string(positives) +
                          "/" + std::to_string(negatives));
  }
  for (const auto& s : images) CheckImage(s.image);

  Rng rng = Rng::Derive(seed, static_cast<std::uint64_t>(class_id));
  Classifier c;
  c.class_id = class_id;
  c.positives = positives;
  c.negatives = negatives;
  c.params = {GaussianKernel(rng, {options.width1, 3, 3, 3}, options.init_std),
              Tensor({options.width1}),
              GaussianKernel(rng, {options.width2, options.width1, 3, 3}, options.init_std),
              Tensor({options.width2}),
              GaussianKernel(rng, {1, options.width2, 1, 1}, options.init_std),
              Tensor({1})};

  // Class-balanced weights with unit mean.
  const double n = static_cast<double>(images.size());
  const double w_pos = 0.5 * n / positives;
  const double w_neg = 0.5 * n / negatives;

  std::vector<std::vector<double>> velocity;
  for (const Tensor& p : c.params) velocity.emplace_back(p.size(), 0.0);
  std::vector<int> order(images.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.Shuffle(std::span<int>(order));
    for (int idx : order) {
      const LabeledImage& sample = images[idx];
      const double label = sample.label == class_id ? 1.0 : 0.0;
      Tape tape;
      std::vector<Var> p;
      for (const Tensor& t : c.params) p.push_back(tape.Leaf(t));
      Var logit = GlobalAveragePool(Forward(p, tape.Constant(sample.image)));
      Var loss = Scale(SigmoidCrossEntropy(logit, label), label > 0 ? w_pos : w_neg);
      if (std::isnan(loss.value()[0])) {
        throw NumericError("classifier " + std::to_string(class_id) + " diverged");
      }
      tape.Backward(loss);
      for (size_t i = 0; i < p.size(); ++i) {
        const std::vector<double> g = p[i].grad();
        for (size_t j = 0; j < g.size(); ++j) {
          velocity[i][j] = options.momentum * velocity[i][j] - options.learning_rate * g[j];
          c.params[i][static_cast<std::int64_t>(j)] += velocity[i][j];
        }
      }
    }
  }

  int correct = 0;
  for (const auto& s : images) {
    const bool predicted = ClassifierLogit(c, s.image) > 0.0;
    correct += predicted == (s.label == class_id) ? 1 : 0;
  }
  c.train_accuracy = correct / n;
  return c;
}

ClassifierBank TrainClassifierBank(const std::vector<LabeledImage>& images,
                                   int num_classes, int epochs, std::uint64_t seed,
                                   const ClassifierOptions& options) {
  ClassifierBank bank;
  for (int k = 0; k < num_classes; ++k) {
    bank.classifiers.push_back(TrainClassifier(images, k, epochs, seed, options));
  }
  return bank;
}

double ClassifierLogit(const Classifier& classifier, const Tensor& image) {
  const Heatmap h = ExtractHeatmap(classifier, image);
  return h.scores.Sum() / static_cast<double>(h.scores.size());
}

Heatmap ExtractHeatmap(const Classifier& classifier, const Tensor& image) {
  CheckImage(image);
  Tape tape;
  std::vector<Var> p;
  for (const Tensor& t : classifier.params) p.push_back(tape.Constant(t));
  Var scores = Forward(p, tape.Constant(image));
  return Heatmap{classifier.class_id, scores.value()};
}

BinaryMask Binarize(const Heatmap& heatmap, int target_h, int target_w, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw InvalidArgument("binarize: ratio must lie in (0, 1)");
  }
  const Tensor& s = heatmap.scores;
  if (s.rank() != 4 || s.dim(0) != 1 || s.dim(1) != 1) {
    throw InvalidArgument("binarize: heatmap must be 1x1xhxw");
  }
  const int h = s.dim(2), w = s.dim(3);
  if (target_h % h != 0 || target_w % w != 0 || target_h / h != target_w / w) {
    throw InvalidArgument("binarize: target " + std::to_string(target_h) + "x" +
                          std::to_string(target_w) +
                          " is not a uniform integer multiple of " + ShapeToString(s.shape()));
  }
  const Tensor up = BilinearUpsampleForward(s, target_h / h);
  BinaryMask m{heatmap.class_id, target_h, target_w,
               std::vector<std::uint8_t>(static_cast<size_t>(target_h) * target_w, 0), 0};
  const double mx = up.Max();
  if (mx <= 0.0) return m;
  const double threshold = ratio * mx;
  for (std::int64_t i = 0; i < up.size(); ++i) {
    if (up[i] > threshold) {
      m.mask[i] = 1;
      ++m.count;
    }
  }
  return m;
}

std::filesystem::path HeatmapCachePath(const std::filesystem::path& dir,
                                       const std::string& frame_id, int class_id) {
  return dir / (frame_id + "." + std::to_string(class_id) + ".hm");
}

void WriteHeatmap(const std::filesystem::path& dir, const std::string& frame_id,
                  const Heatmap& heatmap) {
  WriteTensor(HeatmapCachePath(dir, frame_id, heatmap.class_id), heatmap.scores);
}

Heatmap ReadHeatmap(const std::filesystem::path& dir, const std::string& frame_id,
                    int class_id) {
  const auto path = HeatmapCachePath(dir, frame_id, class_id);
  if (!std::filesystem::exists(path)) {
    throw DataError("missing heatmap cache entry: " + path.string());
  }
  Tensor t = ReadTensor(path);
  if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 1) {
    throw DataError("heatmap file has wrong shape: " + path.string());
  }
  return Heatmap{class_id, std::move(t)};
}

void HeatmapCache::Put(const std::string& frame_id, Heatmap heatmap) {
  const int k = heatmap.class_id;
  entries_.insert_or_assign({frame_id, k}, std::move(heatmap));
}

bool HeatmapCache::Has(const std::string& frame_id, int class_id) const {
  return entries_.contains({frame_id, class_id});
}

const Heatmap& HeatmapCache::Get(const std::string& frame_id, int class_id) const {
  auto it = entries_.find({frame_id, class_id});
  if (it == entries_.end()) {
    throw DataError("missing heatmap cache entry " + frame_id + "." +
                    std::to_string(class_id) + ".hm");
  }
  return it->second;
}

void HeatmapCache::Save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [key, heatmap] : entries_) WriteHeatmap(dir, key.first, heatmap);
}

HeatmapCache HeatmapCache::Load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("heatmap cache directory not found: " + dir.string());
  }
  const std::regex name_re("(.+)\\.([0-9]+)\\.hm");
  HeatmapCache cache;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, name_re)) continue;
    cache.Put(m[1], ReadHeatmap(dir, m[1], std::stoi(m[2])));
  }
  return cache;
}

}  // namespace vidseg
