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

#ifndef VIDSEG_LOSSES_H_
#define VIDSEG_LOSSES_H_

#include <span>
#include <string>
#include <vector>

#include "vidseg/autodiff.h"
#include "vidseg/heatmap.h"
#include "vidseg/tensor.h"

namespace vidseg {

inline constexpr double kProbEpsilon = 1e-8;
inline constexpr double kDefaultLseR = 5.0;

// Clip-level tags: the present classes; everything else is absent.
class TagSet {
 public:
  TagSet() = default;
  // Throws InvalidArgument if `present` is empty or has ids outside
  // [0, num_classes).
  TagSet(std::vector<int> present, int num_classes);

  int num_classes() const { return num_classes_; }
  const std::vector<int>& present() const { return present_; }
  std::vector<int> absent() const;
  bool contains(int class_id) const;

  bool operator==(const TagSet&) const = default;

 private:
  std::vector<int> present_;  // sorted, unique
  int num_classes_ = 0;
};

// Soft maximum (1/r) log(mean(exp(r p))). Lies between the mean and the max.
double LsePool(std::span<const double> probs, double r = kDefaultLseR);

enum class KlDirection {
  kCrfToNet,  // KL(crf || net), the default
  kNetToCrf,  // KL(net || crf)
};

// Value-only evaluation. `probs` is K x H x W or 1 x K x H x W.
//
// Tag loss: -mean_{k present} log S_k - mean_{k absent} log(1 - S_k) with
// S_k = LsePool(channel k, r) clamped to [eps, 1 - eps]. The absent term is
// zero when every class is present.
double TagLoss(const Tensor& probs, const TagSet& tags, double r = kDefaultLseR,
               std::vector<double>* lse_scores = nullptr);
// Mean over present classes with a nonempty mask of the mean -log p inside
// that class's mask. Masks of absent classes are ignored. Zero (with a
// warning) when no present class has a usable mask.
double HeatmapLoss(const Tensor& probs, std::span<const BinaryMask> masks,
                   const TagSet& tags);
// Per-pixel KL divergence averaged over pixels.
double CrfConsistencyLoss(const Tensor& net_probs, const Tensor& crf_probs,
                          KlDirection direction = KlDirection::kCrfToNet);

// Differentiable versions, recorded on the tape of `probs`. The CRF target is
// a constant.
Var TagLoss(Var probs, const TagSet& tags, double r = kDefaultLseR);
Var HeatmapLoss(Var probs, std::span<const BinaryMask> masks, const TagSet& tags);
Var CrfConsistencyLoss(Var net_probs, const Tensor& crf_probs,
                       KlDirection direction = KlDirection::kCrfToNet);

struct LossWeights {
  double heatmap = 1.0;
  double crf = 1.0;
};

struct LossReport {
  double tag_loss = 0.0;
  double heatmap_loss = 0.0;
  double crf_loss = 0.0;
  double total = 0.0;
  std::vector<double> lse_scores;
};

// "iter,tag_loss,heatmap_loss,crf_loss,total"
std::string LossCsvHeader();
std::string LossCsvRow(int iteration, const LossReport& report);

}  // namespace vidseg

#endif  // VIDSEG_LOSSES_H_
