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

#ifndef VIDSEG_METRICS_H_
#define VIDSEG_METRICS_H_

#include <cstdint>
#include <ostream>
#include <vector>

#include "vidseg/image_io.h"

namespace vidseg {

// K x K pixel counts; rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  // Throws InvalidArgument on mismatched sizes or ids >= K.
  void Add(const LabelMap& ground_truth, const LabelMap& prediction);
  void Add(int ground_truth, int prediction, std::int64_t count = 1);

  int num_classes() const { return k_; }
  std::int64_t at(int gt, int pred) const { return counts_[gt * k_ + pred]; }
  std::int64_t total() const;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

// Per-class values are only meaningful where `*_defined` is set: IoU needs
// TP + FP + FN > 0, class accuracy needs TP + FN > 0. The means average over
// defined classes.
struct MetricsReport {
  std::vector<double> iou;
  std::vector<bool> iou_defined;
  std::vector<double> class_accuracy;
  std::vector<bool> accuracy_defined;
  double mean_iou = 0.0;
  double mean_class_accuracy = 0.0;
  double global_accuracy = 0.0;
};

MetricsReport ComputeMetrics(const ConfusionMatrix& confusion);
MetricsReport Evaluate(const std::vector<LabelMap>& predictions,
                       const std::vector<LabelMap>& ground_truth, int num_classes);

// Header "class,iou,acc", one row per class (undefined values left empty),
// then "miou,<v>", "mean_class_acc,<v>", "global_acc,<v>".
void WriteMetricsCsv(std::ostream& out, const MetricsReport& report);

}  // namespace vidseg

#endif  // VIDSEG_METRICS_H_
