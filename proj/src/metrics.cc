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
#include "vidseg/metrics.h"

#include <cstdio>
#include <numeric>
#include <string>

#include "vidseg/errors.h"

namespace vidseg {
namespace {

std::string Format(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : k_(num_classes), counts_(static_cast<size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 1) throw InvalidArgument("confusion matrix needs at least one class");
}

void ConfusionMatrix::Add(int ground_truth, int prediction, std::int64_t count) {
  if (ground_truth < 0 || ground_truth >= k_ || prediction < 0 || prediction >= k_) {
    throw InvalidArgument("class id out of range [0, " + std::to_string(k_) + "): gt " +
                          std::to_string(ground_truth) + ", prediction " +
                          std::to_string(prediction));
  }
  counts_[ground_truth * k_ + prediction] += count;
}

void ConfusionMatrix::Add(const LabelMap& ground_truth, const LabelMap& prediction) {
  if (ground_truth.width != prediction.width || ground_truth.height != prediction.height) {
    throw InvalidArgument("prediction and ground truth sizes differ");
  }
  for (size_t i = 0; i < ground_truth.labels.size(); ++i) {
    Add(ground_truth.labels[i], prediction.labels[i]);
  }
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

MetricsReport ComputeMetrics(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  MetricsReport r;
  r.iou.assign(k, 0.0);
  r.iou_defined.assign(k, false);
  r.class_accuracy.assign(k, 0.0);
  r.accuracy_defined.assign(k, false);
  std::int64_t trace = 0;
  int n_iou = 0, n_acc = 0;
  for (int c = 0; c < k; ++c) {
    const std::int64_t tp = cm.at(c, c);
    std::int64_t fp = 0, fn = 0;
    for (int j = 0; j < k; ++j) {
      if (j == c) continue;
      fp += cm.at(j, c);
      fn += cm.at(c, j);
    }
    trace += tp;
    if (tp + fp + fn > 0) {
      r.iou[c] = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
      r.iou_defined[c] = true;
      r.mean_iou += r.iou[c];
      ++n_iou;
    }
    if (tp + fn > 0) {
      r.class_accuracy[c] = static_cast<double>(tp) / static_cast<double>(tp + fn);
      r.accuracy_defined[c] = true;
      r.mean_class_accuracy += r.class_accuracy[c];
      ++n_acc;
    }
  }
  if (n_iou > 0) r.mean_iou /= n_iou;
  if (n_acc > 0) r.mean_class_accuracy /= n_acc;
  const std::int64_t total = cm.total();
  if (total > 0) r.global_accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return r;
}

MetricsReport Evaluate(const std::vector<LabelMap>& predictions,
                       const std::vector<LabelMap>& ground_truth, int num_classes) {
  if (predictions.size() != ground_truth.size()) {
    throw InvalidArgument("evaluate: " + std::to_string(predictions.size()) +
                          " predictions for " + std::to_string(ground_truth.size()) +
                          " ground-truth maps");
  }
  ConfusionMatrix cm(num_classes);
  for (size_t i = 0; i < predictions.size(); ++i) cm.Add(ground_truth[i], predictions[i]);
  return ComputeMetrics(cm);
}

void WriteMetricsCsv(std::ostream& out, const MetricsReport& r) {
  out << "class,iou,acc\n";
  for (size_t c = 0; c < r.iou.size(); ++c) {
    out << c << ',' << (r.iou_defined[c] ? Format(r.iou[c]) : "") << ','
        << (r.accuracy_defined[c] ? Format(r.class_accuracy[c]) : "") << '\n';
  }
  out << "miou," << Format(r.mean_iou) << '\n';
  out << "mean_class_acc," << Format(r.mean_class_accuracy) << '\n';
  out << "global_acc," << Format(r.global_accuracy) << '\n';
}

}  // namespace vidseg
