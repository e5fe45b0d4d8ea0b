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
#include <sstream>

#include <gtest/gtest.h>

#include "vidseg/errors.h"
#include "vidseg/metrics.h"
#include "vidseg/random.h"

namespace vidseg {
namespace {

LabelMap RandomMap(Rng& rng, int h, int w, int k) {
  LabelMap m{w, h, std::vector<std::uint8_t>(h * w)};
  for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng.UniformInt(0, k - 1));
  return m;
}

// Per-class counts gathered pixel by pixel, independent of ConfusionMatrix.
MetricsReport CountingOracle(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& gts,
                             int k) {
  std::vector<double> tp(k), fp(k), fn(k);
  double correct = 0, total = 0;
  for (size_t n = 0; n < preds.size(); ++n) {
    for (size_t i = 0; i < preds[n].labels.size(); ++i) {
      const int p = preds[n].labels[i], g = gts[n].labels[i];
      total += 1;
      if (p == g) {
        tp[g] += 1;
        correct += 1;
      } else {
        fp[p] += 1;
        fn[g] += 1;
      }
    }
  }
  MetricsReport r;
  double iou_sum = 0, iou_n = 0, acc_sum = 0, acc_n = 0;
  for (int c = 0; c < k; ++c) {
    const bool iou_def = tp[c] + fp[c] + fn[c] > 0, acc_def = tp[c] + fn[c] > 0;
    r.iou.push_back(iou_def ? tp[c] / (tp[c] + fp[c] + fn[c]) : 0.0);
    r.iou_defined.push_back(iou_def);
    r.class_accuracy.push_back(acc_def ? tp[c] / (tp[c] + fn[c]) : 0.0);
    r.accuracy_defined.push_back(acc_def);
    if (iou_def) iou_sum += r.iou.back(), iou_n += 1;
    if (acc_def) acc_sum += r.class_accuracy.back(), acc_n += 1;
  }
  r.mean_iou = iou_sum / iou_n;
  r.mean_class_accuracy = acc_sum / acc_n;
  r.global_accuracy = correct / total;
  return r;
}

TEST(Metrics, PerfectPrediction) {
  Rng rng(1);
  const LabelMap g = RandomMap(rng, 6, 7, 4);
  const MetricsReport r = Evaluate({g}, {g}, 4);
  EXPECT_EQ(r.mean_iou, 1.0);
  EXPECT_EQ(r.mean_class_accuracy, 1.0);
  EXPECT_EQ(r.global_accuracy, 1.0);
}

TEST(Metrics, HandConfusion) {
  ConfusionMatrix cm(2);
  cm.Add(0, 0, 3);
  cm.Add(0, 1, 1);
  cm.Add(1, 0, 1);
  cm.Add(1, 1, 3);
  EXPECT_EQ(cm.total(), 8);
  const MetricsReport r = ComputeMetrics(cm);
  EXPECT_DOUBLE_EQ(r.iou[0], 0.6);
  EXPECT_DOUBLE_EQ(r.iou[1], 0.6);
  EXPECT_DOUBLE_EQ(r.mean_iou, 0.6);
  EXPECT_DOUBLE_EQ(r.global_accuracy, 0.75);
}

TEST(Metrics, MatchesCountingOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = rng.UniformInt(2, 6), h = rng.UniformInt(1, 9), w = rng.UniformInt(1, 9);
    // Restricting labels leaves some classes undefined.
    const int used = rng.UniformInt(1, k);
    std::vector<LabelMap> preds, gts;
    for (int n = rng.UniformInt(1, 3); n > 0; --n) {
      preds.push_back(RandomMap(rng, h, w, used));
      gts.push_back(RandomMap(rng, h, w, k));
    }
    const MetricsReport a = Evaluate(preds, gts, k), b = CountingOracle(preds, gts, k);
    EXPECT_EQ(a.iou_defined, b.iou_defined);
    EXPECT_EQ(a.accuracy_defined, b.accuracy_defined);
    for (int c = 0; c < k; ++c) {
      if (b.iou_defined[c]) EXPECT_EQ(a.iou[c], b.iou[c]);
      if (b.accuracy_defined[c]) EXPECT_EQ(a.class_accuracy[c], b.class_accuracy[c]);
    }
    EXPECT_EQ(a.mean_iou, b.mean_iou);
    EXPECT_EQ(a.mean_class_accuracy, b.mean_class_accuracy);
    EXPECT_EQ(a.global_accuracy, b.global_accuracy);
  }
}

TEST(Metrics, ClassPermutationInvariance) {
  Rng rng(3);
  const int perm[4] = {3, 1, 0, 2};
  for (int trial = 0; trial < 20; ++trial) {
    LabelMap p = RandomMap(rng, 5, 5, 4), g = RandomMap(rng, 5, 5, 4);
    const MetricsReport a = Evaluate({p}, {g}, 4);
    for (auto& v : p.labels) v = static_cast<std::uint8_t>(perm[v]);
    for (auto& v : g.labels) v = static_cast<std::uint8_t>(perm[v]);
    const MetricsReport b = Evaluate({p}, {g}, 4);
    for (int c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(b.iou[perm[c]], a.iou[c]);
    EXPECT_NEAR(b.mean_iou, a.mean_iou, 1e-15);
    EXPECT_EQ(b.global_accuracy, a.global_accuracy);
  }
}

TEST(Metrics, ValuesInUnitInterval) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const MetricsReport r = Evaluate({RandomMap(rng, 4, 4, 3)}, {RandomMap(rng, 4, 4, 3)}, 3);
    for (double v : {r.mean_iou, r.mean_class_accuracy, r.global_accuracy}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Metrics, InvalidInputs) {
  LabelMap a{2, 2, {0, 1, 2, 3}}, b{2, 2, {0, 0, 0, 0}}, c{1, 2, {0, 0}};
  EXPECT_THROW(Evaluate({a}, {b}, 3), InvalidArgument);
  EXPECT_THROW(Evaluate({b}, {a}, 3), InvalidArgument);
  EXPECT_THROW(Evaluate({b}, {c}, 3), InvalidArgument);
  EXPECT_THROW(Evaluate({b, b}, {b}, 3), InvalidArgument);
}

TEST(Metrics, CsvLayout) {
  ConfusionMatrix cm(3);
  cm.Add(0, 0, 3);
  cm.Add(0, 1, 1);
  cm.Add(1, 0, 1);
  cm.Add(1, 1, 3);
  std::ostringstream out;
  WriteMetricsCsv(out, ComputeMetrics(cm));
  EXPECT_EQ(out.str(),
            "class,iou,acc\n0,0.600000,0.750000\n1,0.600000,0.750000\n2,,\n"
            "miou,0.600000\nmean_class_acc,0.750000\nglobal_acc,0.750000\n");
}

}  // namespace
}  // namespace vidseg
