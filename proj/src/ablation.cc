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
#include "vidseg/ablation.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vidseg/errors.h"
#include "vidseg/trainer.h"

namespace vidseg {
namespace {

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string Percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * v);
  return buf;
}

}  // namespace

Splits GenerateSplits(const ExperimentConfig& config) {
  Splits s;
  for (int i = 0; i < config.train_clips; ++i) s.train.push_back(GenerateClip(config.scene, i));
  for (int i = 0; i < config.eval_clips; ++i) {
    s.eval.push_back(GenerateClip(config.scene, config.train_clips + i));
  }
  return s;
}

ClassifierBank TrainHeatmapClassifiers(const ExperimentConfig& config) {
  const auto images = GenerateIconicImages(config.scene, config.iconic_per_class,
                                           config.scene.height, config.seed);
  return TrainClassifierBank(images, config.scene.num_classes(), config.classifier_epochs,
                             config.seed, config.classifier);
}

std::vector<LabelMap> PredictClips(const StreamWeights& weights, const NetConfig& net,
                                   const std::vector<ClipSample>& clips,
                                   const InferOptions& options) {
  std::vector<LabelMap> out;
  out.reserve(clips.size());
  for (const ClipSample& clip : clips) out.push_back(InferClip(weights, net, clip, options));
  return out;
}

std::vector<LabelMap> ReferenceLabels(const std::vector<ClipSample>& clips) {
  std::vector<LabelMap> out;
  out.reserve(clips.size());
  for (const ClipSample& clip : clips) out.push_back(clip.gt_labels.at(clip.reference_frame));
  return out;
}

const std::vector<std::string>& AblationFields() {
  static const std::vector<std::string> fields = {
      "net.use_motion", "train.heatmap_foreground_only", "train.lambda_heatmap"};
  return fields;
}

std::vector<AblationArm> MakeAblationArms(const ExperimentConfig& base) {
  std::vector<AblationArm> arms(4);
  arms[0].name = "No-Heatmap";
  arms[1].name = "Foreground-Heatmap";
  arms[2].name = "Our-Heatmap";
  arms[3].name = "Two-Stream";
  for (auto& arm : arms) {
    arm.config = base;
    arm.config.train.heatmap_foreground_only = false;
    arm.config.net.use_motion = false;
  }
  arms[0].config.train.loss_weights.heatmap = 0.0;
  arms[1].config.train.heatmap_foreground_only = true;
  arms[3].config.net.use_motion = true;
  if (!(base.train.loss_weights.heatmap > 0.0)) {
    throw InvalidArgument("ablation: base config needs a positive train.lambda_heatmap");
  }
  const auto& allowed = AblationFields();
  for (auto& arm : arms) {
    arm.config.Finalize();
    for (const std::string& key : DiffConfigs(base, arm.config)) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw InvalidArgument("ablation: arm " + arm.name + " changes undocumented field " + key);
      }
    }
  }
  return arms;
}

std::vector<ArmResult> RunAblation(const ExperimentConfig& base, const std::filesystem::path& out,
                                   std::ostream* log) {
  using Clock = std::chrono::steady_clock;
  const auto arms = MakeAblationArms(base);
  std::filesystem::create_directories(out);

  const auto t0 = Clock::now();
  const Splits splits = GenerateSplits(base);
  const ClassifierBank bank = TrainHeatmapClassifiers(base);
  const HeatmapCache cache = BuildHeatmapCache(bank, splits.train);
  const std::vector<LabelMap> gt = ReferenceLabels(splits.eval);
  if (log) {
    *log << "classifier train accuracy:";
    for (const Classifier& c : bank.classifiers) *log << " " << c.train_accuracy;
    *log << "\n";
  }

  std::vector<ArmResult> results;
  for (const AblationArm& arm : arms) {
    const auto start = Clock::now();
    const std::filesystem::path dir = out / arm.name;
    std::filesystem::create_directories(dir / "pred");

    std::ostringstream config_text;
    WriteConfig(config_text, arm.config);
    WriteTextFile(dir / "config.txt", config_text.str());

    const TrainResult trained = Train(splits.train, arm.config.train, arm.config.net, cache);
    SaveCheckpoint(dir / "checkpoint", trained.weights, arm.config.net);
    std::ostringstream loss;
    loss << LossCsvHeader() << "\n";
    for (size_t i = 0; i < trained.curve.size(); ++i) {
      loss << LossCsvRow(static_cast<int>(i), trained.curve[i]) << "\n";
    }
    WriteTextFile(dir / "loss.csv", loss.str());

    InferOptions options;
    options.use_crf = arm.config.eval_use_crf;
    options.crf = arm.config.train.crf;
    const std::vector<LabelMap> preds =
        PredictClips(trained.weights, arm.config.net, splits.eval, options);
    for (size_t i = 0; i < preds.size(); ++i) {
      WritePgm(dir / "pred" / ("clip_" + std::to_string(splits.eval[i].clip_id) + ".pgm"),
               preds[i]);
    }
    ArmResult r;
    r.name = arm.name;
    r.metrics = Evaluate(preds, gt, arm.config.net.num_classes);
    r.final_loss = trained.curve.back().total;
    std::ostringstream metrics;
    WriteMetricsCsv(metrics, r.metrics);
    WriteTextFile(dir / "metrics.csv", metrics.str());
    if (log) {
      const double secs = std::chrono::duration<double>(Clock::now() - start).count();
      *log << arm.name << ": miou " << Percent(r.metrics.mean_iou) << " final loss "
           << r.final_loss << " (" << secs << " s)\n";
    }
    results.push_back(std::move(r));
  }

  std::ostringstream table;
  table << "arm,miou,mean_class_acc,global_acc\n";
  for (const ArmResult& r : results) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", r.name.c_str(), r.metrics.mean_iou,
                  r.metrics.mean_class_accuracy, r.metrics.global_accuracy);
    table << buf;
  }
  WriteTextFile(out / "ablation.csv", table.str());
  if (log) {
    *log << "total " << std::chrono::duration<double>(Clock::now() - t0).count() << " s\n";
  }
  return results;
}

void WriteAblationTable(std::ostream& out, const std::vector<ArmResult>& results) {
  out << "arm                 mIoU   mClassAcc  GlobalAcc\n";
  for (const ArmResult& r : results) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s %s     %s     %s\n", r.name.c_str(),
                  Percent(r.metrics.mean_iou).c_str(),
                  Percent(r.metrics.mean_class_accuracy).c_str(),
                  Percent(r.metrics.global_accuracy).c_str());
    out << buf;
  }
}

}  // namespace vidseg
