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
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "vidseg/ablation.h"
#include "vidseg/config.h"
#include "vidseg/errors.h"
#include "vidseg/metrics.h"
#include "vidseg/trainer.h"

namespace fs = std::filesystem;
using namespace vidseg;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;

ExperimentConfig Load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  ExperimentConfig config = LoadConfig(path);
  if (seed) {
    config.seed = *seed;
    config.Finalize();
  }
  return config;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

int RunGen(const ExperimentConfig& config, const fs::path& out) {
  const Splits splits = GenerateSplits(config);
  WriteDataset(out / "train", splits.train);
  WriteDataset(out / "eval", splits.eval);
  fs::create_directories(out / "eval_gt");
  for (const ClipSample& clip : splits.eval) {
    WritePgm(out / "eval_gt" / ("clip_" + std::to_string(clip.clip_id) + ".pgm"),
             clip.gt_labels.at(clip.reference_frame));
  }
  std::cout << "wrote " << splits.train.size() << " training and " << splits.eval.size()
            << " evaluation clips to " << out.string() << "\n";
  return 0;
}

int RunHeatmaps(const ExperimentConfig& config, const fs::path& data, const fs::path& out) {
  const auto clips = ReadDataset(data, config.scene.num_classes());
  if (clips.empty()) throw DataError("no clips found under " + data.string());
  const ClassifierBank bank = TrainHeatmapClassifiers(config);
  for (const Classifier& c : bank.classifiers) {
    std::cout << "class " << c.class_id << " classifier train accuracy " << c.train_accuracy
              << "\n";
  }
  const HeatmapCache cache = BuildHeatmapCache(bank, clips);
  cache.Save(out);
  std::cout << "cached " << cache.size() << " heatmaps in " << out.string() << "\n";
  return 0;
}

int RunTrain(const ExperimentConfig& config, const fs::path& data, const fs::path& heatmaps,
             const fs::path& out) {
  const auto clips = ReadDataset(data, config.scene.num_classes());
  if (clips.empty()) throw DataError("no clips found under " + data.string());
  const HeatmapCache cache = HeatmapCache::Load(heatmaps);
  std::ostringstream loss;
  loss << LossCsvHeader() << "\n";
  const TrainResult result =
      Train(clips, config.train, config.net, cache, [&](int iter, const LossReport& r) {
        loss << LossCsvRow(iter, r) << "\n";
        if ((iter + 1) % 100 == 0) {
          std::cout << "iter " << iter + 1 << " loss " << r.total << "\n";
        }
      });
  SaveCheckpoint(out / "checkpoint", result.weights, config.net);
  WriteFile(out / "loss.csv", loss.str());
  std::cout << "checkpoint written to " << (out / "checkpoint").string() << "\n";
  return 0;
}

int RunInfer(const fs::path& checkpoint, const fs::path& data, const fs::path& out, bool use_crf,
             const std::optional<ExperimentConfig>& config) {
  const auto [weights, net] = LoadCheckpoint(checkpoint);
  const auto clips = ReadDataset(data, net.num_classes);
  if (clips.empty()) throw DataError("no clips found under " + data.string());
  InferOptions options;
  options.use_crf = use_crf;
  if (config) options.crf = config->train.crf;
  fs::create_directories(out);
  for (const ClipSample& clip : clips) {
    WritePgm(out / ("clip_" + std::to_string(clip.clip_id) + ".pgm"),
             InferClip(weights, net, clip, options));
  }
  std::cout << "wrote " << clips.size() << " label maps to " << out.string() << "\n";
  return 0;
}

int RunEval(const fs::path& pred_dir, const fs::path& gt_dir, int num_classes,
            const std::optional<fs::path>& csv) {
  if (!fs::is_directory(pred_dir)) throw DataError("not a directory: " + pred_dir.string());
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    if (entry.path().extension() == ".pgm") files[entry.path().filename().string()] = entry.path();
  }
  if (files.empty()) throw DataError("no .pgm predictions in " + pred_dir.string());
  std::vector<LabelMap> preds, gts;
  for (const auto& [name, path] : files) {
    const fs::path gt_path = gt_dir / name;
    if (!fs::exists(gt_path)) throw DataError("missing ground truth " + gt_path.string());
    preds.push_back(ReadPgm(path));
    gts.push_back(ReadPgm(gt_path));
  }
  MetricsReport report;
  try {
    report = Evaluate(preds, gts, num_classes);
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
  WriteMetricsCsv(std::cout, report);
  if (csv) {
    std::ofstream out(*csv);
    if (!out) throw DataError("cannot write " + csv->string());
    WriteMetricsCsv(out, report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised video segmentation from clip-level tags"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_value = 0;
  std::string out_dir;
  bool use_crf = false;

  auto* gen = app.add_subcommand("gen", "Synthesize training and evaluation clips");
  gen->add_option("--config", config_path, "Config file (key = value)")->required();
  gen->add_option("--out", out_dir, "Dataset root")->required();

  std::string data_dir;
  auto* heatmaps = app.add_subcommand("heatmaps", "Train classifiers and fill the heatmap cache");
  heatmaps->add_option("--config", config_path, "Config file")->required();
  heatmaps->add_option("--data", data_dir, "Dataset directory of training clips")->required();
  heatmaps->add_option("--out", out_dir, "Heatmap cache directory")->required();

  std::string heatmap_dir;
  auto* train = app.add_subcommand("train", "Train the segmentation network");
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--data", data_dir, "Dataset directory of training clips")->required();
  train->add_option("--heatmaps", heatmap_dir, "Heatmap cache directory")->required();
  train->add_option("--out", out_dir, "Output directory")->required();

  std::string checkpoint_dir;
  auto* infer = app.add_subcommand("infer", "Predict reference-frame label maps");
  infer->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory")->required();
  infer->add_option("--data", data_dir, "Dataset directory")->required();
  infer->add_option("--out", out_dir, "Label map output directory")->required();
  infer->add_option("--config", config_path, "Config file (CRF parameters)");
  infer->add_flag("--use-crf", use_crf, "Refine with the dense CRF");

  std::string pred_dir, gt_dir, csv_path;
  int num_classes = SceneSpec::Default().num_classes();
  auto* eval = app.add_subcommand("eval", "Score label maps against ground truth");
  eval->add_option("--pred", pred_dir, "Directory of predicted .pgm maps")->required();
  eval->add_option("--gt", gt_dir, "Directory of ground-truth .pgm maps")->required();
  auto* classes_opt = eval->add_option("--classes", num_classes, "Number of classes");
  eval->add_option("--config", config_path, "Config file (class count)")->excludes(classes_opt);
  eval->add_option("--out", csv_path, "Also write the metrics CSV here");

  auto* ablate = app.add_subcommand("ablate", "Run the four ablation arms and compare them");
  ablate->add_option("--config", config_path, "Config file")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_flag("--use-crf", use_crf, "Refine predictions with the dense CRF");

  for (auto* sub : {gen, heatmaps, train, ablate}) {
    sub->add_option("--seed", seed_value, "Override the config seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsageError;
  }

  auto seed_of = [&](CLI::App* sub) -> std::optional<std::uint64_t> {
    if (sub->count("--seed") > 0) return seed_value;
    return std::nullopt;
  };

  try {
    if (gen->parsed()) return RunGen(Load(config_path, seed_of(gen)), out_dir);
    if (heatmaps->parsed()) {
      return RunHeatmaps(Load(config_path, seed_of(heatmaps)), data_dir, out_dir);
    }
    if (train->parsed()) {
      return RunTrain(Load(config_path, seed_of(train)), data_dir, heatmap_dir, out_dir);
    }
    if (infer->parsed()) {
      std::optional<ExperimentConfig> config;
      if (!config_path.empty()) config = LoadConfig(config_path);
      return RunInfer(checkpoint_dir, data_dir, out_dir, use_crf, config);
    }
    if (eval->parsed()) {
      if (!config_path.empty()) num_classes = LoadConfig(config_path).scene.num_classes();
      std::optional<fs::path> csv;
      if (!csv_path.empty()) csv = csv_path;
      return RunEval(pred_dir, gt_dir, num_classes, csv);
    }
    if (ablate->parsed()) {
      ExperimentConfig config = Load(config_path, seed_of(ablate));
      if (use_crf) config.eval_use_crf = true;
      const auto results = RunAblation(config, out_dir, &std::cerr);
      WriteAblationTable(std::cout, results);
      return 0;
    }
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}
