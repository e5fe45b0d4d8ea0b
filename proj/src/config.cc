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
#include "vidseg/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "vidseg/errors.h"

namespace vidseg {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("config: cannot parse '" + text + "' for key " + key);
  }
  return value;
}

bool ParseBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw DataError("config: expected true/false for key " + key + ", got '" + text + "'");
}

struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

template <typename T, typename Access>
Field Number(Access access) {
  Field f;
  f.get = [access](const ExperimentConfig& c) {
    const T v = access(const_cast<ExperimentConfig&>(c));
    if constexpr (std::is_floating_point_v<T>) {
      return FormatDouble(v);
    } else {
      return std::to_string(v);
    }
  };
  f.set = [access](ExperimentConfig& c, const std::string& key, const std::string& text) {
    access(c) = ParseNumber<T>(key, text);
  };
  return f;
}

template <typename Access>
Field Bool(Access access) {
  Field f;
  f.get = [access](const ExperimentConfig& c) {
    return std::string(access(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
  };
  f.set = [access](ExperimentConfig& c, const std::string& key, const std::string& text) {
    access(c) = ParseBool(key, text);
  };
  return f;
}

const std::map<std::string, Field>& Fields() {
  using C = ExperimentConfig;
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> m;
    m["seed"] = Number<std::uint64_t>([](C& c) -> std::uint64_t& { return c.seed; });

    m["scene.height"] = Number<int>([](C& c) -> int& { return c.scene.height; });
    m["scene.width"] = Number<int>([](C& c) -> int& { return c.scene.width; });
    m["scene.noise_amplitude"] = Number<int>([](C& c) -> int& { return c.scene.noise_amplitude; });
    m["scene.min_objects"] = Number<int>([](C& c) -> int& { return c.scene.min_objects; });
    m["scene.max_objects"] = Number<int>([](C& c) -> int& { return c.scene.max_objects; });
    m["scene.min_speed"] = Number<int>([](C& c) -> int& { return c.scene.min_speed; });
    m["scene.max_speed"] = Number<int>([](C& c) -> int& { return c.scene.max_speed; });
    m["scene.clip_length"] = Number<int>([](C& c) -> int& { return c.scene.clip_length; });
    m["scene.blob_prob"] = Number<double>([](C& c) -> double& { return c.scene.blob_prob; });
    m["scene.camouflage_prob"] =
        Number<double>([](C& c) -> double& { return c.scene.camouflage_prob; });
    m["scene.flow_noise"] = Number<double>([](C& c) -> double& { return c.scene.flow_noise; });

    m["data.train_clips"] = Number<int>([](C& c) -> int& { return c.train_clips; });
    m["data.eval_clips"] = Number<int>([](C& c) -> int& { return c.eval_clips; });

    m["heatmap.per_class"] = Number<int>([](C& c) -> int& { return c.iconic_per_class; });
    m["heatmap.epochs"] = Number<int>([](C& c) -> int& { return c.classifier_epochs; });
    m["heatmap.width1"] = Number<int>([](C& c) -> int& { return c.classifier.width1; });
    m["heatmap.width2"] = Number<int>([](C& c) -> int& { return c.classifier.width2; });
    m["heatmap.learning_rate"] =
        Number<double>([](C& c) -> double& { return c.classifier.learning_rate; });
    m["heatmap.momentum"] = Number<double>([](C& c) -> double& { return c.classifier.momentum; });
    m["heatmap.init_std"] = Number<double>([](C& c) -> double& { return c.classifier.init_std; });

    m["net.fusion_width"] = Number<int>([](C& c) -> int& { return c.net.fusion_width; });
    m["net.flow_frames"] = Number<int>([](C& c) -> int& { return c.net.flow_frames; });
    m["net.use_motion"] = Bool([](C& c) -> bool& { return c.net.use_motion; });
    m["net.init_std"] = Number<double>([](C& c) -> double& { return c.net.init_std; });
    Field widths;
    widths.get = [](const C& c) {
      std::string s;
      for (size_t i = 0; i < c.net.widths.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(c.net.widths[i]);
      }
      return s;
    };
    widths.set = [](C& c, const std::string& key, const std::string& text) {
      std::vector<int> out;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(ParseNumber<int>(key, Trim(item)));
      if (out.empty()) throw DataError("config: empty list for key " + key);
      c.net.widths = out;
    };
    m["net.widths"] = widths;

    m["train.base_lr"] = Number<double>([](C& c) -> double& { return c.train.base_lr; });
    m["train.lr_decay"] = Number<double>([](C& c) -> double& { return c.train.lr_decay; });
    m["train.decay_interval"] = Number<int>([](C& c) -> int& { return c.train.decay_interval; });
    m["train.momentum"] = Number<double>([](C& c) -> double& { return c.train.momentum; });
    m["train.weight_decay"] = Number<double>([](C& c) -> double& { return c.train.weight_decay; });
    m["train.batch_size"] = Number<int>([](C& c) -> int& { return c.train.batch_size; });
    m["train.max_iterations"] = Number<int>([](C& c) -> int& { return c.train.max_iterations; });
    m["train.lambda_heatmap"] =
        Number<double>([](C& c) -> double& { return c.train.loss_weights.heatmap; });
    m["train.lambda_crf"] = Number<double>([](C& c) -> double& { return c.train.loss_weights.crf; });
    m["train.heatmap_foreground_only"] =
        Bool([](C& c) -> bool& { return c.train.heatmap_foreground_only; });
    m["train.lse_r"] = Number<double>([](C& c) -> double& { return c.train.lse_r; });
    m["train.mask_ratio"] = Number<double>([](C& c) -> double& { return c.train.mask_ratio; });
    m["train.crf_every"] = Number<int>([](C& c) -> int& { return c.train.crf_every; });
    Field kl;
    kl.get = [](const C& c) {
      return std::string(c.train.kl_direction == KlDirection::kCrfToNet ? "crf_to_net" : "net_to_crf");
    };
    kl.set = [](C& c, const std::string& key, const std::string& text) {
      if (text == "crf_to_net") {
        c.train.kl_direction = KlDirection::kCrfToNet;
      } else if (text == "net_to_crf") {
        c.train.kl_direction = KlDirection::kNetToCrf;
      } else {
        throw DataError("config: expected crf_to_net or net_to_crf for key " + key);
      }
    };
    m["train.kl_direction"] = kl;

    m["crf.w_bilateral"] = Number<double>([](C& c) -> double& { return c.train.crf.w_bilateral; });
    m["crf.w_spatial"] = Number<double>([](C& c) -> double& { return c.train.crf.w_spatial; });
    m["crf.sigma_alpha"] = Number<double>([](C& c) -> double& { return c.train.crf.sigma_alpha; });
    m["crf.sigma_beta"] = Number<double>([](C& c) -> double& { return c.train.crf.sigma_beta; });
    m["crf.sigma_gamma"] = Number<double>([](C& c) -> double& { return c.train.crf.sigma_gamma; });
    m["crf.iterations"] = Number<int>([](C& c) -> int& { return c.train.crf.iterations; });
    m["crf.scale_sigma_alpha"] = Bool([](C& c) -> bool& { return c.train.crf.scale_sigma_alpha; });
    m["crf.reference_width"] =
        Number<double>([](C& c) -> double& { return c.train.crf.reference_width; });
    Field mode;
    mode.get = [](const C& c) {
      return std::string(c.train.crf.mode == UpdateMode::kParallel ? "parallel" : "sequential");
    };
    mode.set = [](C& c, const std::string& key, const std::string& text) {
      if (text == "parallel") {
        c.train.crf.mode = UpdateMode::kParallel;
      } else if (text == "sequential") {
        c.train.crf.mode = UpdateMode::kSequential;
      } else {
        throw DataError("config: expected parallel or sequential for key " + key);
      }
    };
    m["crf.mode"] = mode;

    m["eval.use_crf"] = Bool([](C& c) -> bool& { return c.eval_use_crf; });
    return m;
  }();
  return fields;
}

}  // namespace

void ExperimentConfig::Finalize() {
  scene.seed = seed;
  train.seed = seed;
  net.num_classes = scene.num_classes();
  net.height = scene.height;
  net.width = scene.width;
  train.foreground_classes = scene.ForegroundClasses();
  if (train_clips < 1) throw InvalidArgument("config: data.train_clips must be >= 1");
  if (eval_clips < 1) throw InvalidArgument("config: data.eval_clips must be >= 1");
  if (iconic_per_class < 2) throw InvalidArgument("config: heatmap.per_class must be >= 2");
  if (classifier_epochs < 1) throw InvalidArgument("config: heatmap.epochs must be >= 1");
  if (net.use_motion && net.flow_frames > scene.clip_length - 1) {
    throw InvalidArgument("config: net.flow_frames exceeds the flows available in a clip");
  }
  scene.Validate();
  net.Validate();
  train.Validate();
}

std::map<std::string, std::string> ToKeyValues(const ExperimentConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : Fields()) out[key] = field.get(config);
  return out;
}

void SetKeyValue(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto it = Fields().find(key);
  if (it == Fields().end()) throw DataError("config: unknown key '" + key + "'");
  it->second.set(config, key, value);
}

ExperimentConfig ParseConfig(std::istream& in, const std::string& source) {
  ExperimentConfig config;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    try {
      SetKeyValue(config, key, value);
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  try {
    config.Finalize();
  } catch (const InvalidArgument& e) {
    throw DataError(source + ": " + e.what());
  }
  return config;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path.string());
  return ParseConfig(in, path.string());
}

void WriteConfig(std::ostream& out, const ExperimentConfig& config) {
  for (const auto& [key, value] : ToKeyValues(config)) out << key << " = " << value << "\n";
}

std::vector<std::string> DiffConfigs(const ExperimentConfig& a, const ExperimentConfig& b) {
  const auto ka = ToKeyValues(a);
  const auto kb = ToKeyValues(b);
  std::vector<std::string> diff;
  for (const auto& [key, value] : ka) {
    if (kb.at(key) != value) diff.push_back(key);
  }
  return diff;
}

}  // namespace vidseg
