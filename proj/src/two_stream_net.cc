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
#include "vidseg/two_stream_net.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "vidseg/errors.h"
#include "vidseg/random.h"

namespace vidseg {
namespace {

std::string ConvName(const std::string& stream, int block, const char* part) {
  return stream + ".conv" + std::to_string(block) + "." + part;
}

Tensor GaussianKernel(Rng& rng, Shape shape, double std) {
  Tensor t(std::move(shape));
  const double fan_in = static_cast<double>(t.dim(1)) * t.dim(2) * t.dim(3);
  const double scale = std / std::sqrt(fan_in);
  for (double& v : t.values()) v = scale * rng.Normal();
  return t;
}

struct ParamLookup {
  const StreamWeights& weights;
  std::span<const Var> params;

  Var operator()(const std::string& name) const {
    for (int i = 0; i < weights.size(); ++i) {
      if (weights.name(i) == name) return params[i];
    }
    throw InvalidArgument("missing network parameter " + name);
  }
};

Var Stream(const ParamLookup& p, const std::string& stream, Var x, int blocks) {
  for (int b = 0; b < blocks; ++b) {
    x = Relu(Conv2d(x, p(ConvName(stream, b, "weight")), p(ConvName(stream, b, "bias")), 1, 1));
    if (b + 1 < blocks) x = MaxPool2(x);
  }
  return x;
}

std::string JoinInts(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> SplitInts(const std::string& s, const std::filesystem::path& where) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw DataError("bad integer list '" + s + "' in " + where.string());
    }
  }
  return out;
}

std::string Hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

std::pair<int, int> FlowWindow(int reference_frame, int frame_count) {
  if (frame_count < 1) throw InvalidArgument("flow window needs at least one frame");
  const int half = frame_count / 2;
  return {reference_frame + half - frame_count + 1, reference_frame + half};
}

FlowStack EncodeFlowStack(const std::vector<FlowField>& flows, int reference_frame,
                          int frame_count) {
  const auto [first, last] = FlowWindow(reference_frame, frame_count);
  if (first < 0 || last >= static_cast<int>(flows.size())) {
    throw InvalidArgument("flow stack for frame " + std::to_string(reference_frame) +
                          " needs flows " + std::to_string(first) + ".." +
                          std::to_string(last) + " but only " +
                          std::to_string(flows.size()) + " exist");
  }
  const int h = flows[first].height, w = flows[first].width;
  FlowStack stack;
  stack.reference_frame = reference_frame;
  stack.frame_count = frame_count;
  stack.channels = Tensor({1, 2 * frame_count, h, w});
  for (int f = first; f <= last; ++f) {
    const FlowField& flow = flows[f];
    if (flow.height != h || flow.width != w) {
      throw InvalidArgument("flow " + std::to_string(f) + " has a different resolution");
    }
    const int c = 2 * (f - first);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        stack.channels.at(0, c, y, x) = flow.u(y, x);
        stack.channels.at(0, c + 1, y, x) = flow.v(y, x);
      }
    }
    stack.frames.push_back(f);
  }
  return stack;
}

void NetConfig::Validate() const {
  if (num_classes < 2) throw InvalidArgument("net: need at least 2 classes");
  if (widths.size() < 2) throw InvalidArgument("net: need at least 2 conv blocks");
  for (int w : widths) {
    if (w <= 0) throw InvalidArgument("net: block widths must be positive");
  }
  if (fusion_width <= 0) throw InvalidArgument("net: fusion width must be positive");
  if (flow_frames < 1) throw InvalidArgument("net: flow_frames must be >= 1");
  if (height <= 0 || width <= 0 || height % OutputStride() != 0 ||
      width % OutputStride() != 0) {
    throw InvalidArgument("net: input " + std::to_string(height) + "x" +
                          std::to_string(width) + " must be a positive multiple of " +
                          std::to_string(OutputStride()));
  }
  if (!(init_std > 0.0)) throw InvalidArgument("net: init_std must be positive");
}

void StreamWeights::Add(std::string name, Tensor value) {
  if (Has(name)) throw InvalidArgument("duplicate parameter " + name);
  tensors_.emplace_back(std::move(name), std::move(value));
}

bool StreamWeights::Has(const std::string& name) const {
  for (const auto& [n, t] : tensors_) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& StreamWeights::Get(const std::string& name) const {
  for (const auto& [n, t] : tensors_) {
    if (n == name) return t;
  }
  throw InvalidArgument("missing network parameter " + name);
}

Tensor& StreamWeights::Get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).Get(name));
}

std::int64_t StreamWeights::NumParameters() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

bool StreamWeights::operator==(const StreamWeights& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].first != other.tensors_[i].first ||
        !(tensors_[i].second == other.tensors_[i].second)) {
      return false;
    }
  }
  return true;
}

StreamWeights InitWeights(const NetConfig& config, std::uint64_t seed) {
  config.Validate();
  Rng rng(seed);
  StreamWeights w;
  const int blocks = static_cast<int>(config.widths.size());
  auto add_stream = [&](const std::string& stream, int in_channels) {
    for (int b = 0; b < blocks; ++b) {
      const int out = config.widths[b];
      w.Add(ConvName(stream, b, "weight"),
            GaussianKernel(rng, {out, in_channels, 3, 3}, config.init_std));
      w.Add(ConvName(stream, b, "bias"), Tensor({out}));
      in_channels = out;
    }
  };
  const int deepest = config.widths.back();
  add_stream("appearance", 3);
  w.Add("score_appearance.weight",
        GaussianKernel(rng, {config.num_classes, deepest, 1, 1}, config.init_std));
  w.Add("score_appearance.bias", Tensor({config.num_classes}));
  if (config.use_motion) {
    add_stream("motion", 2 * config.flow_frames);
    w.Add("fusion.weight",
          GaussianKernel(rng, {config.fusion_width, 2 * deepest, 3, 3}, config.init_std));
    w.Add("fusion.bias", Tensor({config.fusion_width}));
    w.Add("score_motion.weight",
          GaussianKernel(rng, {config.num_classes, config.fusion_width, 1, 1}, config.init_std));
    w.Add("score_motion.bias", Tensor({config.num_classes}));
  }
  return w;
}

ForwardVars ForwardOnTape(std::span<const Var> params,
                          const StreamWeights& weights, Var image, Var flow,
                          const NetConfig& config) {
  if (static_cast<int>(params.size()) != weights.size()) {
    throw InvalidArgument("forward: parameter count mismatch");
  }
  const Tensor& iv = image.value();
  if (iv.rank() != 4 || iv.dim(0) != 1 || iv.dim(1) != 3 || iv.dim(2) != config.height ||
      iv.dim(3) != config.width) {
    throw InvalidArgument("forward: image " + ShapeToString(iv.shape()) +
                          " does not match configured 1x3x" + std::to_string(config.height) +
                          "x" + std::to_string(config.width));
  }
  const ParamLookup p{weights, params};
  const int blocks = static_cast<int>(config.widths.size());
  ForwardVars out;
  Var appearance = Stream(p, "appearance", image, blocks);
  out.appearance_scores =
      Conv2d(appearance, p("score_appearance.weight"), p("score_appearance.bias"), 1, 0);
  Var fused = out.appearance_scores;
  if (config.use_motion) {
    if (flow.is_null()) throw InvalidArgument("forward: motion stream needs a flow stack");
    const Tensor& fv = flow.value();
    if (fv.rank() != 4 || fv.dim(1) != 2 * config.flow_frames || fv.dim(2) != config.height ||
        fv.dim(3) != config.width) {
      throw InvalidArgument("forward: flow stack " + ShapeToString(fv.shape()) +
                            " does not match the configuration");
    }
    Var motion = Stream(p, "motion", flow, blocks);
    Var spatio_temporal = Relu(Conv2d(ConcatChannels(appearance, motion), p("fusion.weight"),
                                      p("fusion.bias"), 1, 1));
    out.motion_scores =
        Conv2d(spatio_temporal, p("score_motion.weight"), p("score_motion.bias"), 1, 0);
    fused = Add(out.appearance_scores, out.motion_scores);
  }
  out.scores = BilinearUpsample(fused, config.OutputStride());
  out.probs = SoftmaxChannels(out.scores);
  return out;
}

NetOutput Forward(const Tensor& image, const FlowStack* flow,
                  const StreamWeights& weights, const NetConfig& config) {
  Tape tape;
  std::vector<Var> params;
  for (int i = 0; i < weights.size(); ++i) params.push_back(tape.Constant(weights.tensor(i)));
  Var flow_var;
  if (config.use_motion) {
    if (flow == nullptr) throw InvalidArgument("forward: motion stream needs a flow stack");
    flow_var = tape.Constant(flow->channels);
  }
  ForwardVars v = ForwardOnTape(params, weights, tape.Constant(image), flow_var, config);
  return NetOutput{v.scores.value(), v.probs.value()};
}

void SaveCheckpoint(const std::filesystem::path& dir, const StreamWeights& weights,
                    const NetConfig& config) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw DataError("cannot write checkpoint manifest in " + dir.string());
  manifest << "# vidseg checkpoint\n";
  manifest << "config num_classes " << config.num_classes << "\n";
  manifest << "config widths " << JoinInts(config.widths) << "\n";
  manifest << "config fusion_width " << config.fusion_width << "\n";
  manifest << "config height " << config.height << "\n";
  manifest << "config width " << config.width << "\n";
  manifest << "config flow_frames " << config.flow_frames << "\n";
  manifest << "config use_motion " << (config.use_motion ? 1 : 0) << "\n";
  manifest << "config init_std " << std::setprecision(17) << config.init_std << "\n";
  for (int i = 0; i < weights.size(); ++i) {
    const std::string file = weights.name(i) + ".tsr";
    WriteTensor(dir / file, weights.tensor(i));
    manifest << "tensor " << weights.name(i) << ' ' << file << ' '
             << ShapeToString(weights.tensor(i).shape()) << ' '
             << Hex(TensorChecksum(weights.tensor(i))) << "\n";
  }
  if (!manifest) throw DataError("write failed: " + (dir / "manifest.txt").string());
}

std::pair<StreamWeights, NetConfig> LoadCheckpoint(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.txt";
  std::ifstream in(path);
  if (!in) throw DataError("missing checkpoint manifest: " + path.string());
  NetConfig config;
  StreamWeights weights;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind, key;
    ls >> kind >> key;
    if (kind == "config") {
      std::string value;
      ls >> value;
      try {
        if (key == "num_classes") config.num_classes = std::stoi(value);
        else if (key == "widths") config.widths = SplitInts(value, path);
        else if (key == "fusion_width") config.fusion_width = std::stoi(value);
        else if (key == "height") config.height = std::stoi(value);
        else if (key == "width") config.width = std::stoi(value);
        else if (key == "flow_frames") config.flow_frames = std::stoi(value);
        else if (key == "use_motion") config.use_motion = value == "1";
        else if (key == "init_std") config.init_std = std::stod(value);
        else throw DataError("unknown config key '" + key + "' in " + path.string());
      } catch (const std::logic_error&) {
        throw DataError("bad value for '" + key + "' in " + path.string());
      }
    } else if (kind == "tensor") {
      std::string file, shape, checksum;
      ls >> file >> shape >> checksum;
      Tensor t = ReadTensor(dir / file);
      if (ShapeToString(t.shape()) != shape) {
        throw DataError("shape mismatch for " + key + " in " + path.string());
      }
      if (Hex(TensorChecksum(t)) != checksum) {
        throw DataError("checksum mismatch for " + (dir / file).string());
      }
      weights.Add(key, std::move(t));
    } else {
      throw DataError("malformed manifest line '" + line + "' in " + path.string());
    }
  }
  try {
    config.Validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string(e.what()) + " (" + path.string() + ")");
  }
  const StreamWeights expected = InitWeights(config, 0);
  if (expected.size() != weights.size()) {
    throw DataError("checkpoint tensors do not match its config: " + path.string());
  }
  for (int i = 0; i < expected.size(); ++i) {
    if (!weights.Has(expected.name(i)) ||
        weights.Get(expected.name(i)).shape() != expected.tensor(i).shape()) {
      throw DataError("checkpoint is missing or misshapes " + expected.name(i) + ": " +
                      path.string());
    }
  }
  return {std::move(weights), config};
}

}  // namespace vidseg
