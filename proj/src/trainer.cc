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
#include "vidseg/trainer.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>

#include "vidseg/errors.h"
#include "vidseg/random.h"

namespace vidseg {
namespace {

struct PreparedClip {
  Tensor image;
  std::optional<FlowStack> flow;
  TagSet tags;
  std::vector<BinaryMask> masks;
  std::unique_ptr<PairwiseKernel> kernel;
};

PreparedClip Prepare(const ClipSample& clip, const TrainConfig& config,
                     const NetConfig& net, const HeatmapCache& heatmaps) {
  PreparedClip p;
  const RgbImage& frame = clip.frames.at(clip.reference_frame);
  if (frame.height != net.height || frame.width != net.width) {
    throw InvalidArgument("clip " + std::to_string(clip.clip_id) + " is " +
                          std::to_string(frame.height) + "x" + std::to_string(frame.width) +
                          " but the network expects " + std::to_string(net.height) + "x" +
                          std::to_string(net.width));
  }
  if (clip.tags.num_classes() != net.num_classes) {
    throw InvalidArgument("clip tags cover a different class count than the network");
  }
  p.image = ImageToTensor(frame);
  if (net.use_motion) p.flow = EncodeFlowStack(clip.flows, clip.reference_frame, net.flow_frames);
  p.tags = clip.tags;
  if (config.loss_weights.heatmap > 0.0) {
    for (int k : clip.tags.present()) {
      if (config.heatmap_foreground_only &&
          std::find(config.foreground_classes.begin(), config.foreground_classes.end(), k) ==
              config.foreground_classes.end()) {
        continue;
      }
      const Heatmap& hm = heatmaps.Get(clip.FrameId(), k);
      BinaryMask mask = Binarize(hm, net.height, net.width, config.mask_ratio);
      if (!mask.empty()) p.masks.push_back(std::move(mask));
    }
  }
  if (config.loss_weights.crf > 0.0) {
    p.kernel = std::make_unique<PairwiseKernel>(PixelFeatures::FromImage(frame), config.crf);
  }
  return p;
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(base_lr > 0.0) || !(lr_decay > 0.0) || decay_interval < 1) {
    throw InvalidArgument("train: learning-rate schedule must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("train: momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw InvalidArgument("train: negative weight decay");
  if (batch_size < 1) throw InvalidArgument("train: batch size must be >= 1");
  if (max_iterations < 1) throw InvalidArgument("train: max_iterations must be >= 1");
  if (loss_weights.heatmap < 0.0 || loss_weights.crf < 0.0) {
    throw InvalidArgument("train: loss weights must be non-negative");
  }
  if (!(lse_r > 0.0)) throw InvalidArgument("train: lse_r must be positive");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw InvalidArgument("train: mask_ratio must lie in (0, 1)");
  if (crf_every < 1) throw InvalidArgument("train: crf_every must be >= 1");
  crf.Validate();
}

double TrainConfig::LearningRate(int iteration) const {
  return base_lr * std::pow(lr_decay, iteration / decay_interval);
}

void SgdStep(StreamWeights& weights, const std::vector<std::vector<double>>& grads,
             SgdState& state, const TrainConfig& config, int iteration) {
  if (static_cast<int>(grads.size()) != weights.size()) {
    throw InvalidArgument("sgd: gradient count does not match weights");
  }
  if (state.velocity.empty()) {
    for (int i = 0; i < weights.size(); ++i) state.velocity.emplace_back(weights.tensor(i).size(), 0.0);
  }
  const double lr = config.LearningRate(iteration);
  for (int i = 0; i < weights.size(); ++i) {
    Tensor& w = weights.tensor(i);
    const auto& g = grads[i];
    auto& v = state.velocity[i];
    if (static_cast<std::int64_t>(g.size()) != w.size() ||
        static_cast<std::int64_t>(v.size()) != w.size()) {
      throw InvalidArgument("sgd: shape mismatch for " + weights.name(i));
    }
    for (size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j])) {
        throw NumericError("sgd: non-finite gradient in " + weights.name(i) + " at element " +
                           std::to_string(j) + " (iteration " + std::to_string(iteration) + ")");
      }
    }
    for (size_t j = 0; j < g.size(); ++j) {
      const std::int64_t idx = static_cast<std::int64_t>(j);
      v[j] = config.momentum * v[j] - lr * (g[j] + config.weight_decay * w[idx]);
      w[idx] += v[j];
    }
  }
}

TrainResult Train(const std::vector<ClipSample>& dataset, const TrainConfig& config,
                  const NetConfig& net_config, const HeatmapCache& heatmaps,
                  const TrainObserver& observer) {
  config.Validate();
  net_config.Validate();
  if (dataset.empty()) throw InvalidArgument("train: empty dataset");

  std::vector<PreparedClip> clips;
  clips.reserve(dataset.size());
  for (const ClipSample& clip : dataset) clips.push_back(Prepare(clip, config, net_config, heatmaps));

  TrainResult result;
  result.weights = InitWeights(net_config, config.seed);
  SgdState state;
  Rng rng = Rng::Derive(config.seed, 0x5eed);
  std::vector<int> order(clips.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();

  CrfConfig crf = config.crf;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    std::vector<std::vector<double>> grads(result.weights.size());
    for (int i = 0; i < result.weights.size(); ++i) grads[i].assign(result.weights.tensor(i).size(), 0.0);
    LossReport report;
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.Shuffle(std::span<int>(order));
        cursor = 0;
      }
      const PreparedClip& clip = clips[order[cursor++]];

      Tape tape;
      std::vector<Var> params;
      for (int i = 0; i < result.weights.size(); ++i) params.push_back(tape.Leaf(result.weights.tensor(i)));
      Var flow = clip.flow ? tape.Constant(clip.flow->channels) : Var();
      ForwardVars net =
          ForwardOnTape(params, result.weights, tape.Constant(clip.image), flow, net_config);

      LossReport sample;
      Var total = TagLoss(net.probs, clip.tags, config.lse_r);
      sample.tag_loss = total.value()[0];
      TagLoss(net.probs.value(), clip.tags, config.lse_r, &sample.lse_scores);
      if (config.loss_weights.heatmap > 0.0 && !clip.masks.empty()) {
        Var hm = HeatmapLoss(net.probs, clip.masks, clip.tags);
        sample.heatmap_loss = hm.value()[0];
        total = Add(total, Scale(hm, config.loss_weights.heatmap));
      }
      if (config.loss_weights.crf > 0.0 && iter % config.crf_every == 0) {
        const Tensor target = MeanField(net.probs.value(), *clip.kernel, crf);
        Var kl = CrfConsistencyLoss(net.probs, target, config.kl_direction);
        sample.crf_loss = kl.value()[0];
        total = Add(total, Scale(kl, config.loss_weights.crf));
      }
      sample.total = total.value()[0];
      if (!std::isfinite(sample.total)) {
        throw NumericError("train: non-finite loss at iteration " + std::to_string(iter));
      }
      tape.Backward(total);
      for (int i = 0; i < result.weights.size(); ++i) {
        const std::vector<double> g = params[i].grad();
        for (size_t j = 0; j < g.size(); ++j) grads[i][j] += g[j];
      }
      report.tag_loss += sample.tag_loss;
      report.heatmap_loss += sample.heatmap_loss;
      report.crf_loss += sample.crf_loss;
      report.total += sample.total;
      report.lse_scores = std::move(sample.lse_scores);
    }
    if (config.batch_size > 1) {
      const double inv = 1.0 / config.batch_size;
      for (auto& g : grads) {
        for (double& v : g) v *= inv;
      }
      report.tag_loss *= inv;
      report.heatmap_loss *= inv;
      report.crf_loss *= inv;
      report.total *= inv;
    }
    SgdStep(result.weights, grads, state, config, iter);
    if (observer) observer(iter, report);
    result.curve.push_back(std::move(report));
  }
  return result;
}

HeatmapCache BuildHeatmapCache(const ClassifierBank& bank, const std::vector<ClipSample>& clips) {
  HeatmapCache cache;
  for (const ClipSample& clip : clips) {
    const Tensor image = ImageToTensor(clip.frames.at(clip.reference_frame));
    for (const Classifier& c : bank.classifiers) {
      cache.Put(clip.FrameId(), ExtractHeatmap(c, image));
    }
  }
  return cache;
}

LabelMap ArgmaxLabels(const Tensor& probs) {
  int k, h, w;
  if (probs.rank() == 4 && probs.dim(0) == 1) {
    k = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
  } else if (probs.rank() == 3) {
    k = probs.dim(0), h = probs.dim(1), w = probs.dim(2);
  } else {
    throw InvalidArgument("argmax: expected KxHxW or 1xKxHxW");
  }
  if (k > 256) throw InvalidArgument("argmax: too many classes for an 8-bit label map");
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  LabelMap out{w, h, std::vector<std::uint8_t>(plane, 0)};
  for (std::int64_t i = 0; i < plane; ++i) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (probs[c * plane + i] > probs[best * plane + i]) best = c;
    }
    out.labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelMap Infer(const StreamWeights& weights, const NetConfig& net_config,
               const RgbImage& image, const FlowStack* flow, const InferOptions& options) {
  if (image.height != net_config.height || image.width != net_config.width) {
    throw InvalidArgument("infer: image is " + std::to_string(image.height) + "x" +
                          std::to_string(image.width) + " but the checkpoint expects " +
                          std::to_string(net_config.height) + "x" +
                          std::to_string(net_config.width));
  }
  const NetOutput out = Forward(ImageToTensor(image), flow, weights, net_config);
  if (!options.use_crf) return ArgmaxLabels(out.probs);
  return ArgmaxLabels(MeanField(out.probs, PixelFeatures::FromImage(image), options.crf));
}

LabelMap InferClip(const StreamWeights& weights, const NetConfig& net_config,
                   const ClipSample& clip, const InferOptions& options) {
  std::optional<FlowStack> flow;
  if (net_config.use_motion) {
    flow = EncodeFlowStack(clip.flows, clip.reference_frame, net_config.flow_frames);
  }
  return Infer(weights, net_config, clip.frames.at(clip.reference_frame),
               flow ? &*flow : nullptr, options);
}

}  // namespace vidseg
