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
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vidseg/autodiff.h"
#include "vidseg/errors.h"
#include "vidseg/losses.h"
#include "vidseg/two_stream_net.h"

namespace vidseg {
namespace {

using testing::RandomProbs;
using testing::RandomTensor;
using testing::ScratchDir;

std::vector<FlowField> RandomFlows(Rng& rng, int count, int h, int w) {
  std::vector<FlowField> flows;
  for (int n = 0; n < count; ++n) {
    FlowField f{w, h, std::vector<float>(h * w * 2)};
    for (float& v : f.uv) v = static_cast<float>(rng.Uniform(-2, 2));
    flows.push_back(std::move(f));
  }
  return flows;
}

NetConfig SmallConfig(int k, int size, bool motion) {
  NetConfig c;
  c.num_classes = k;
  c.widths = {4, 6};
  c.fusion_width = 5;
  c.height = c.width = size;
  c.flow_frames = 2;
  c.use_motion = motion;
  return c;
}

TEST(FlowWindow, PaperExample) {
  EXPECT_EQ(FlowWindow(20, 10), (std::pair<int, int>{16, 25}));
  Rng rng(1);
  const auto flows = RandomFlows(rng, 30, 4, 4);
  const FlowStack s = EncodeFlowStack(flows, 20, 10);
  EXPECT_EQ(s.frames.front(), 16);
  EXPECT_EQ(s.frames.back(), 25);
  EXPECT_EQ(s.frames.size(), 10u);
  EXPECT_EQ(s.channels.shape(), (Shape{1, 20, 4, 4}));
}

TEST(FlowWindow, ShortWindow) {
  EXPECT_EQ(FlowWindow(5, 2), (std::pair<int, int>{5, 6}));
}

TEST(FlowWindow, CoverageForEvenAndOddLengths) {
  for (int t = 0; t < 40; ++t) {
    for (int l = 1; l <= 16; ++l) {
      const auto [first, last] = FlowWindow(t, l);
      EXPECT_EQ(last - first + 1, l);
      EXPECT_EQ(last, t + l / 2);
      EXPECT_EQ(first, t - (l + 1) / 2 + 1);
      if (l % 2 == 0) {
        EXPECT_EQ(first, t - l / 2 + 1);
      }
    }
  }
}

TEST(FlowStack, FrameMajorChannelOrder) {
  Rng rng(2);
  const auto flows = RandomFlows(rng, 8, 3, 5);
  const FlowStack s = EncodeFlowStack(flows, 4, 4);
  ASSERT_EQ(s.frames, (std::vector<int>{3, 4, 5, 6}));
  for (int m = 0; m < 4; ++m)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 5; ++x) {
        EXPECT_EQ(s.channels.at(0, 2 * m, y, x), flows[s.frames[m]].u(y, x));
        EXPECT_EQ(s.channels.at(0, 2 * m + 1, y, x), flows[s.frames[m]].v(y, x));
      }
}

TEST(FlowStack, ZeroMotionAndMissingFlows) {
  std::vector<FlowField> flows(6, FlowField{4, 4, std::vector<float>(32, 0.0f)});
  const FlowStack s = EncodeFlowStack(flows, 2, 4);
  for (double v : s.channels.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(EncodeFlowStack(flows, 5, 4), InvalidArgument);
  EXPECT_THROW(EncodeFlowStack(flows, 0, 4), InvalidArgument);
}

TEST(Net, OutputShapesAndValidProbs) {
  Rng rng(3);
  for (bool motion : {false, true}) {
    NetConfig c;
    c.use_motion = motion;
    c.height = c.width = 16;
    const StreamWeights w = InitWeights(c, 5);
    const Tensor image = RandomTensor(rng, {1, 3, 16, 16});
    const FlowStack flow = EncodeFlowStack(RandomFlows(rng, 12, 16, 16), 5, c.flow_frames);
    const NetOutput out = Forward(image, &flow, w, c);
    EXPECT_EQ(out.scores.shape(), (Shape{1, c.num_classes, 16, 16}));
    EXPECT_EQ(out.probs.shape(), (Shape{1, c.num_classes, 16, 16}));
    EXPECT_TRUE(out.probs.AllFinite());
    for (int i = 0; i < 256; ++i) {
      double total = 0.0;
      for (int k = 0; k < c.num_classes; ++k) total += out.probs[k * 256 + i];
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Net, LateFusionIsAdditive) {
  Rng rng(4);
  const NetConfig c = SmallConfig(3, 8, true);
  const StreamWeights w = InitWeights(c, 1);
  Tape tape;
  std::vector<Var> params;
  for (int i = 0; i < w.size(); ++i) params.push_back(tape.Constant(w.tensor(i)));
  const ForwardVars v = ForwardOnTape(params, w, tape.Constant(RandomTensor(rng, {1, 3, 8, 8})),
                                      tape.Constant(RandomTensor(rng, {1, 4, 8, 8})), c);
  Tensor sum = v.appearance_scores.value();
  for (std::int64_t i = 0; i < sum.size(); ++i) sum[i] += v.motion_scores.value()[i];
  EXPECT_TRUE(BilinearUpsampleForward(sum, c.OutputStride()) == v.scores.value());
}

TEST(Net, ZeroMotionScorePathEqualsAppearanceOnly) {
  Rng rng(5);
  const NetConfig two = SmallConfig(4, 8, true);
  const NetConfig one = SmallConfig(4, 8, false);
  StreamWeights w2 = InitWeights(two, 3);
  const StreamWeights w1 = InitWeights(one, 3);
  for (int i = 0; i < w1.size(); ++i) w2.Get(w1.name(i)) = w1.tensor(i);
  for (double& v : w2.Get("score_motion.weight").values()) v = 0.0;
  for (double& v : w2.Get("score_motion.bias").values()) v = 0.0;
  const Tensor image = RandomTensor(rng, {1, 3, 8, 8});
  const FlowStack flow = EncodeFlowStack(RandomFlows(rng, 6, 8, 8), 3, 2);
  EXPECT_TRUE(Forward(image, &flow, w2, two).probs == Forward(image, nullptr, w1, one).probs);
}

TEST(Net, ParameterNames) {
  const StreamWeights one = InitWeights(SmallConfig(3, 8, false), 1);
  EXPECT_TRUE(one.Has("appearance.conv0.weight"));
  EXPECT_TRUE(one.Has("appearance.conv1.bias"));
  EXPECT_TRUE(one.Has("score_appearance.weight"));
  EXPECT_FALSE(one.Has("motion.conv0.weight"));
  EXPECT_FALSE(one.Has("fusion.weight"));
  const StreamWeights two = InitWeights(SmallConfig(3, 8, true), 1);
  EXPECT_EQ(two.Get("motion.conv0.weight").shape(), (Shape{4, 4, 3, 3}));
  EXPECT_EQ(two.Get("fusion.weight").shape(), (Shape{5, 12, 3, 3}));
  EXPECT_EQ(two.Get("score_motion.weight").shape(), (Shape{3, 5, 1, 1}));
}

TEST(Net, InitIsSeededAndScaled) {
  NetConfig c;
  EXPECT_TRUE(InitWeights(c, 7) == InitWeights(c, 7));
  EXPECT_FALSE(InitWeights(c, 7) == InitWeights(c, 8));
  const StreamWeights w = InitWeights(c, 7);
  const Tensor& k = w.Get("appearance.conv2.weight");
  double sq = 0.0;
  for (double v : k.values()) sq += v * v;
  const double expected = c.init_std / std::sqrt(static_cast<double>(k.dim(1) * 9));
  EXPECT_NEAR(std::sqrt(sq / k.size()), expected, 0.05 * expected);
  for (double v : w.Get("appearance.conv2.bias").values()) EXPECT_EQ(v, 0.0);
}

TEST(Net, InvalidConfigsAndInputs) {
  NetConfig c;
  c.height = 30;
  EXPECT_THROW(c.Validate(), InvalidArgument);
  c = NetConfig{};
  c.num_classes = 1;
  EXPECT_THROW(c.Validate(), InvalidArgument);
  c = SmallConfig(3, 8, true);
  const StreamWeights w = InitWeights(c, 1);
  EXPECT_THROW(Forward(Tensor({1, 3, 8, 8}), nullptr, w, c), InvalidArgument);
  EXPECT_THROW(Forward(Tensor({1, 3, 16, 16}), nullptr, InitWeights(SmallConfig(3, 8, false), 1),
                       SmallConfig(3, 8, false)),
               InvalidArgument);
}

TEST(Net, TotalLossGradientMatchesFiniteDifferences) {
  Rng rng(6);
  const NetConfig c = SmallConfig(3, 16, true);
  // Zero init biases put dead fusion positions exactly on the relu kink.
  StreamWeights w = InitWeights(c, 2);
  for (int i = 0; i < w.size(); ++i)
    for (double& v : w.tensor(i).values()) v += rng.Uniform(-0.05, 0.05);
  const Tensor image = RandomTensor(rng, {1, 3, 16, 16});
  const Tensor flow = RandomTensor(rng, {1, 4, 16, 16});
  const TagSet tags({0, 2}, 3);
  std::vector<std::uint8_t> bits(256, 0);
  for (auto& b : bits) b = rng.Bernoulli(0.25);
  BinaryMask mask{2, 16, 16, bits, 0};
  for (auto b : bits) mask.count += b;
  const std::vector<BinaryMask> masks = {mask};
  const Tensor crf = RandomProbs(rng, 3, 16, 16).Reshaped({1, 3, 16, 16});
  std::vector<Tensor> inputs;
  for (int i = 0; i < w.size(); ++i) inputs.push_back(w.tensor(i));
  const double err = GradCheck(
      [&](Tape& tape, std::span<const Var> params) {
        const ForwardVars v = ForwardOnTape(params, w, tape.Constant(image), tape.Constant(flow), c);
        return Add(Add(TagLoss(v.probs, tags), HeatmapLoss(v.probs, masks, tags)),
                   CrfConsistencyLoss(v.probs, crf));
      },
      inputs);
  EXPECT_LT(err, 1e-4);
}

TEST(Checkpoint, RoundTripReproducesForward) {
  Rng rng(7);
  for (bool motion : {false, true}) {
    const NetConfig c = SmallConfig(3, 8, motion);
    StreamWeights w = InitWeights(c, 4);
    for (int i = 0; i < w.size(); ++i)
      for (double& v : w.tensor(i).values()) v += rng.Uniform(-0.1, 0.1);
    const auto dir = ScratchDir(motion ? "ckpt2" : "ckpt1");
    SaveCheckpoint(dir, w, c);
    const auto [loaded, config] = LoadCheckpoint(dir);
    EXPECT_TRUE(config == c);
    EXPECT_TRUE(loaded == w);
    const Tensor image = RandomTensor(rng, {1, 3, 8, 8});
    const FlowStack flow = EncodeFlowStack(RandomFlows(rng, 4, 8, 8), 1, 2);
    EXPECT_TRUE(Forward(image, &flow, loaded, config).probs == Forward(image, &flow, w, c).probs);
  }
}

TEST(Checkpoint, CorruptionIsDetected) {
  const NetConfig c = SmallConfig(3, 8, false);
  const auto dir = ScratchDir("ckpt_bad");
  SaveCheckpoint(dir, InitWeights(c, 4), c);
  Tensor t = ReadTensor(dir / "score_appearance.bias.tsr");
  t[0] += 1.0;
  WriteTensor(dir / "score_appearance.bias.tsr", t);
  EXPECT_THROW(LoadCheckpoint(dir), DataError);
  EXPECT_THROW(LoadCheckpoint(dir / "missing"), DataError);
}

}  // namespace
}  // namespace vidseg
