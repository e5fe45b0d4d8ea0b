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
#include "vidseg/tensor.h"

namespace vidseg {
namespace {

using testing::MaxAbsDiff;
using testing::RandomTensor;
using testing::ScratchDir;

Tensor NestedLoopConv(const Tensor& x, const Tensor& k, const Tensor* b, int stride, int pad) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int o = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const int ho = (h + 2 * pad - kh) / stride + 1, wo = (w + 2 * pad - kw) / stride + 1;
  Tensor out({n, o, ho, wo});
  for (int in = 0; in < n; ++in)
    for (int oc = 0; oc < o; ++oc)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx) {
          double acc = b ? (*b)[oc] : 0.0;
          for (int ic = 0; ic < c; ++ic)
            for (int dy = 0; dy < kh; ++dy)
              for (int dx = 0; dx < kw; ++dx) {
                const int sy = y * stride + dy - pad, sx = xx * stride + dx - pad;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                acc += x.at(in, ic, sy, sx) * k.at(oc, ic, dy, dx);
              }
          out.at(in, oc, y, xx) = acc;
        }
  return out;
}

TEST(Tensor, ShapeAndValues) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6);
  EXPECT_EQ(t.Sum(), 9.0);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), InvalidArgument);
  EXPECT_THROW(Tensor({2, -1}), InvalidArgument);
}

TEST(Tensor, SnapshotRoundTrip) {
  Rng rng(3);
  const Tensor t = RandomTensor(rng, {2, 3, 4, 5});
  const auto path = ScratchDir("tensor") / "t.tsr";
  WriteTensor(path, t);
  EXPECT_TRUE(ReadTensor(path) == t);
  EXPECT_EQ(TensorChecksum(ReadTensor(path)), TensorChecksum(t));
}

TEST(Tensor, TruncatedSnapshotIsDataError) {
  Rng rng(4);
  const auto path = ScratchDir("tensor_trunc") / "t.tsr";
  WriteTensor(path, RandomTensor(rng, {4, 4}));
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(ReadTensor(path), DataError);
}

TEST(Conv2d, OnesTimesScalar) {
  Tape tape;
  Var y = Conv2d(tape.Constant(Tensor({1, 1, 3, 3}, 1.0)), tape.Constant(Tensor({1, 1, 1, 1}, 2.0)),
                 Var());
  for (double v : y.value().values()) EXPECT_EQ(v, 2.0);
}

TEST(Conv2d, HandSum) {
  Tape tape;
  Var y = Conv2d(tape.Constant(Tensor({1, 1, 2, 2}, {1, 2, 3, 4})),
                 tape.Constant(Tensor({1, 1, 2, 2}, {1, 0, 0, 1})), Var());
  ASSERT_EQ(y.value().size(), 1);
  EXPECT_EQ(y.value()[0], 5.0);
}

TEST(Conv2d, MatchesNestedLoopReference) {
  Rng rng(11);
  const Tensor x = RandomTensor(rng, {1, 2, 5, 5});
  const Tensor k = RandomTensor(rng, {3, 2, 3, 3});
  EXPECT_LE(MaxAbsDiff(Conv2dForward(x, k, nullptr, 1, 0), NestedLoopConv(x, k, nullptr, 1, 0)),
            1e-12);
}

TEST(Conv2d, RandomShapesMatchReference) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = rng.UniformInt(1, 3), o = rng.UniformInt(1, 3);
    const int kh = rng.UniformInt(1, 3), kw = kh;
    const int pad = rng.UniformInt(0, 1), stride = rng.UniformInt(1, 2);
    int h = rng.UniformInt(kh, 7), w = rng.UniformInt(kw, 7);
    // Pick extents that divide exactly for the stride.
    while ((h + 2 * pad - kh) % stride) ++h;
    while ((w + 2 * pad - kw) % stride) ++w;
    const Tensor x = RandomTensor(rng, {rng.UniformInt(1, 2), c, h, w});
    const Tensor k = RandomTensor(rng, {o, c, kh, kw});
    const Tensor b = RandomTensor(rng, {o});
    EXPECT_LE(MaxAbsDiff(Conv2dForward(x, k, &b, stride, pad), NestedLoopConv(x, k, &b, stride, pad)),
              1e-12);
  }
}

TEST(Conv2d, InexactExtentIsError) {
  Tape tape;
  EXPECT_THROW(Conv2d(tape.Constant(Tensor({1, 1, 4, 4})), tape.Constant(Tensor({1, 1, 3, 3})),
                      Var(), 2, 0),
               InvalidArgument);
}

TEST(Relu, ValuesAndSubgradient) {
  Tape tape;
  Var x = tape.Leaf(Tensor({3}, {-1, 0, 2}));
  Var y = Relu(x);
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_EQ(y.value()[1], 0.0);
  EXPECT_EQ(y.value()[2], 2.0);
  tape.Backward(Sum(y));
  EXPECT_EQ(x.grad(), (std::vector<double>{0, 0, 1}));
}

TEST(Relu, PositiveInputUnchanged) {
  Tape tape;
  const Tensor t({4}, {0.5, 1, 2, 3});
  EXPECT_TRUE(Relu(tape.Constant(t)).value() == t);
}

TEST(MaxPool2, HandCaseAndConstant) {
  Tape tape;
  EXPECT_EQ(MaxPool2(tape.Constant(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}))).value()[0], 4.0);
  Var c = MaxPool2(tape.Constant(Tensor({1, 2, 4, 6}, 7.0)));
  EXPECT_EQ(c.value().shape(), (Shape{1, 2, 2, 3}));
  for (double v : c.value().values()) EXPECT_EQ(v, 7.0);
}

TEST(MaxPool2, MatchesWindowEnumeration) {
  Rng rng(5);
  const Tensor x = RandomTensor(rng, {1, 1, 6, 6});
  Tape tape;
  const Tensor y = MaxPool2(tape.Constant(x)).value();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double m = -1e300;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) m = std::max(m, x.at(0, 0, 2 * i + dy, 2 * j + dx));
      EXPECT_EQ(y.at(0, 0, i, j), m);
    }
}

TEST(MaxPool2, TieRoutesGradientToFirstElement) {
  Tape tape;
  Var x = tape.Leaf(Tensor({1, 1, 2, 2}, 3.0));
  tape.Backward(Sum(MaxPool2(x)));
  EXPECT_EQ(x.grad(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(MaxPool2, OddExtentIsError) {
  Tape tape;
  EXPECT_THROW(MaxPool2(tape.Constant(Tensor({1, 1, 3, 4}))), InvalidArgument);
}

TEST(Softmax, UniformAndAnalytic) {
  const Tensor u = SoftmaxChannelsForward(Tensor({1, 4, 2, 2}, 0.0));
  for (double v : u.values()) EXPECT_DOUBLE_EQ(v, 0.25);
  const Tensor p = SoftmaxChannelsForward(Tensor({1, 2, 1, 1}, {std::log(1.0), std::log(3.0)}));
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, DistributionAndShiftInvariance) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor s = RandomTensor(rng, {1, 4, 3, 5}, -20, 20);
    const Tensor p = SoftmaxChannelsForward(s);
    for (int i = 0; i < 15; ++i) {
      double total = 0.0;
      for (int c = 0; c < 4; ++c) {
        EXPECT_GE(p[c * 15 + i], 0.0);
        total += p[c * 15 + i];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
      const double shift = rng.Uniform(-50, 50);
      for (int c = 0; c < 4; ++c) s[c * 15 + i] += shift;
    }
    EXPECT_LE(MaxAbsDiff(SoftmaxChannelsForward(s), p), 1e-12);
  }
}

TEST(Softmax, SingleChannelIsError) {
  Tape tape;
  EXPECT_THROW(SoftmaxChannels(tape.Constant(Tensor({1, 1, 2, 2}))), InvalidArgument);
}

TEST(Upsample, ConstantAndIdentity) {
  Rng rng(2);
  for (int f : {1, 2, 3, 4}) {
    const Tensor up = BilinearUpsampleForward(Tensor({1, 2, 3, 2}, 1.25), f);
    EXPECT_EQ(up.shape(), (Shape{1, 2, 3 * f, 2 * f}));
    for (double v : up.values()) EXPECT_DOUBLE_EQ(v, 1.25);
  }
  const Tensor x = RandomTensor(rng, {1, 3, 4, 5});
  EXPECT_TRUE(BilinearUpsampleForward(x, 1) == x);
}

double BilinearOracle(const Tensor& x, int f, int oy, int ox) {
  const int h = x.dim(2), w = x.dim(3);
  auto coord = [f](int o, int extent) {
    double s = (o + 0.5) / f - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(extent - 1));
  };
  const double sy = coord(oy, h), sx = coord(ox, w);
  const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double ty = sy - y0, tx = sx - x0;
  return (1 - ty) * ((1 - tx) * x.at(0, 0, y0, x0) + tx * x.at(0, 0, y0, x1)) +
         ty * ((1 - tx) * x.at(0, 0, y1, x0) + tx * x.at(0, 0, y1, x1));
}

TEST(Upsample, MatchesCoordinateOracle) {
  const Tensor x({1, 1, 2, 2}, {0, 1, 0, 1});
  const Tensor up = BilinearUpsampleForward(x, 2);
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx) EXPECT_NEAR(up.at(0, 0, y, xx), BilinearOracle(x, 2, y, xx), 1e-15);
  EXPECT_DOUBLE_EQ(up.at(0, 0, 0, 1), 0.25);
  Rng rng(21);
  const Tensor r = RandomTensor(rng, {1, 1, 3, 4});
  const Tensor u4 = BilinearUpsampleForward(r, 4);
  for (int y = 0; y < 12; ++y)
    for (int xx = 0; xx < 16; ++xx) EXPECT_NEAR(u4.at(0, 0, y, xx), BilinearOracle(r, 4, y, xx), 1e-14);
}

TEST(Concat, ShapeIdentityAndGradient) {
  Tape tape;
  Var a = tape.Leaf(Tensor({1, 2, 3, 3}, 1.0));
  Var b = tape.Leaf(Tensor({1, 3, 3, 3}, 2.0));
  Var c = ConcatChannels(a, b);
  EXPECT_EQ(c.value().shape(), (Shape{1, 5, 3, 3}));
  EXPECT_TRUE(ConcatChannels(a, Var()).value() == a.value());
  tape.Backward(Sum(c));
  for (double g : a.grad()) EXPECT_EQ(g, 1.0);
  for (double g : b.grad()) EXPECT_EQ(g, 1.0);
}

TEST(GradCheck, SumAndSquare) {
  Rng rng(1);
  // Integers and a power-of-two step keep the central differences exact.
  EXPECT_EQ(GradCheck([](Tape&, Var x) { return Sum(x); }, Tensor({3}, {1, -2, 3}), 0x1p-10), 0.0);
  EXPECT_LT(GradCheck([](Tape&, Var x) { return Sum(x); }, RandomTensor(rng, {5})), 1e-10);
  EXPECT_LT(GradCheck([](Tape&, Var x) { return Sum(Mul(x, x)); }, Tensor({2}, {1, 2})), 1e-8);
  Tape tape;
  Var x = tape.Leaf(Tensor({2}, {1, 2}));
  tape.Backward(Sum(Mul(x, x)));
  EXPECT_NEAR(x.grad()[0], 2.0, 1e-15);
  EXPECT_NEAR(x.grad()[1], 4.0, 1e-15);
}

TEST(GradCheck, EpsilonRangeEnforced) {
  EXPECT_THROW(GradCheck([](Tape&, Var x) { return Sum(x); }, Tensor({1}, 1.0), 1e-2),
               InvalidArgument);
}

TEST(GradCheck, EveryOperationOnRandomInputs) {
  Rng rng(17);
  constexpr double kTol = 1e-6;
  // Relu and maxpool are evaluated away from their kinks.
  Tensor away = RandomTensor(rng, {1, 2, 4, 4}, 0.1, 1.0);
  for (std::int64_t i = 0; i < away.size(); ++i) {
    if (i % 2) away[i] = -away[i];
    away[i] += 0.01 * i;
  }
  const Tensor x = RandomTensor(rng, {1, 2, 4, 4});
  const Tensor k = RandomTensor(rng, {3, 2, 3, 3});
  const Tensor b = RandomTensor(rng, {3});
  const Tensor w = RandomTensor(rng, {1, 3, 4, 4});
  auto weighted = [&](Tape& tape, Var v) {
    Tensor wt(v.value().shape());
    for (std::int64_t i = 0; i < wt.size(); ++i) wt[i] = std::sin(1.0 + i);
    return Sum(Mul(v, tape.Constant(wt)));
  };

  std::vector<Tensor> conv_in = {x, k, b};
  EXPECT_LT(GradCheck(
                [&](Tape& t, std::span<const Var> in) { return weighted(t, Conv2d(in[0], in[1], in[2], 1, 1)); },
                conv_in),
            kTol);
  std::vector<Tensor> conv_stride = {x, RandomTensor(rng, {2, 2, 2, 2})};
  EXPECT_LT(GradCheck([&](Tape& t, std::span<const Var> in) {
              return weighted(t, Conv2d(in[0], in[1], Var(), 2, 0));
            },
            conv_stride),
            kTol);
  EXPECT_LT(GradCheck([&](Tape& t, Var v) { return weighted(t, Relu(v)); }, away), kTol);
  EXPECT_LT(GradCheck([&](Tape& t, Var v) { return weighted(t, MaxPool2(v)); }, away), kTol);
  EXPECT_LT(GradCheck([&](Tape& t, Var v) { return weighted(t, SoftmaxChannels(v)); }, w), kTol);
  EXPECT_LT(GradCheck([&](Tape& t, Var v) { return weighted(t, BilinearUpsample(v, 2)); }, x), kTol);
  EXPECT_LT(GradCheck([&](Tape& t, Var v) { return weighted(t, BilinearUpsample(v, 3)); }, x), kTol);
  EXPECT_LT(GradCheck([&](Tape& t, Var v) { return weighted(t, GlobalAveragePool(v)); }, x), kTol);
  EXPECT_LT(GradCheck([&](Tape& t, Var v) { return weighted(t, Scale(v, -2.5)); }, x), kTol);
  std::vector<Tensor> pair = {x, RandomTensor(rng, {1, 2, 4, 4})};
  EXPECT_LT(GradCheck([&](Tape& t, std::span<const Var> in) { return weighted(t, Add(in[0], in[1])); }, pair),
            kTol);
  EXPECT_LT(GradCheck([&](Tape& t, std::span<const Var> in) { return weighted(t, Mul(in[0], in[1])); }, pair),
            kTol);
  std::vector<Tensor> cat = {x, w};
  EXPECT_LT(GradCheck([&](Tape& t, std::span<const Var> in) {
              return weighted(t, ConcatChannels(in[0], in[1]));
            },
            cat),
            kTol);
  for (double label : {0.0, 1.0}) {
    EXPECT_LT(GradCheck([&](Tape&, Var v) { return SigmoidCrossEntropy(GlobalAveragePool(v), label); },
                        RandomTensor(rng, {1, 1, 4, 4})),
              kTol);
  }
}

TEST(Tape, ReplayIsBitwiseDeterministic) {
  Rng rng(9);
  const Tensor x = RandomTensor(rng, {1, 2, 6, 6});
  const Tensor k = RandomTensor(rng, {4, 2, 3, 3});
  auto run = [&] {
    Tape tape;
    Var kv = tape.Leaf(k);
    Var y = SoftmaxChannels(MaxPool2(Relu(Conv2d(tape.Constant(x), kv, Var(), 1, 1))));
    tape.Backward(Sum(Mul(y, y)));
    return kv.grad();
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, NonFiniteForwardIsNumericError) {
  Tape tape;
  Var x = tape.Leaf(Tensor({1}, 1e308));
  EXPECT_THROW(Scale(x, 10.0), NumericError);
}

TEST(Tape, BackwardNeedsScalar) {
  Tape tape;
  Var x = tape.Leaf(Tensor({2}, 1.0));
  EXPECT_THROW(tape.Backward(Relu(x)), InvalidArgument);
}

}  // namespace
}  // namespace vidseg
