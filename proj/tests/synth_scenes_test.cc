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
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vidseg/errors.h"
#include "vidseg/synth_scenes.h"

namespace vidseg {
namespace {

using testing::ScratchDir;

// Occlusion-free clips for exact shift and warp checks.
SceneSpec SingleObjectSpec(int speed) {
  SceneSpec s = SceneSpec::Default();
  s.min_objects = s.max_objects = 1;
  s.min_speed = s.max_speed = speed;
  return s;
}

TEST(SceneSpec, DefaultPalette) {
  const SceneSpec s = SceneSpec::Default();
  EXPECT_EQ(s.num_classes(), 5);
  EXPECT_EQ(s.BackgroundClasses(), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(s.ForegroundClasses(), (std::vector<int>{3, 4}));
  EXPECT_EQ(s.ReferenceFrame(), 5);
  EXPECT_NO_THROW(s.Validate());
}

TEST(GenerateClip, ShapesAndCounts) {
  const SceneSpec s = SceneSpec::Default();
  const ClipSample c = GenerateClip(s, 3);
  EXPECT_EQ(c.frames.size(), 12u);
  EXPECT_EQ(c.gt_labels.size(), 12u);
  EXPECT_EQ(c.flows.size(), 11u);
  EXPECT_EQ(c.reference_frame, 5);
  EXPECT_EQ(c.FrameId(), "clip_3_5");
  for (const auto& f : c.frames) EXPECT_EQ(f.pixels.size(), 32u * 32u * 3u);
  for (const auto& g : c.gt_labels) {
    for (auto v : g.labels) EXPECT_LT(v, 5);
  }
}

TEST(GenerateClip, Deterministic) {
  const SceneSpec s = SceneSpec::Default();
  EXPECT_TRUE(GenerateClip(s, 7) == GenerateClip(s, 7));
  EXPECT_FALSE(GenerateClip(s, 7) == GenerateClip(s, 8));
  SceneSpec other = s;
  other.seed = 2;
  EXPECT_FALSE(GenerateClip(s, 7) == GenerateClip(other, 7));
}

TEST(GenerateClip, ZeroVelocityGivesZeroFlow) {
  SceneSpec s = SceneSpec::Default();
  s.min_speed = s.max_speed = 0;
  for (int id = 0; id < 10; ++id) {
    const ClipSample c = GenerateClip(s, id);
    for (const auto& f : c.flows)
      for (float v : f.uv) EXPECT_EQ(v, 0.0f);
    for (size_t t = 1; t < c.frames.size(); ++t) EXPECT_TRUE(c.frames[t] == c.frames[0]);
  }
}

TEST(GenerateClip, SingleBackgroundNoObjects) {
  SceneSpec s;
  s.palette = {ClassStyle{"floor", false, {90, 90, 90}}};
  s.min_objects = s.max_objects = 0;
  const ClipSample c = GenerateClip(s, 0);
  for (const auto& g : c.gt_labels)
    for (auto v : g.labels) EXPECT_EQ(v, 0);
  EXPECT_EQ(c.tags.present(), (std::vector<int>{0}));
}

TEST(GenerateClip, MasksShiftByTheVelocity) {
  for (int speed : {1, 2}) {
    const SceneSpec spec = SingleObjectSpec(speed);
    for (int id = 0; id < 20; ++id) {
      const ClipSample c = GenerateClip(spec, id);
      int cls = -1, u = 0, v = 0;
      for (int i = 0; i < 32 * 32; ++i) {
        if (c.gt_labels[0].labels[i] >= 3) {
          cls = c.gt_labels[0].labels[i];
          u = static_cast<int>(c.flows[0].uv[2 * i]);
          v = static_cast<int>(c.flows[0].uv[2 * i + 1]);
          break;
        }
      }
      ASSERT_GE(cls, 3);
      EXPECT_EQ(std::abs(u) + std::abs(v), speed);
      // Cars move horizontally, people vertically.
      if (cls == 3) {
        EXPECT_EQ(v, 0);
      } else {
        EXPECT_EQ(u, 0);
      }
      for (size_t t = 0; t + 1 < c.frames.size(); ++t) {
        for (int y = 0; y < 32; ++y)
          for (int x = 0; x < 32; ++x) {
            const bool on = c.gt_labels[t].at(y, x) == cls;
            const int sy = y - v, sx = x - u;
            const bool shifted = sy >= 0 && sy < 32 && sx >= 0 && sx < 32 &&
                                 c.gt_labels[t].at(sy, sx) == cls;
            EXPECT_EQ(c.gt_labels[t + 1].at(y, x) == cls, shifted);
            const bool moving = c.flows[t].u(y, x) != 0.0f || c.flows[t].v(y, x) != 0.0f;
            EXPECT_EQ(moving, on);
            if (on) {
              EXPECT_EQ(c.flows[t].u(y, x), static_cast<float>(u));
              EXPECT_EQ(c.flows[t].v(y, x), static_cast<float>(v));
            }
          }
      }
    }
  }
}

TEST(GenerateClip, WarpingByFlowReproducesNextFrame) {
  const SceneSpec spec = SingleObjectSpec(2);
  for (int id = 0; id < 20; ++id) {
    const ClipSample c = GenerateClip(spec, id);
    for (size_t t = 0; t + 1 < c.frames.size(); ++t) {
      const LabelMap& now = c.gt_labels[t];
      const LabelMap& next = c.gt_labels[t + 1];
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const int tx = x + static_cast<int>(c.flows[t].u(y, x));
          const int ty = y + static_cast<int>(c.flows[t].v(y, x));
          // Background pixels covered at t + 1 are occluded.
          if (now.at(y, x) < 3 && next.at(ty, tx) >= 3) continue;
          for (int ch = 0; ch < 3; ++ch) {
            EXPECT_EQ(c.frames[t + 1].at(ty, tx, ch), c.frames[t].at(y, x, ch));
          }
        }
    }
  }
}

TEST(GenerateClip, ObjectsStayInFrameOrSpecIsRejected) {
  SceneSpec s = SceneSpec::Default();
  s.min_speed = s.max_speed = 5;
  EXPECT_THROW(
      {
        for (int id = 0; id < 20; ++id) GenerateClip(s, id);
      },
      InvalidArgument);
  SceneSpec big = SceneSpec::Default();
  big.width = big.height = 8;
  EXPECT_THROW(
      {
        for (int id = 0; id < 20; ++id) GenerateClip(big, id);
      },
      InvalidArgument);
}

TEST(DeriveTags, ExactClassSet) {
  LabelMap zeros{4, 4, std::vector<std::uint8_t>(16, 0)};
  EXPECT_EQ(DeriveTags(zeros, 6).present(), (std::vector<int>{0}));
  LabelMap mixed = zeros;
  mixed.labels[3] = 5;
  mixed.labels[9] = 3;
  EXPECT_EQ(DeriveTags(mixed, 6).present(), (std::vector<int>{0, 3, 5}));
}

TEST(DeriveTags, ClipTagsMatchReferenceGroundTruth) {
  const SceneSpec s = SceneSpec::Default();
  for (int id = 0; id < 30; ++id) {
    const ClipSample c = GenerateClip(s, id);
    std::set<int> seen;
    for (auto v : c.gt_labels[c.reference_frame].labels) seen.insert(v);
    EXPECT_EQ(c.tags.present(), std::vector<int>(seen.begin(), seen.end()));
  }
}

TEST(Dataset, RoundTrip) {
  const SceneSpec s = SceneSpec::Default();
  std::vector<ClipSample> clips = {GenerateClip(s, 0), GenerateClip(s, 4)};
  SceneSpec noisy = s;
  noisy.flow_noise = 0.3;
  clips.push_back(GenerateClip(noisy, 9));
  const auto root = ScratchDir("dataset");
  WriteDataset(root, clips);
  EXPECT_TRUE(std::filesystem::exists(root / "clip_4" / "frame_0.ppm"));
  EXPECT_TRUE(std::filesystem::exists(root / "clip_4" / "flow_10.flo"));
  EXPECT_TRUE(std::filesystem::exists(root / "clip_4" / "gt_11.pgm"));
  EXPECT_TRUE(std::filesystem::exists(root / "clip_4" / "tags.txt"));
  const auto back = ReadDataset(root, s.num_classes());
  ASSERT_EQ(back.size(), 3u);
  for (size_t i = 0; i < clips.size(); ++i) EXPECT_TRUE(back[i] == clips[i]);
}

TEST(Dataset, EmptyOrMissingRootHasNoClips) {
  EXPECT_TRUE(ReadDataset(ScratchDir("dataset_empty"), 5).empty());
  EXPECT_TRUE(ReadDataset(ScratchDir("dataset_gone") / "nothing", 5).empty());
}

TEST(Dataset, TruncatedFlowNamesTheFile) {
  const auto root = ScratchDir("dataset_trunc");
  WriteDataset(root, {GenerateClip(SceneSpec::Default(), 1)});
  const auto bad = root / "clip_1" / "flow_3.flo";
  std::filesystem::resize_file(bad, std::filesystem::file_size(bad) - 5);
  try {
    ReadDataset(root, 5);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("flow_3.flo"), std::string::npos);
  }
}

TEST(Dataset, BadMagicNamesTheFile) {
  const auto root = ScratchDir("dataset_magic");
  WriteDataset(root, {GenerateClip(SceneSpec::Default(), 2)});
  const auto bad = root / "clip_2" / "frame_0.ppm";
  {
    std::fstream f(bad, std::ios::in | std::ios::out | std::ios::binary);
    f.write("P3", 2);
  }
  try {
    ReadDataset(root, 5);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("frame_0.ppm"), std::string::npos);
  }
}

TEST(IconicImages, LabelsAndDeterminism) {
  const SceneSpec s = SceneSpec::Default();
  const auto a = GenerateIconicImages(s, 4, 16, 3);
  ASSERT_EQ(a.size(), 20u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, static_cast<int>(i / 4));
    EXPECT_EQ(a[i].image.shape(), (Shape{1, 3, 16, 16}));
  }
  const auto b = GenerateIconicImages(s, 4, 16, 3);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i].image == b[i].image);
}

}  // namespace
}  // namespace vidseg
