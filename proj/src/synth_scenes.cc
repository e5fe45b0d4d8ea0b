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
#include "vidseg/synth_scenes.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include "vidseg/errors.h"
#include "vidseg/random.h"

namespace vidseg {
namespace {

struct MovingObject {
  int class_id;
  int x0, y0, w, h;
  int vx, vy;
  std::array<int, 3> color;
  std::vector<std::array<std::uint8_t, 3>> texture;  // w * h, object-local

  int x(int frame) const { return x0 + vx * frame; }
  int y(int frame) const { return y0 + vy * frame; }
  bool Covers(int frame, int py, int px) const {
    return px >= x(frame) && px < x(frame) + w && py >= y(frame) && py < y(frame) + h;
  }
};

std::uint8_t Noisy(Rng& rng, int base, int amplitude) {
  const int v = base + (amplitude > 0 ? rng.UniformInt(-amplitude, amplitude) : 0);
  return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

// Start coordinate range keeping [p, p + extent) inside [0, limit) for every
// frame of a clip moving at `v` per frame.
std::pair<int, int> StartRange(int limit, int extent, int v, int frames) {
  const int travel = v * (frames - 1);
  const int lo = std::max(0, -travel);
  const int hi = std::min(limit - extent, limit - extent - travel);
  return {lo, hi};
}

LabelMap BackgroundLayout(const SceneSpec& spec, Rng& rng) {
  const std::vector<int> bg = spec.BackgroundClasses();
  std::vector<int> bands = bg;
  int blob_class = -1;
  if (bg.size() >= 3) {
    blob_class = bands.back();
    bands.pop_back();
  }
  const int nb = static_cast<int>(bands.size());
  std::vector<int> bounds = {0};
  for (int b = 1; b < nb; ++b) {
    const int nominal = spec.height * b / nb;
    const int jitter = spec.height / (4 * nb);
    bounds.push_back(nominal + (jitter > 0 ? rng.UniformInt(-jitter, jitter) : 0));
  }
  bounds.push_back(spec.height);
  LabelMap map{spec.width, spec.height,
               std::vector<std::uint8_t>(static_cast<size_t>(spec.width) * spec.height)};
  for (int b = 0; b < nb; ++b) {
    for (int y = bounds[b]; y < bounds[b + 1]; ++y) {
      for (int x = 0; x < spec.width; ++x) map.at(y, x) = static_cast<std::uint8_t>(bands[b]);
    }
  }
  if (blob_class >= 0 && rng.Bernoulli(spec.blob_prob)) {
    const double cx = rng.Uniform(spec.width * 0.25, spec.width * 0.75);
    const double cy = rng.Uniform(spec.height * 0.25, spec.height * 0.75);
    const double rx = rng.Uniform(spec.width * 0.125, spec.width * 0.25);
    const double ry = rng.Uniform(spec.height * 0.125, spec.height * 0.25);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) map.at(y, x) = static_cast<std::uint8_t>(blob_class);
      }
    }
  }
  return map;
}

std::filesystem::path ClipDir(const std::filesystem::path& root, int id) {
  return root / ("clip_" + std::to_string(id));
}

}  // namespace

SceneSpec SceneSpec::Default() {
  SceneSpec spec;
  spec.palette = {
      {"sky", false, {110, 160, 230}},
      {"road", false, {110, 110, 110}},
      {"vegetation", false, {60, 140, 60}},
      {"car", true, {220, 190, 40}, MotionAxis::kHorizontal, 7, 10, 4, 6},
      {"person", true, {210, 60, 60}, MotionAxis::kVertical, 3, 4, 6, 9},
  };
  return spec;
}

void SceneSpec::Validate() const {
  if (height <= 0 || width <= 0) throw InvalidArgument("scene: non-positive resolution");
  if (palette.empty() || palette.size() > 255) {
    throw InvalidArgument("scene: palette must hold 1..255 classes");
  }
  if (BackgroundClasses().empty()) {
    throw InvalidArgument("scene: need at least one background class");
  }
  for (const ClassStyle& c : palette) {
    for (int v : c.color) {
      if (v < 0 || v > 255) throw InvalidArgument("scene: color out of [0, 255] for " + c.name);
    }
    if (c.foreground && (c.min_w < 1 || c.min_h < 1 || c.max_w < c.min_w || c.max_h < c.min_h)) {
      throw InvalidArgument("scene: bad object extents for " + c.name);
    }
  }
  if (noise_amplitude < 0) throw InvalidArgument("scene: negative noise amplitude");
  if (min_objects < 0 || max_objects < min_objects) {
    throw InvalidArgument("scene: bad object count range");
  }
  if (max_objects > 0 && ForegroundClasses().empty()) {
    throw InvalidArgument("scene: objects requested but no foreground classes");
  }
  if (min_speed < 0 || max_speed < min_speed) throw InvalidArgument("scene: bad speed range");
  if (clip_length < 2) throw InvalidArgument("scene: clip needs at least 2 frames");
  if (blob_prob < 0 || blob_prob > 1 || camouflage_prob < 0 || camouflage_prob > 1) {
    throw InvalidArgument("scene: probabilities must lie in [0, 1]");
  }
  if (flow_noise < 0) throw InvalidArgument("scene: negative flow noise");
}

std::vector<int> SceneSpec::ForegroundClasses() const {
  std::vector<int> out;
  for (int k = 0; k < num_classes(); ++k) {
    if (palette[k].foreground) out.push_back(k);
  }
  return out;
}

std::vector<int> SceneSpec::BackgroundClasses() const {
  std::vector<int> out;
  for (int k = 0; k < num_classes(); ++k) {
    if (!palette[k].foreground) out.push_back(k);
  }
  return out;
}

std::string ClipSample::FrameId() const {
  return "clip_" + std::to_string(clip_id) + "_" + std::to_string(reference_frame);
}

ClipSample GenerateClip(const SceneSpec& spec, int clip_id) {
  spec.Validate();
  Rng rng = Rng::Derive(spec.seed, static_cast<std::uint64_t>(clip_id));
  const int h = spec.height, w = spec.width, t_count = spec.clip_length;
  const int ref = spec.ReferenceFrame();

  const LabelMap background = BackgroundLayout(spec, rng);
  RgbImage bg_image{w, h, std::vector<std::uint8_t>(static_cast<size_t>(w) * h * 3)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& color = spec.palette[background.at(y, x)].color;
      for (int c = 0; c < 3; ++c) bg_image.at(y, x, c) = Noisy(rng, color[c], spec.noise_amplitude);
    }
  }

  const std::vector<int> fg = spec.ForegroundClasses();
  std::vector<MovingObject> objects;
  const int n_objects = fg.empty() ? 0 : rng.UniformInt(spec.min_objects, spec.max_objects);
  for (int i = 0; i < n_objects; ++i) {
    MovingObject o{};
    o.class_id = fg[rng.UniformInt(0, static_cast<int>(fg.size()) - 1)];
    const ClassStyle& style = spec.palette[o.class_id];
    o.w = rng.UniformInt(style.min_w, style.max_w);
    o.h = rng.UniformInt(style.min_h, style.max_h);
    const int speed = rng.UniformInt(spec.min_speed, spec.max_speed);
    const int sign = rng.Bernoulli(0.5) ? 1 : -1;
    if (style.axis == MotionAxis::kHorizontal) {
      o.vx = sign * speed;
    } else {
      o.vy = sign * speed;
    }
    const auto [xlo, xhi] = StartRange(w, o.w, o.vx, t_count);
    const auto [ylo, yhi] = StartRange(h, o.h, o.vy, t_count);
    if (xlo > xhi || ylo > yhi) {
      throw InvalidArgument("scene: " + style.name + " object of " + std::to_string(o.w) + "x" +
                            std::to_string(o.h) + " at speed " + std::to_string(speed) +
                            " cannot stay inside a " + std::to_string(w) + "x" +
                            std::to_string(h) + " frame for " + std::to_string(t_count) +
                            " frames");
    }
    o.x0 = rng.UniformInt(xlo, xhi);
    o.y0 = rng.UniformInt(ylo, yhi);
    o.color = style.color;
    if (rng.Bernoulli(spec.camouflage_prob)) {
      const int cy = o.y(ref) + o.h / 2, cx = o.x(ref) + o.w / 2;
      o.color = spec.palette[background.at(cy, cx)].color;
    }
    o.texture.resize(static_cast<size_t>(o.w) * o.h);
    for (auto& px : o.texture) {
      for (int c = 0; c < 3; ++c) px[c] = Noisy(rng, o.color[c], spec.noise_amplitude);
    }
    objects.push_back(std::move(o));
  }

  ClipSample clip;
  clip.clip_id = clip_id;
  clip.reference_frame = ref;
  for (int f = 0; f < t_count; ++f) {
    RgbImage frame = bg_image;
    LabelMap gt = background;
    for (const MovingObject& o : objects) {
      for (int dy = 0; dy < o.h; ++dy) {
        for (int dx = 0; dx < o.w; ++dx) {
          const int y = o.y(f) + dy, x = o.x(f) + dx;
          const auto& px = o.texture[dy * o.w + dx];
          for (int c = 0; c < 3; ++c) frame.at(y, x, c) = px[c];
          gt.at(y, x) = static_cast<std::uint8_t>(o.class_id);
        }
      }
    }
    clip.frames.push_back(std::move(frame));
    clip.gt_labels.push_back(std::move(gt));
  }
  for (int f = 0; f + 1 < t_count; ++f) {
    FlowField flow{w, h, std::vector<float>(static_cast<size_t>(w) * h * 2, 0.0f)};
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Topmost object wins, matching draw order.
        for (auto it = objects.rbegin(); it != objects.rend(); ++it) {
          if (it->Covers(f, y, x)) {
            flow.uv[(y * w + x) * 2] = static_cast<float>(it->vx);
            flow.uv[(y * w + x) * 2 + 1] = static_cast<float>(it->vy);
            break;
          }
        }
      }
    }
    if (spec.flow_noise > 0.0) {
      for (float& v : flow.uv) v += static_cast<float>(spec.flow_noise * rng.Normal());
    }
    clip.flows.push_back(std::move(flow));
  }
  clip.tags = DeriveTags(clip.gt_labels[ref], spec.num_classes());
  return clip;
}

TagSet DeriveTags(const LabelMap& labels, int num_classes) {
  std::vector<bool> seen(256, false);
  for (std::uint8_t v : labels.labels) seen[v] = true;
  std::vector<int> present;
  for (int k = 0; k < 256; ++k) {
    if (seen[k]) present.push_back(k);
  }
  return TagSet(std::move(present), num_classes);
}

void WriteDataset(const std::filesystem::path& root, const std::vector<ClipSample>& clips) {
  for (const ClipSample& clip : clips) {
    const auto dir = ClipDir(root, clip.clip_id);
    std::filesystem::create_directories(dir);
    for (size_t n = 0; n < clip.frames.size(); ++n) {
      WritePpm(dir / ("frame_" + std::to_string(n) + ".ppm"), clip.frames[n]);
      WritePgm(dir / ("gt_" + std::to_string(n) + ".pgm"), clip.gt_labels[n]);
    }
    for (size_t n = 0; n < clip.flows.size(); ++n) {
      WriteFlo(dir / ("flow_" + std::to_string(n) + ".flo"), clip.flows[n]);
    }
    std::ofstream tags(dir / "tags.txt");
    for (int k : clip.tags.present()) tags << k << "\n";
    if (!tags) throw DataError("write failed: " + (dir / "tags.txt").string());
  }
}

std::vector<ClipSample> ReadDataset(const std::filesystem::path& root, int num_classes) {
  std::vector<ClipSample> clips;
  if (!std::filesystem::exists(root)) return clips;
  const std::regex clip_re("clip_([0-9]+)");
  const std::regex file_re("(frame|flow|gt)_([0-9]+)\\.(ppm|flo|pgm)");
  std::map<int, std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, clip_re)) {
      dirs[std::stoi(m[1])] = entry.path();
    }
  }
  for (const auto& [id, dir] : dirs) {
    int frames = 0, flows = 0, gts = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      std::smatch m;
      const std::string name = entry.path().filename().string();
      if (!std::regex_match(name, m, file_re)) continue;
      const int n = std::stoi(m[2]) + 1;
      if (m[1] == "frame") frames = std::max(frames, n);
      if (m[1] == "flow") flows = std::max(flows, n);
      if (m[1] == "gt") gts = std::max(gts, n);
    }
    if (frames < 2 || flows != frames - 1 || gts != frames) {
      throw DataError("inconsistent frame/flow/gt counts in " + dir.string());
    }
    ClipSample clip;
    clip.clip_id = id;
    clip.reference_frame = (frames - 1) / 2;
    for (int n = 0; n < frames; ++n) {
      clip.frames.push_back(ReadPpm(dir / ("frame_" + std::to_string(n) + ".ppm")));
      clip.gt_labels.push_back(ReadPgm(dir / ("gt_" + std::to_string(n) + ".pgm")));
    }
    for (int n = 0; n < flows; ++n) {
      const auto path = dir / ("flow_" + std::to_string(n) + ".flo");
      clip.flows.push_back(ReadFlo(path));
      if (clip.flows.back().width != clip.frames[0].width ||
          clip.flows.back().height != clip.frames[0].height) {
        throw DataError("flow resolution differs from frames: " + path.string());
      }
    }
    const auto tags_path = dir / "tags.txt";
    std::ifstream tags_in(tags_path);
    if (!tags_in) throw DataError("missing tags file: " + tags_path.string());
    std::vector<int> present;
    std::string line;
    while (std::getline(tags_in, line)) {
      if (line.empty()) continue;
      try {
        present.push_back(std::stoi(line));
      } catch (const std::exception&) {
        throw DataError("bad tag '" + line + "' in " + tags_path.string());
      }
    }
    try {
      clip.tags = TagSet(std::move(present), num_classes);
    } catch (const InvalidArgument& e) {
      throw DataError(std::string(e.what()) + " in " + tags_path.string());
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::vector<LabeledImage> GenerateIconicImages(const SceneSpec& spec, int per_class,
                                               int size, std::uint64_t seed) {
  spec.Validate();
  Rng rng(seed);
  std::vector<LabeledImage> out;
  for (int k = 0; k < spec.num_classes(); ++k) {
    const ClassStyle& style = spec.palette[k];
    for (int i = 0; i < per_class; ++i) {
      RgbImage img{size, size, std::vector<std::uint8_t>(static_cast<size_t>(size) * size * 3)};
      if (!style.foreground) {
        for (int y = 0; y < size; ++y) {
          for (int x = 0; x < size; ++x) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = Noisy(rng, style.color[c], spec.noise_amplitude);
          }
        }
      } else {
        const std::vector<int> backgrounds = spec.BackgroundClasses();
        const ClassStyle& scene =
            spec.palette[backgrounds[rng.UniformInt(0, static_cast<int>(backgrounds.size()) - 1)]];
        for (int y = 0; y < size; ++y) {
          for (int x = 0; x < size; ++x) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = Noisy(rng, scene.color[c], spec.noise_amplitude);
          }
        }
        const int ow = std::min(rng.UniformInt(style.min_w, style.max_w), size);
        const int oh = std::min(rng.UniformInt(style.min_h, style.max_h), size);
        const int x0 = rng.UniformInt(0, size - ow);
        const int y0 = rng.UniformInt(0, size - oh);
        for (int y = y0; y < y0 + oh; ++y) {
          for (int x = x0; x < x0 + ow; ++x) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = Noisy(rng, style.color[c], spec.noise_amplitude);
          }
        }
      }
      out.push_back(LabeledImage{ImageToTensor(img), k});
    }
  }
  return out;
}

}  // namespace vidseg
