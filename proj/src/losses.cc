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
#include "vidseg/losses.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "vidseg/errors.h"

namespace vidseg {
namespace {

struct ProbShape {
  int k;
  std::int64_t plane;
  int h;
  int w;
};

ProbShape GetProbShape(const Tensor& probs) {
  if (probs.rank() == 3) {
    return {probs.dim(0), static_cast<std::int64_t>(probs.dim(1)) * probs.dim(2),
            probs.dim(1), probs.dim(2)};
  }
  if (probs.rank() == 4 && probs.dim(0) == 1) {
    return {probs.dim(1), static_cast<std::int64_t>(probs.dim(2)) * probs.dim(3),
            probs.dim(2), probs.dim(3)};
  }
  throw InvalidArgument("probability map must be KxHxW or 1xKxHxW, got " +
                        ShapeToString(probs.shape()));
}

double Clamp(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }
bool InsideClamp(double p) { return p > kProbEpsilon && p < 1.0 - kProbEpsilon; }

// Softmax weights exp(r p_i) / sum_j exp(r p_j): the gradient of LsePool.
void LseWeights(std::span<const double> probs, double r, std::vector<double>* out) {
  double mx = probs[0];
  for (double p : probs) mx = std::max(mx, p);
  out->resize(probs.size());
  double z = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    (*out)[i] = std::exp(r * (probs[i] - mx));
    z += (*out)[i];
  }
  for (double& v : *out) v /= z;
}

struct TagTerms {
  double loss = 0.0;
  std::vector<double> lse;
  std::vector<double> dloss_dlse;  // per class
};

TagTerms ComputeTagTerms(const Tensor& probs, const TagSet& tags, double r) {
  const ProbShape s = GetProbShape(probs);
  if (s.k != tags.num_classes()) {
    throw InvalidArgument("tag set covers " + std::to_string(tags.num_classes()) +
                          " classes but probabilities have " + std::to_string(s.k));
  }
  TagTerms t;
  t.lse.resize(s.k);
  t.dloss_dlse.assign(s.k, 0.0);
  for (int k = 0; k < s.k; ++k) {
    t.lse[k] = LsePool(std::span<const double>(probs.data() + k * s.plane, s.plane), r);
  }
  const auto& present = tags.present();
  const double np = static_cast<double>(present.size());
  for (int k : present) {
    t.loss -= std::log(Clamp(t.lse[k])) / np;
    if (InsideClamp(t.lse[k])) t.dloss_dlse[k] = -1.0 / (np * t.lse[k]);
  }
  const std::vector<int> absent = tags.absent();
  if (!absent.empty()) {
    const double na = static_cast<double>(absent.size());
    for (int k : absent) {
      t.loss -= std::log(1.0 - Clamp(t.lse[k])) / na;
      if (InsideClamp(t.lse[k])) t.dloss_dlse[k] = 1.0 / (na * (1.0 - t.lse[k]));
    }
  }
  return t;
}

// Present classes that have a nonempty mask, paired with that mask.
std::vector<const BinaryMask*> UsableMasks(const ProbShape& s,
                                           std::span<const BinaryMask> masks,
                                           const TagSet& tags) {
  std::vector<const BinaryMask*> usable;
  for (const BinaryMask& m : masks) {
    if (m.height != s.h || m.width != s.w) {
      throw InvalidArgument("heatmap loss: mask " + std::to_string(m.height) + "x" +
                            std::to_string(m.width) + " does not match probability map " +
                            std::to_string(s.h) + "x" + std::to_string(s.w));
    }
    if (m.class_id < 0 || m.class_id >= s.k) {
      throw InvalidArgument("heatmap loss: mask class out of range");
    }
    if (tags.contains(m.class_id) && !m.empty()) usable.push_back(&m);
  }
  if (usable.empty()) {
    spdlog::warn("heatmap loss: no present class has a nonempty mask");
  }
  return usable;
}

double MaskedLogLoss(const Tensor& probs, const ProbShape& s,
                     const std::vector<const BinaryMask*>& usable) {
  if (usable.empty()) return 0.0;
  double loss = 0.0;
  for (const BinaryMask* m : usable) {
    const double* p = probs.data() + m->class_id * s.plane;
    double acc = 0.0;
    for (std::int64_t i = 0; i < s.plane; ++i) {
      if (m->mask[i]) acc -= std::log(Clamp(p[i]));
    }
    loss += acc / m->count;
  }
  return loss / static_cast<double>(usable.size());
}

void CheckSameShape(const Tensor& a, const Tensor& b) {
  const ProbShape sa = GetProbShape(a), sb = GetProbShape(b);
  if (sa.k != sb.k || sa.h != sb.h || sa.w != sb.w) {
    throw InvalidArgument("crf consistency: shape mismatch " + ShapeToString(a.shape()) +
                          " vs " + ShapeToString(b.shape()));
  }
}

}  // namespace

TagSet::TagSet(std::vector<int> present, int num_classes)
    : present_(std::move(present)), num_classes_(num_classes) {
  std::sort(present_.begin(), present_.end());
  present_.erase(std::unique(present_.begin(), present_.end()), present_.end());
  if (present_.empty()) throw InvalidArgument("tag set has no present classes");
  if (present_.front() < 0 || present_.back() >= num_classes) {
    throw InvalidArgument("tag id out of range [0, " + std::to_string(num_classes) + ")");
  }
}

std::vector<int> TagSet::absent() const {
  std::vector<int> out;
  for (int k = 0; k < num_classes_; ++k) {
    if (!contains(k)) out.push_back(k);
  }
  return out;
}

bool TagSet::contains(int class_id) const {
  return std::binary_search(present_.begin(), present_.end(), class_id);
}

double LsePool(std::span<const double> probs, double r) {
  if (probs.empty()) throw InvalidArgument("lse_pool: empty map");
  if (!(r > 0.0)) throw InvalidArgument("lse_pool: r must be positive");
  double mx = probs[0];
  for (double p : probs) mx = std::max(mx, p);
  double acc = 0.0;
  for (double p : probs) acc += std::exp(r * (p - mx));
  const double value = mx + std::log(acc / static_cast<double>(probs.size())) / r;
  // Rounding can push a constant map a hair past its maximum.
  return std::min(value, mx);
}

double TagLoss(const Tensor& probs, const TagSet& tags, double r,
               std::vector<double>* lse_scores) {
  TagTerms t = ComputeTagTerms(probs, tags, r);
  if (lse_scores) *lse_scores = std::move(t.lse);
  return t.loss;
}

double HeatmapLoss(const Tensor& probs, std::span<const BinaryMask> masks,
                   const TagSet& tags) {
  const ProbShape s = GetProbShape(probs);
  return MaskedLogLoss(probs, s, UsableMasks(s, masks, tags));
}

double CrfConsistencyLoss(const Tensor& net_probs, const Tensor& crf_probs,
                          KlDirection direction) {
  CheckSameShape(net_probs, crf_probs);
  const ProbShape s = GetProbShape(net_probs);
  const Tensor& from = direction == KlDirection::kCrfToNet ? crf_probs : net_probs;
  const Tensor& to = direction == KlDirection::kCrfToNet ? net_probs : crf_probs;
  double loss = 0.0;
  for (std::int64_t i = 0; i < from.size(); ++i) {
    if (from[i] > 0.0) loss += from[i] * (std::log(Clamp(from[i])) - std::log(Clamp(to[i])));
  }
  return loss / static_cast<double>(s.plane);
}

Var TagLoss(Var probs, const TagSet& tags, double r) {
  TagTerms t = ComputeTagTerms(probs.value(), tags, r);
  const Var inputs[] = {probs};
  return probs.tape()->Record(
      "tag_loss", Tensor::Scalar(t.loss), inputs,
      [probs, r, d = std::move(t.dloss_dlse)](Tape& tape, const Tensor& o) {
        const Tensor& pv = tape.value(probs);
        const ProbShape s = GetProbShape(pv);
        auto& g = tape.grad(probs);
        const double g0 = o.grad()[0];
        std::vector<double> w;
        for (int k = 0; k < s.k; ++k) {
          if (d[k] == 0.0) continue;
          LseWeights(std::span<const double>(pv.data() + k * s.plane, s.plane), r, &w);
          for (std::int64_t i = 0; i < s.plane; ++i) {
            g[k * s.plane + i] += g0 * d[k] * w[i];
          }
        }
      });
}

Var HeatmapLoss(Var probs, std::span<const BinaryMask> masks, const TagSet& tags) {
  const ProbShape s = GetProbShape(probs.value());
  const auto usable_ptrs = UsableMasks(s, masks, tags);
  const double value = MaskedLogLoss(probs.value(), s, usable_ptrs);
  std::vector<BinaryMask> usable;
  for (const BinaryMask* m : usable_ptrs) usable.push_back(*m);
  const Var inputs[] = {probs};
  return probs.tape()->Record(
      "heatmap_loss", Tensor::Scalar(value), inputs,
      [probs, s, usable = std::move(usable)](Tape& tape, const Tensor& o) {
        if (usable.empty()) return;
        const Tensor& pv = tape.value(probs);
        auto& g = tape.grad(probs);
        const double scale = o.grad()[0] / static_cast<double>(usable.size());
        for (const BinaryMask& m : usable) {
          const std::int64_t off = m.class_id * s.plane;
          for (std::int64_t i = 0; i < s.plane; ++i) {
            if (m.mask[i] && InsideClamp(pv[off + i])) {
              g[off + i] -= scale / (m.count * pv[off + i]);
            }
          }
        }
      });
}

Var CrfConsistencyLoss(Var net_probs, const Tensor& crf_probs, KlDirection direction) {
  const double value = CrfConsistencyLoss(net_probs.value(), crf_probs, direction);
  const Var inputs[] = {net_probs};
  return net_probs.tape()->Record(
      "crf_consistency_loss", Tensor::Scalar(value), inputs,
      [net_probs, crf_probs, direction](Tape& tape, const Tensor& o) {
        const Tensor& p = tape.value(net_probs);
        const double scale = o.grad()[0] / static_cast<double>(GetProbShape(p).plane);
        auto& g = tape.grad(net_probs);
        for (std::int64_t i = 0; i < p.size(); ++i) {
          if (direction == KlDirection::kCrfToNet) {
            // d/dp [-q log p] = -q / p
            if (crf_probs[i] > 0.0 && InsideClamp(p[i])) g[i] -= scale * crf_probs[i] / p[i];
          } else if (p[i] > 0.0) {
            // d/dp [p (log p - log q)] = log p + 1 - log q
            const double dlogp = InsideClamp(p[i]) ? 1.0 : 0.0;
            g[i] += scale * (std::log(Clamp(p[i])) + dlogp - std::log(Clamp(crf_probs[i])));
          }
        }
      });
}

std::string LossCsvHeader() { return "iter,tag_loss,heatmap_loss,crf_loss,total"; }

std::string LossCsvRow(int iteration, const LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g", iteration, r.tag_loss,
                r.heatmap_loss, r.crf_loss, r.total);
  return buf;
}

}  // namespace vidseg
