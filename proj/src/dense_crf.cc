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
#include "vidseg/dense_crf.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "vidseg/errors.h"
#include "vidseg/losses.h"

namespace vidseg {
namespace {

constexpr double kDistributionTolerance = 1e-6;

struct Layout {
  int k;
  int h;
  int w;
  int n;
};

Layout GetLayout(const Tensor& probs) {
  if (probs.rank() == 3) return {probs.dim(0), probs.dim(1), probs.dim(2), probs.dim(1) * probs.dim(2)};
  if (probs.rank() == 4 && probs.dim(0) == 1) {
    return {probs.dim(1), probs.dim(2), probs.dim(3), probs.dim(2) * probs.dim(3)};
  }
  throw InvalidArgument("crf: probabilities must be KxHxW or 1xKxHxW, got " +
                        ShapeToString(probs.shape()));
}

void CheckDistribution(const Tensor& probs, const Layout& l, const char* what) {
  for (int i = 0; i < l.n; ++i) {
    double sum = 0.0;
    for (int k = 0; k < l.k; ++k) {
      const double p = probs[static_cast<std::int64_t>(k) * l.n + i];
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw InvalidArgument(std::string("crf: ") + what + " has an invalid probability at pixel " +
                              std::to_string(i));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kDistributionTolerance) {
      throw InvalidArgument(std::string("crf: ") + what + " does not sum to 1 at pixel " +
                            std::to_string(i));
    }
  }
}

void CheckKernel(const PairwiseKernel& kernel, const Layout& l) {
  if (kernel.height() != l.h || kernel.width() != l.w) {
    throw InvalidArgument("crf: kernel grid does not match probability map");
  }
}

// Pixel-major copies: v[i * K + k].
std::vector<double> ToPixelMajor(const Tensor& t, const Layout& l) {
  std::vector<double> out(static_cast<size_t>(l.n) * l.k);
  for (int k = 0; k < l.k; ++k) {
    for (int i = 0; i < l.n; ++i) out[static_cast<size_t>(i) * l.k + k] = t[static_cast<std::int64_t>(k) * l.n + i];
  }
  return out;
}

std::vector<double> Unaries(const Tensor& probs, const Layout& l) {
  std::vector<double> psi = ToPixelMajor(probs, l);
  for (double& v : psi) v = -std::log(std::clamp(v, kProbEpsilon, 1.0 - kProbEpsilon));
  return psi;
}

// New distribution at pixel i from the current Q of every other pixel.
void UpdatePixel(int i, const Layout& l, const PairwiseKernel& kernel,
                 const std::vector<double>& psi, const std::vector<double>& q,
                 double* msg, double* out) {
  std::fill(msg, msg + l.k, 0.0);
  const double* row = kernel.row(i);
  for (int j = 0; j < l.n; ++j) {
    const double kij = row[j];
    const double* qj = q.data() + static_cast<size_t>(j) * l.k;
    for (int k = 0; k < l.k; ++k) msg[k] += kij * qj[k];
  }
  double total = 0.0;
  for (int k = 0; k < l.k; ++k) total += msg[k];
  // energy(k) = psi(k) + sum_{k' != k} msg(k')
  double lowest = 0.0;
  for (int k = 0; k < l.k; ++k) {
    out[k] = psi[static_cast<size_t>(i) * l.k + k] + (total - msg[k]);
    if (k == 0 || out[k] < lowest) lowest = out[k];
  }
  double z = 0.0;
  for (int k = 0; k < l.k; ++k) {
    out[k] = std::exp(-(out[k] - lowest));
    z += out[k];
  }
  for (int k = 0; k < l.k; ++k) out[k] /= z;
}

}  // namespace

void CrfConfig::Validate() const {
  if (!(w_bilateral >= 0.0) || !(w_spatial >= 0.0)) {
    throw InvalidArgument("crf: kernel weights must be non-negative");
  }
  if (!(sigma_alpha > 0.0 && sigma_beta > 0.0 && sigma_gamma > 0.0)) {
    throw InvalidArgument("crf: bandwidths must be positive");
  }
  if (iterations < 1) throw InvalidArgument("crf: iterations must be >= 1");
  if (scale_sigma_alpha && !(reference_width > 0.0)) {
    throw InvalidArgument("crf: reference width must be positive");
  }
}

double CrfConfig::EffectiveSigmaAlpha(int image_width) const {
  return scale_sigma_alpha ? sigma_alpha * image_width / reference_width : sigma_alpha;
}

PixelFeatures PixelFeatures::FromImage(const RgbImage& image) {
  PixelFeatures f;
  f.height = image.height;
  f.width = image.width;
  f.position.reserve(f.size());
  f.color.reserve(f.size());
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      f.position.push_back({static_cast<double>(x), static_cast<double>(y)});
      f.color.push_back({static_cast<double>(image.at(y, x, 0)),
                         static_cast<double>(image.at(y, x, 1)),
                         static_cast<double>(image.at(y, x, 2))});
    }
  }
  return f;
}

PairwiseKernel::PairwiseKernel(const PixelFeatures& features, const CrfConfig& config)
    : n_(features.size()), height_(features.height), width_(features.width) {
  config.Validate();
  if (static_cast<int>(features.position.size()) != n_ ||
      static_cast<int>(features.color.size()) != n_) {
    throw InvalidArgument("crf: feature count does not match the grid");
  }
  if (n_ > kMaxBruteForcePixels) {
    throw InvalidArgument("crf: " + std::to_string(height_) + "x" + std::to_string(width_) +
                          " grid exceeds the brute-force limit of " +
                          std::to_string(kMaxBruteForcePixels) + " pixels");
  }
  zero_ = config.w_bilateral == 0.0 && config.w_spatial == 0.0;
  k_.assign(static_cast<size_t>(n_) * n_, 0.0);
  if (zero_) return;
  const double sa = config.EffectiveSigmaAlpha(width_);
  const double inv_a = 1.0 / (2.0 * sa * sa);
  const double inv_b = 1.0 / (2.0 * config.sigma_beta * config.sigma_beta);
  const double inv_g = 1.0 / (2.0 * config.sigma_gamma * config.sigma_gamma);
  for (int i = 0; i < n_; ++i) {
    for (int j = i + 1; j < n_; ++j) {
      const double dx = features.position[i][0] - features.position[j][0];
      const double dy = features.position[i][1] - features.position[j][1];
      const double dp = dx * dx + dy * dy;
      double dc = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = features.color[i][c] - features.color[j][c];
        dc += d * d;
      }
      const double v = config.w_bilateral * std::exp(-dp * inv_a - dc * inv_b) +
                       config.w_spatial * std::exp(-dp * inv_g);
      k_[static_cast<size_t>(i) * n_ + j] = v;
      k_[static_cast<size_t>(j) * n_ + i] = v;
    }
  }
}

Tensor MeanField(const Tensor& unary_probs, const PixelFeatures& features,
                 const CrfConfig& config) {
  const Layout l = GetLayout(unary_probs);
  if (features.height != l.h || features.width != l.w) {
    throw InvalidArgument("crf: features do not match the probability map");
  }
  if (l.n > kMaxBruteForcePixels) {
    throw InvalidArgument("crf: grid exceeds the brute-force limit");
  }
  return MeanField(unary_probs, PairwiseKernel(features, config), config);
}

Tensor MeanField(const Tensor& unary_probs, const PairwiseKernel& kernel,
                 const CrfConfig& config) {
  config.Validate();
  const Layout l = GetLayout(unary_probs);
  CheckKernel(kernel, l);
  CheckDistribution(unary_probs, l, "unary input");
  // Without pairwise terms the unary distribution is already the fixed point.
  if (kernel.is_zero()) return unary_probs;

  const std::vector<double> psi = Unaries(unary_probs, l);
  std::vector<double> q = ToPixelMajor(unary_probs, l);
  std::vector<double> next(q.size());
  std::vector<double> msg(l.k);
  for (int it = 0; it < config.iterations; ++it) {
    if (config.mode == UpdateMode::kParallel) {
      for (int i = 0; i < l.n; ++i) {
        UpdatePixel(i, l, kernel, psi, q, msg.data(), next.data() + static_cast<size_t>(i) * l.k);
      }
      q.swap(next);
    } else {
      for (int i = 0; i < l.n; ++i) {
        UpdatePixel(i, l, kernel, psi, q, msg.data(), next.data());
        std::copy_n(next.data(), l.k, q.data() + static_cast<size_t>(i) * l.k);
      }
    }
  }
  Tensor out(unary_probs.shape());
  for (int k = 0; k < l.k; ++k) {
    for (int i = 0; i < l.n; ++i) out[static_cast<std::int64_t>(k) * l.n + i] = q[static_cast<size_t>(i) * l.k + k];
  }
  return out;
}

double FreeEnergy(const Tensor& q, const Tensor& unary_probs,
                  const PixelFeatures& features, const CrfConfig& config) {
  return FreeEnergy(q, unary_probs, PairwiseKernel(features, config));
}

double FreeEnergy(const Tensor& q, const Tensor& unary_probs,
                  const PairwiseKernel& kernel) {
  const Layout l = GetLayout(q);
  const Layout lu = GetLayout(unary_probs);
  if (l.k != lu.k || l.n != lu.n) throw InvalidArgument("free energy: shape mismatch");
  CheckKernel(kernel, l);
  CheckDistribution(q, l, "Q");
  const std::vector<double> psi = Unaries(unary_probs, lu);
  const std::vector<double> qp = ToPixelMajor(q, l);
  double unary = 0.0;
  double entropy = 0.0;
  for (size_t i = 0; i < qp.size(); ++i) {
    unary += qp[i] * psi[i];
    if (qp[i] > 0.0) entropy += qp[i] * std::log(qp[i]);
  }
  double pairwise = 0.0;
  for (int i = 0; i < l.n; ++i) {
    const double* qi = qp.data() + static_cast<size_t>(i) * l.k;
    double si = 0.0;
    for (int k = 0; k < l.k; ++k) si += qi[k];
    for (int j = i + 1; j < l.n; ++j) {
      const double kij = kernel(i, j);
      if (kij == 0.0) continue;
      const double* qj = qp.data() + static_cast<size_t>(j) * l.k;
      double sj = 0.0, same = 0.0;
      for (int k = 0; k < l.k; ++k) {
        sj += qj[k];
        same += qi[k] * qj[k];
      }
      pairwise += kij * (si * sj - same);
    }
  }
  return unary + pairwise + entropy;
}

}  // namespace vidseg
