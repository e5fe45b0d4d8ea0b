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

#ifndef VIDSEG_DENSE_CRF_H_
#define VIDSEG_DENSE_CRF_H_

#include <array>
#include <vector>

#include "vidseg/image_io.h"
#include "vidseg/tensor.h"

namespace vidseg {

enum class UpdateMode { kParallel, kSequential };

// Fully-connected CRF with Potts compatibility and the kernel
//   w_bilateral * exp(-|p_i - p_j|^2 / 2 sa^2 - |c_i - c_j|^2 / 2 sb^2)
// + w_spatial   * exp(-|p_i - p_j|^2 / 2 sg^2).
// sigma_alpha is specified for a reference_width-pixel image and rescaled by
// width / reference_width unless scale_sigma_alpha is false.
struct CrfConfig {
  double w_bilateral = 10.0;
  double w_spatial = 3.0;
  double sigma_alpha = 80.0;
  double sigma_beta = 13.0;
  double sigma_gamma = 3.0;
  int iterations = 10;
  UpdateMode mode = UpdateMode::kParallel;
  bool scale_sigma_alpha = true;
  double reference_width = 500.0;

  void Validate() const;
  double EffectiveSigmaAlpha(int image_width) const;
};

struct PixelFeatures {
  int height = 0;
  int width = 0;
  std::vector<std::array<double, 2>> position;  // (x, y) in pixels
  std::vector<std::array<double, 3>> color;     // [0, 255]

  static PixelFeatures FromImage(const RgbImage& image);
  int size() const { return height * width; }
};

// Brute-force inference is quadratic in the pixel count; larger grids are
// rejected.
inline constexpr int kMaxBruteForcePixels = 64 * 64;

// Dense pairwise kernel matrix with a zero diagonal. Building it is the
// expensive part of inference, so it can be reused across calls on the same
// image.
class PairwiseKernel {
 public:
  PairwiseKernel(const PixelFeatures& features, const CrfConfig& config);

  int num_pixels() const { return n_; }
  int height() const { return height_; }
  int width() const { return width_; }
  double operator()(int i, int j) const { return k_[static_cast<size_t>(i) * n_ + j]; }
  const double* row(int i) const { return k_.data() + static_cast<size_t>(i) * n_; }
  // True when both kernel weights are zero.
  bool is_zero() const { return zero_; }

 private:
  int n_;
  int height_;
  int width_;
  bool zero_;
  std::vector<double> k_;
};

// Mean-field inference from unaries -log(clamped unary_probs), starting at
// Q = unary_probs. unary_probs is K x H x W or 1 x K x H x W and must hold a
// distribution at every pixel; the result has the same shape.
Tensor MeanField(const Tensor& unary_probs, const PixelFeatures& features,
                 const CrfConfig& config);
Tensor MeanField(const Tensor& unary_probs, const PairwiseKernel& kernel,
                 const CrfConfig& config);

// Exact mean-field free energy:
//   sum_i,k Q psi + sum_{i<j} kappa_ij sum_{k != k'} Q_i(k) Q_j(k')
//   + sum_i,k Q log Q.
double FreeEnergy(const Tensor& q, const Tensor& unary_probs,
                  const PixelFeatures& features, const CrfConfig& config);
double FreeEnergy(const Tensor& q, const Tensor& unary_probs,
                  const PairwiseKernel& kernel);

}  // namespace vidseg

#endif  // VIDSEG_DENSE_CRF_H_
