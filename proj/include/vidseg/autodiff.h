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

#ifndef VIDSEG_AUTODIFF_H_
#define VIDSEG_AUTODIFF_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vidseg/tensor.h"

namespace vidseg {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; a default-constructed
// Var is "null" and stands for an absent operand.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool is_null() const { return tape_ == nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  const Tensor& value() const;
  // Gradient accumulated by the last Backward(); zero if none reached it.
  std::vector<double> grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records differentiable operations in execution order and replays them in
// reverse to accumulate gradients. Single-threaded; not reusable across
// Backward() calls other than for reading gradients.
class Tape {
 public:
  // Called during Backward() with the op's output (value and grad filled in).
  using BackwardFn = std::function<void(Tape& tape, const Tensor& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Leaf(Tensor value, bool requires_grad = true);
  Var Constant(Tensor value) { return Leaf(std::move(value), false); }

  // Appends an op node. The output requires grad iff any input does; when it
  // does not, `backward` is dropped.
  Var Record(std::string op, Tensor value, std::span<const Var> inputs,
             BackwardFn backward);

  // Seeds d(out)/d(out) = 1 for a single-element output and propagates.
  void Backward(Var out);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  // Gradient buffer of `v`, allocated zeroed on first access.
  std::vector<double>& grad(Var v);
  bool has_grad(Var v) const;

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::string& op_name(int id) const { return nodes_.at(id).op; }
  // Node ids whose backward function ran, in visit order.
  const std::vector<int>& last_backward_order() const { return backward_order_; }

 private:
  struct Node {
    std::string op;
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::vector<int> backward_order_;
};

// Cross-correlation. input N x C x H x W, kernel K x C x kh x kw, bias K (or
// null). Output extent (H + 2*pad - kh) / stride + 1 must divide exactly.
Var Conv2d(Var input, Var kernel, Var bias, int stride = 1, int pad = 0);

Var Relu(Var x);

// 2x2 window, stride 2. Backward routes to the first maximum in row-major
// order within each window.
Var MaxPool2(Var x);

// Per-pixel softmax over the channel axis of an N x K x H x W tensor.
Var SoftmaxChannels(Var scores);

// Output pixel o samples source coordinate (o + 0.5) / factor - 0.5, clamped
// to the valid range, with linear interpolation along each axis.
Var BilinearUpsample(Var x, int factor);

// Channel concatenation, `a` first. A null `b` returns `a` unchanged.
Var ConcatChannels(Var a, Var b);

Var Add(Var a, Var b);
Var Mul(Var a, Var b);
Var Scale(Var a, double factor);
// Sum of all elements, shape {1}.
Var Sum(Var x);
// Mean over H x W of an N x C x H x W tensor, shape N x C x 1 x 1.
Var GlobalAveragePool(Var x);
// Numerically stable binary cross-entropy on a single logit, shape {1}.
Var SigmoidCrossEntropy(Var logit, double label);

// Plain (tape-free) forward versions, for inference paths that never need
// gradients.
Tensor Conv2dForward(const Tensor& input, const Tensor& kernel,
                     const Tensor* bias, int stride, int pad);
Tensor BilinearUpsampleForward(const Tensor& x, int factor);
Tensor SoftmaxChannelsForward(const Tensor& scores);

// Finite-difference verification of tape gradients. `fn` builds a scalar
// from the leaf variables. Returns the largest
// |analytic - numeric| / max(1, |analytic|, |numeric|) over all coordinates
// of all inputs, using central differences with step `eps`.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> inputs)>;
double GradCheck(const ScalarFn& fn, std::span<const Tensor> inputs,
                 double eps = 1e-5);
double GradCheck(const std::function<Var(Tape&, Var)>& fn, const Tensor& x,
                 double eps = 1e-5);

}  // namespace vidseg

#endif  // VIDSEG_AUTODIFF_H_
