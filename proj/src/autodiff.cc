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
#include "vidseg/autodiff.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include "vidseg/errors.h"

namespace vidseg {
namespace {

void Require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

void RequireRank4(const Tensor& t, const char* op) {
  Require(t.rank() == 4, std::string(op) + ": expected rank-4 tensor, got " +
                             ShapeToString(t.shape()));
}

// Output indices [lo, hi) whose source index o*stride + offset lies in
// [0, extent).
struct Range {
  int lo;
  int hi;
};

Range ValidOutputs(int out_extent, int extent, int stride, int offset) {
  // o*stride + offset >= 0  =>  o >= ceil(-offset / stride)
  int lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  // o*stride + offset <= extent - 1
  int top = extent - 1 - offset;
  int hi = top < 0 ? 0 : top / stride + 1;
  lo = std::max(lo, 0);
  hi = std::min(hi, out_extent);
  return {lo, std::max(lo, hi)};
}

struct ConvGeometry {
  int n, c, h, w, k, kh, kw, oh, ow;
};

ConvGeometry CheckConv(const Tensor& input, const Tensor& kernel,
                       const Tensor* bias, int stride, int pad) {
  RequireRank4(input, "conv2d input");
  RequireRank4(kernel, "conv2d kernel");
  Require(stride > 0, "conv2d: stride must be positive");
  Require(pad >= 0, "conv2d: pad must be non-negative");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 kernel.dim(0), kernel.dim(2), kernel.dim(3), 0, 0};
  Require(kernel.dim(1) == g.c,
          "conv2d: kernel channels " + std::to_string(kernel.dim(1)) +
              " != input channels " + std::to_string(g.c));
  if (bias != nullptr) {
    Require(bias->size() == g.k, "conv2d: bias size does not match kernel count");
  }
  const int ph = g.h + 2 * pad;
  const int pw = g.w + 2 * pad;
  Require(g.kh <= ph && g.kw <= pw, "conv2d: kernel larger than padded input");
  Require((ph - g.kh) % stride == 0 && (pw - g.kw) % stride == 0,
          "conv2d: output extent is not exact for stride " +
              std::to_string(stride));
  g.oh = (ph - g.kh) / stride + 1;
  g.ow = (pw - g.kw) / stride + 1;
  return g;
}

void ConvForwardInto(const ConvGeometry& g, const double* in, const double* ker,
                     const double* bias, int stride, int pad, double* out) {
  const std::int64_t out_plane = static_cast<std::int64_t>(g.oh) * g.ow;
  for (int n = 0; n < g.n; ++n) {
    for (int k = 0; k < g.k; ++k) {
      double* o = out + (static_cast<std::int64_t>(n) * g.k + k) * out_plane;
      std::fill(o, o + out_plane, bias ? bias[k] : 0.0);
      for (int c = 0; c < g.c; ++c) {
        const double* plane =
            in + (static_cast<std::int64_t>(n) * g.c + c) * g.h * g.w;
        const double* kc = ker + (static_cast<std::int64_t>(k) * g.c + c) * g.kh * g.kw;
        for (int dy = 0; dy < g.kh; ++dy) {
          const Range ry = ValidOutputs(g.oh, g.h, stride, dy - pad);
          for (int dx = 0; dx < g.kw; ++dx) {
            const double wv = kc[dy * g.kw + dx];
            const Range rx = ValidOutputs(g.ow, g.w, stride, dx - pad);
            for (int oy = ry.lo; oy < ry.hi; ++oy) {
              const double* src = plane + (oy * stride + dy - pad) * g.w + dx - pad;
              double* dst = o + oy * g.ow;
              for (int ox = rx.lo; ox < rx.hi; ++ox) {
                dst[ox] += wv * src[ox * stride];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Var / Tape

const Tensor& Var::value() const { return tape_->value(*this); }

std::vector<double> Var::grad() const {
  if (tape_->has_grad(*this)) return tape_->grad(*this);
  return std::vector<double>(value().size(), 0.0);
}

Tape::Node& Tape::node(Var v) {
  Require(v.tape() == this && v.id() >= 0 && v.id() < size(),
          "variable does not belong to this tape");
  return nodes_[v.id()];
}

const Tape::Node& Tape::node(Var v) const {
  Require(v.tape() == this && v.id() >= 0 && v.id() < size(),
          "variable does not belong to this tape");
  return nodes_[v.id()];
}

Var Tape::Leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{"leaf", std::move(value), requires_grad, nullptr});
  return Var(this, size() - 1);
}

Var Tape::Record(std::string op, Tensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (!in.is_null() && requires_grad(in)) needs = true;
  }
  if (!value.AllFinite()) {
    throw NumericError(op + ": non-finite forward value");
  }
  nodes_.push_back(Node{std::move(op), std::move(value), needs,
                        needs ? std::move(backward) : nullptr});
  return Var(this, size() - 1);
}

void Tape::Backward(Var out) {
  Node& root = node(out);
  Require(root.value.size() == 1, "Backward: output must be a scalar, got shape " +
                                      ShapeToString(root.value.shape()));
  backward_order_.clear();
  root.value.grad()[0] += 1.0;
  for (int id = out.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || !n.value.has_grad()) continue;
    backward_order_.push_back(id);
    n.backward(*this, n.value);
  }
}

const Tensor& Tape::value(Var v) const { return node(v).value; }
bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }
std::vector<double>& Tape::grad(Var v) { return node(v).value.grad(); }
bool Tape::has_grad(Var v) const { return node(v).value.has_grad(); }

// ---------------------------------------------------------------------------
// Ops

Tensor Conv2dForward(const Tensor& input, const Tensor& kernel,
                     const Tensor* bias, int stride, int pad) {
  const ConvGeometry g = CheckConv(input, kernel, bias, stride, pad);
  Tensor out({g.n, g.k, g.oh, g.ow});
  ConvForwardInto(g, input.data(), kernel.data(), bias ? bias->data() : nullptr,
                  stride, pad, out.data());
  return out;
}

Var Conv2d(Var input, Var kernel, Var bias, int stride, int pad) {
  Tape& tape = *input.tape();
  const Tensor* bias_value = bias.is_null() ? nullptr : &bias.value();
  const ConvGeometry g =
      CheckConv(input.value(), kernel.value(), bias_value, stride, pad);
  Tensor out = Conv2dForward(input.value(), kernel.value(), bias_value, stride, pad);
  const Var inputs[] = {input, kernel, bias};
  return tape.Record(
      "conv2d", std::move(out), inputs,
      [=](Tape& t, const Tensor& o) {
        const double* gout = o.grad().data();
        const double* in = t.value(input).data();
        const double* ker = t.value(kernel).data();
        const std::int64_t out_plane = static_cast<std::int64_t>(g.oh) * g.ow;
        const bool want_in = t.requires_grad(input);
        const bool want_k = t.requires_grad(kernel);
        double* gin = want_in ? t.grad(input).data() : nullptr;
        double* gk = want_k ? t.grad(kernel).data() : nullptr;
        if (!bias.is_null() && t.requires_grad(bias)) {
          double* gb = t.grad(bias).data();
          for (int n = 0; n < g.n; ++n) {
            for (int k = 0; k < g.k; ++k) {
              const double* go = gout + (static_cast<std::int64_t>(n) * g.k + k) * out_plane;
              double s = 0.0;
              for (std::int64_t i = 0; i < out_plane; ++i) s += go[i];
              gb[k] += s;
            }
          }
        }
        if (!want_in && !want_k) return;
        for (int n = 0; n < g.n; ++n) {
          for (int k = 0; k < g.k; ++k) {
            const double* go = gout + (static_cast<std::int64_t>(n) * g.k + k) * out_plane;
            for (int c = 0; c < g.c; ++c) {
              const std::int64_t plane_off =
                  (static_cast<std::int64_t>(n) * g.c + c) * g.h * g.w;
              const std::int64_t k_off =
                  (static_cast<std::int64_t>(k) * g.c + c) * g.kh * g.kw;
              for (int dy = 0; dy < g.kh; ++dy) {
                const Range ry = ValidOutputs(g.oh, g.h, stride, dy - pad);
                for (int dx = 0; dx < g.kw; ++dx) {
                  const Range rx = ValidOutputs(g.ow, g.w, stride, dx - pad);
                  const double wv = ker[k_off + dy * g.kw + dx];
                  double acc = 0.0;
                  for (int oy = ry.lo; oy < ry.hi; ++oy) {
                    const std::int64_t row =
                        plane_off + (oy * stride + dy - pad) * g.w + dx - pad;
                    const double* grow = go + oy * g.ow;
                    if (want_k) {
                      const double* src = in + row;
                      for (int ox = rx.lo; ox < rx.hi; ++ox) {
                        acc += grow[ox] * src[ox * stride];
                      }
                    }
                    if (want_in) {
                      double* dst = gin + row;
                      for (int ox = rx.lo; ox < rx.hi; ++ox) {
                        dst[ox * stride] += wv * grow[ox];
                      }
                    }
                  }
                  if (want_k) gk[k_off + dy * g.kw + dx] += acc;
                }
              }
            }
          }
        }
      });
}

Var Relu(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  const Var inputs[] = {x};
  return x.tape()->Record("relu", std::move(out), inputs,
                          [x](Tape& t, const Tensor& o) {
                            const Tensor& xv = t.value(x);
                            auto& gx = t.grad(x);
                            const auto& go = o.grad();
                            for (std::int64_t i = 0; i < xv.size(); ++i) {
                              if (xv[i] > 0.0) gx[i] += go[i];
                            }
                          });
}

Var MaxPool2(Var x) {
  const Tensor& xv = x.value();
  RequireRank4(xv, "maxpool2");
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Require(h % 2 == 0 && w % 2 == 0,
          "maxpool2: odd spatial extent " + ShapeToString(xv.shape()));
  const int oh = h / 2, ow = w / 2;
  Tensor out({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
  std::int64_t o = 0;
  for (int b = 0; b < n * c; ++b) {
    const std::int64_t base = static_cast<std::int64_t>(b) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx, ++o) {
        std::int64_t best = base + (2 * y) * w + 2 * xx;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::int64_t idx = base + (2 * y + dy) * w + 2 * xx + dx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        (*argmax)[o] = best;
        out[o] = xv[best];
      }
    }
  }
  const Var inputs[] = {x};
  return x.tape()->Record("maxpool2", std::move(out), inputs,
                          [x, argmax](Tape& t, const Tensor& o) {
                            auto& gx = t.grad(x);
                            const auto& go = o.grad();
                            for (size_t i = 0; i < argmax->size(); ++i) {
                              gx[(*argmax)[i]] += go[i];
                            }
                          });
}

Tensor SoftmaxChannelsForward(const Tensor& scores) {
  RequireRank4(scores, "softmax_channels");
  const int n = scores.dim(0), k = scores.dim(1);
  Require(k >= 2, "softmax_channels: need at least 2 channels");
  const std::int64_t plane = static_cast<std::int64_t>(scores.dim(2)) * scores.dim(3);
  Tensor out(scores.shape());
  for (int b = 0; b < n; ++b) {
    const std::int64_t base = static_cast<std::int64_t>(b) * k * plane;
    for (std::int64_t p = 0; p < plane; ++p) {
      double mx = scores[base + p];
      for (int c = 1; c < k; ++c) mx = std::max(mx, scores[base + c * plane + p]);
      double z = 0.0;
      for (int c = 0; c < k; ++c) {
        const double e = std::exp(scores[base + c * plane + p] - mx);
        out[base + c * plane + p] = e;
        z += e;
      }
      for (int c = 0; c < k; ++c) out[base + c * plane + p] /= z;
    }
  }
  return out;
}

Var SoftmaxChannels(Var scores) {
  Tensor out = SoftmaxChannelsForward(scores.value());
  const Var inputs[] = {scores};
  return scores.tape()->Record(
      "softmax_channels", std::move(out), inputs,
      [scores](Tape& t, const Tensor& o) {
        const int n = o.dim(0), k = o.dim(1);
        const std::int64_t plane = static_cast<std::int64_t>(o.dim(2)) * o.dim(3);
        auto& gs = t.grad(scores);
        const auto& go = o.grad();
        for (int b = 0; b < n; ++b) {
          const std::int64_t base = static_cast<std::int64_t>(b) * k * plane;
          for (std::int64_t p = 0; p < plane; ++p) {
            double dot = 0.0;
            for (int c = 0; c < k; ++c) {
              const std::int64_t i = base + c * plane + p;
              dot += go[i] * o[i];
            }
            for (int c = 0; c < k; ++c) {
              const std::int64_t i = base + c * plane + p;
              gs[i] += o[i] * (go[i] - dot);
            }
          }
        }
      });
}

namespace {

struct Tap {
  int i0;
  int i1;
  double t;  // weight of i1
};

std::vector<Tap> UpsampleTaps(int in_extent, int factor) {
  std::vector<Tap> taps(static_cast<size_t>(in_extent) * factor);
  for (size_t o = 0; o < taps.size(); ++o) {
    double src = (static_cast<double>(o) + 0.5) / factor - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_extent - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in_extent - 1);
    taps[o] = {i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

Tensor BilinearUpsampleForward(const Tensor& x, int factor) {
  RequireRank4(x, "bilinear_upsample");
  Require(factor > 0, "bilinear_upsample: factor must be positive");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h * factor, ow = w * factor;
  const auto ty = UpsampleTaps(h, factor);
  const auto tx = UpsampleTaps(w, factor);
  Tensor out({n, c, oh, ow});
  for (int b = 0; b < n * c; ++b) {
    const double* src = x.data() + static_cast<std::int64_t>(b) * h * w;
    double* dst = out.data() + static_cast<std::int64_t>(b) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const Tap& a = ty[y];
      for (int xx = 0; xx < ow; ++xx) {
        const Tap& bb = tx[xx];
        const double top = (1.0 - bb.t) * src[a.i0 * w + bb.i0] + bb.t * src[a.i0 * w + bb.i1];
        const double bot = (1.0 - bb.t) * src[a.i1 * w + bb.i0] + bb.t * src[a.i1 * w + bb.i1];
        dst[y * ow + xx] = (1.0 - a.t) * top + a.t * bot;
      }
    }
  }
  return out;
}

Var BilinearUpsample(Var x, int factor) {
  Tensor out = BilinearUpsampleForward(x.value(), factor);
  const Var inputs[] = {x};
  return x.tape()->Record(
      "bilinear_upsample", std::move(out), inputs,
      [x, factor](Tape& t, const Tensor& o) {
        const Tensor& xv = t.value(x);
        const int h = xv.dim(2), w = xv.dim(3);
        const int oh = o.dim(2), ow = o.dim(3);
        const auto ty = UpsampleTaps(h, factor);
        const auto tx = UpsampleTaps(w, factor);
        auto& gx = t.grad(x);
        const auto& go = o.grad();
        for (int b = 0; b < xv.dim(0) * xv.dim(1); ++b) {
          double* dst = gx.data() + static_cast<std::int64_t>(b) * h * w;
          const double* src = go.data() + static_cast<std::int64_t>(b) * oh * ow;
          for (int y = 0; y < oh; ++y) {
            const Tap& a = ty[y];
            for (int xx = 0; xx < ow; ++xx) {
              const Tap& bb = tx[xx];
              const double g = src[y * ow + xx];
              dst[a.i0 * w + bb.i0] += (1.0 - a.t) * (1.0 - bb.t) * g;
              dst[a.i0 * w + bb.i1] += (1.0 - a.t) * bb.t * g;
              dst[a.i1 * w + bb.i0] += a.t * (1.0 - bb.t) * g;
              dst[a.i1 * w + bb.i1] += a.t * bb.t * g;
            }
          }
        }
      });
}

Var ConcatChannels(Var a, Var b) {
  if (b.is_null()) return a;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireRank4(av, "concat_channels");
  RequireRank4(bv, "concat_channels");
  Require(av.dim(0) == bv.dim(0) && av.dim(2) == bv.dim(2) && av.dim(3) == bv.dim(3),
          "concat_channels: mismatched N/H/W " + ShapeToString(av.shape()) +
              " vs " + ShapeToString(bv.shape()));
  const int n = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(av.dim(2)) * av.dim(3);
  Tensor out({n, ca + cb, av.dim(2), av.dim(3)});
  for (int i = 0; i < n; ++i) {
    std::copy_n(av.data() + i * ca * plane, ca * plane, out.data() + i * (ca + cb) * plane);
    std::copy_n(bv.data() + i * cb * plane, cb * plane,
                out.data() + (i * (ca + cb) + ca) * plane);
  }
  const Var inputs[] = {a, b};
  return a.tape()->Record(
      "concat_channels", std::move(out), inputs,
      [a, b, n, ca, cb, plane](Tape& t, const Tensor& o) {
        const auto& go = o.grad();
        if (t.requires_grad(a)) {
          auto& ga = t.grad(a);
          for (int i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j < ca * plane; ++j) {
              ga[i * ca * plane + j] += go[i * (ca + cb) * plane + j];
            }
          }
        }
        if (t.requires_grad(b)) {
          auto& gb = t.grad(b);
          for (int i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j < cb * plane; ++j) {
              gb[i * cb * plane + j] += go[(i * (ca + cb) + ca) * plane + j];
            }
          }
        }
      });
}

Var Add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Require(av.shape() == bv.shape(), "add: shape mismatch " + ShapeToString(av.shape()) +
                                        " vs " + ShapeToString(bv.shape()));
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const Var inputs[] = {a, b};
  return a.tape()->Record("add", std::move(out), inputs,
                          [a, b](Tape& t, const Tensor& o) {
                            const auto& go = o.grad();
                            for (Var v : {a, b}) {
                              if (!t.requires_grad(v)) continue;
                              auto& g = t.grad(v);
                              for (size_t i = 0; i < go.size(); ++i) g[i] += go[i];
                            }
                          });
}

Var Mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Require(av.shape() == bv.shape(), "mul: shape mismatch");
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const Var inputs[] = {a, b};
  return a.tape()->Record("mul", std::move(out), inputs,
                          [a, b](Tape& t, const Tensor& o) {
                            const auto& go = o.grad();
                            const Tensor& av = t.value(a);
                            const Tensor& bv = t.value(b);
                            if (t.requires_grad(a)) {
                              auto& g = t.grad(a);
                              for (size_t i = 0; i < go.size(); ++i) g[i] += go[i] * bv[i];
                            }
                            if (t.requires_grad(b)) {
                              auto& g = t.grad(b);
                              for (size_t i = 0; i < go.size(); ++i) g[i] += go[i] * av[i];
                            }
                          });
}

Var Scale(Var a, double factor) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  const Var inputs[] = {a};
  return a.tape()->Record("scale", std::move(out), inputs,
                          [a, factor](Tape& t, const Tensor& o) {
                            const auto& go = o.grad();
                            auto& g = t.grad(a);
                            for (size_t i = 0; i < go.size(); ++i) g[i] += go[i] * factor;
                          });
}

Var Sum(Var x) {
  const Var inputs[] = {x};
  return x.tape()->Record("sum", Tensor::Scalar(x.value().Sum()), inputs,
                          [x](Tape& t, const Tensor& o) {
                            const double g0 = o.grad()[0];
                            for (double& g : t.grad(x)) g += g0;
                          });
}

Var GlobalAveragePool(Var x) {
  const Tensor& xv = x.value();
  RequireRank4(xv, "global_average_pool");
  const int n = xv.dim(0), c = xv.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(xv.dim(2)) * xv.dim(3);
  Tensor out({n, c, 1, 1});
  for (int b = 0; b < n * c; ++b) {
    double s = 0.0;
    for (std::int64_t p = 0; p < plane; ++p) s += xv[b * plane + p];
    out[b] = s / static_cast<double>(plane);
  }
  const Var inputs[] = {x};
  return x.tape()->Record("global_average_pool", std::move(out), inputs,
                          [x, plane](Tape& t, const Tensor& o) {
                            auto& gx = t.grad(x);
                            const auto& go = o.grad();
                            for (size_t b = 0; b < go.size(); ++b) {
                              const double g = go[b] / static_cast<double>(plane);
                              for (std::int64_t p = 0; p < plane; ++p) gx[b * plane + p] += g;
                            }
                          });
}

Var SigmoidCrossEntropy(Var logit, double label) {
  Require(logit.value().size() == 1, "sigmoid_cross_entropy: expects a single logit");
  const double z = logit.value()[0];
  // log(1 + exp(-|z|)) + max(z, 0) - z * label
  const double loss = std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * label;
  const Var inputs[] = {logit};
  return logit.tape()->Record("sigmoid_cross_entropy", Tensor::Scalar(loss), inputs,
                              [logit, label](Tape& t, const Tensor& o) {
                                const double z = t.value(logit)[0];
                                const double p = 1.0 / (1.0 + std::exp(-z));
                                t.grad(logit)[0] += o.grad()[0] * (p - label);
                              });
}

// ---------------------------------------------------------------------------
// Gradient check

double GradCheck(const ScalarFn& fn, std::span<const Tensor> inputs, double eps) {
  Require(eps >= 1e-7 && eps <= 1e-3, "grad_check: eps must lie in [1e-7, 1e-3]");
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& x : inputs) leaves.push_back(tape.Leaf(x));
    Var y = fn(tape, leaves);
    Require(y.value().size() == 1, "grad_check: function output is not scalar");
    tape.Backward(y);
    for (Var v : leaves) analytic.push_back(v.grad());
  }
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& x : xs) leaves.push_back(tape.Leaf(x));
    return fn(tape, leaves).value()[0];
  };
  std::vector<Tensor> work(inputs.begin(), inputs.end());
  double worst = 0.0;
  for (size_t t = 0; t < work.size(); ++t) {
    for (std::int64_t i = 0; i < work[t].size(); ++i) {
      const double orig = work[t][i];
      work[t][i] = orig + eps;
      const double up = evaluate(work);
      work[t][i] = orig - eps;
      const double down = evaluate(work);
      work[t][i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t][i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double GradCheck(const std::function<Var(Tape&, Var)>& fn, const Tensor& x,
                 double eps) {
  const Tensor inputs[] = {x};
  return GradCheck([&fn](Tape& t, std::span<const Var> v) { return fn(t, v[0]); },
                   inputs, eps);
}

}  // namespace vidseg
