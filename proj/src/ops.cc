// Copyright 2026 The rdcseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "rdcseg/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdcseg {
namespace {

// ceil(a / b) for b > 0 and any sign of a.
int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Output positions o in [lo, hi) for which o * stride + shift lands in
// [0, extent).
struct ValidRange {
  int lo;
  int hi;
};
ValidRange valid_range(int out_extent, int in_extent, int stride, int shift) {
  int lo = std::max(0, ceil_div(-shift, stride));
  int hi = std::min(out_extent, floor_div(in_extent - 1 - shift, stride) + 1);
  return {lo, std::max(lo, hi)};
}

void check_conv_args(const Tensor& input, const Tensor& weights,
                     const Tensor& bias, const Conv2dOptions& opt) {
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  RDC_CHECK(ws.c == is.c, "conv2d: weights in-channel extent "
                              << ws.c << " does not match input channel extent "
                              << is.c);
  RDC_CHECK(ws.h % 2 == 1, "conv2d: kernel height " << ws.h << " must be odd");
  RDC_CHECK(ws.w % 2 == 1, "conv2d: kernel width " << ws.w << " must be odd");
  RDC_CHECK(bias.numel() == ws.n, "conv2d: bias length "
                                      << bias.numel()
                                      << " does not match out-channel extent "
                                      << ws.n);
  RDC_CHECK(opt.stride > 0, "conv2d: stride must be positive");
  RDC_CHECK(opt.dilation > 0, "conv2d: dilation must be positive");
  RDC_CHECK(opt.pad_h >= 0 && opt.pad_w >= 0,
            "conv2d: padding must be nonnegative");
}

}  // namespace

int conv_output_extent(int input, int kernel, int stride, int dilation,
                       int pad) {
  return (input + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const Conv2dOptions& opt) {
  check_conv_args(input, weights, bias, opt);
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  const int in_h = static_cast<int>(is.h), in_w = static_cast<int>(is.w);
  const int kh = static_cast<int>(ws.h), kw = static_cast<int>(ws.w);
  const int out_h = conv_output_extent(in_h, kh, opt.stride, opt.dilation, opt.pad_h);
  const int out_w = conv_output_extent(in_w, kw, opt.stride, opt.dilation, opt.pad_w);
  RDC_CHECK(out_h > 0 && out_w > 0, "conv2d: input " << is.str()
                                        << " is too small for the kernel");
  Tensor out(Shape{is.n, ws.n, static_cast<std::size_t>(out_h),
                   static_cast<std::size_t>(out_w)});
  const int s = opt.stride;
  for (std::size_t n = 0; n < is.n; ++n) {
    for (std::size_t oc = 0; oc < ws.n; ++oc) {
      double* dst = out.ptr() + out.offset(n, oc, 0, 0);
      std::fill(dst, dst + out_h * out_w, bias[oc]);
      for (std::size_t ic = 0; ic < is.c; ++ic) {
        const double* src = input.ptr() + input.offset(n, ic, 0, 0);
        for (int ky = 0; ky < kh; ++ky) {
          const int sy = ky * opt.dilation - opt.pad_h;
          const ValidRange ry = valid_range(out_h, in_h, s, sy);
          for (int kx = 0; kx < kw; ++kx) {
            const double wv = weights.at(oc, ic, ky, kx);
            const int sx = kx * opt.dilation - opt.pad_w;
            const ValidRange rx = valid_range(out_w, in_w, s, sx);
            for (int oy = ry.lo; oy < ry.hi; ++oy) {
              const double* row = src + (oy * s + sy) * in_w + sx;
              double* orow = dst + oy * out_w;
              for (int ox = rx.lo; ox < rx.hi; ++ox) {
                orow[ox] += wv * row[ox * s];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& grad_output, Tensor& input,
                     Tensor& weights, Tensor& bias,
                     const Conv2dOptions& opt) {
  check_conv_args(input, weights, bias, opt);
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  const Shape& gs = grad_output.shape();
  const int in_h = static_cast<int>(is.h), in_w = static_cast<int>(is.w);
  const int kh = static_cast<int>(ws.h), kw = static_cast<int>(ws.w);
  const int out_h = static_cast<int>(gs.h), out_w = static_cast<int>(gs.w);
  RDC_CHECK(gs.n == is.n && gs.c == ws.n &&
                out_h == conv_output_extent(in_h, kh, opt.stride, opt.dilation, opt.pad_h) &&
                out_w == conv_output_extent(in_w, kw, opt.stride, opt.dilation, opt.pad_w),
            "conv2d_backward: grad_output shape " << gs.str()
                                                  << " does not match forward");
  const bool want_in = input.has_grad();
  const bool want_w = weights.has_grad();
  const bool want_b = bias.has_grad();
  const int s = opt.stride;
  for (std::size_t n = 0; n < is.n; ++n) {
    for (std::size_t oc = 0; oc < ws.n; ++oc) {
      const double* g = grad_output.ptr() + grad_output.offset(n, oc, 0, 0);
      if (want_b) {
        double acc = 0.0;
        for (int i = 0; i < out_h * out_w; ++i) acc += g[i];
        bias.grad()[oc] += acc;
      }
      if (!want_in && !want_w) continue;
      for (std::size_t ic = 0; ic < is.c; ++ic) {
        const std::size_t in_off = input.offset(n, ic, 0, 0);
        const double* src = input.ptr() + in_off;
        double* gsrc = want_in ? input.grad().data() + in_off : nullptr;
        for (int ky = 0; ky < kh; ++ky) {
          const int sy = ky * opt.dilation - opt.pad_h;
          const ValidRange ry = valid_range(out_h, in_h, s, sy);
          for (int kx = 0; kx < kw; ++kx) {
            const std::size_t widx = weights.offset(oc, ic, ky, kx);
            const double wv = weights[widx];
            const int sx = kx * opt.dilation - opt.pad_w;
            const ValidRange rx = valid_range(out_w, in_w, s, sx);
            double wacc = 0.0;
            for (int oy = ry.lo; oy < ry.hi; ++oy) {
              const int base = (oy * s + sy) * in_w + sx;
              const double* grow = g + oy * out_w;
              if (want_w) {
                const double* row = src + base;
                for (int ox = rx.lo; ox < rx.hi; ++ox) wacc += grow[ox] * row[ox * s];
              }
              if (want_in) {
                double* grow_in = gsrc + base;
                for (int ox = rx.lo; ox < rx.hi; ++ox) grow_in[ox * s] += wv * grow[ox];
              }
            }
            if (want_w) weights.grad()[widx] += wacc;
          }
        }
      }
    }
  }
}

namespace {

void check_norm_args(const Tensor& input, const NormStatistics& stats,
                     const Tensor& scale, const Tensor& shift) {
  const std::size_t c = input.shape().c;
  RDC_CHECK(stats.channels() == c && stats.var.size() == c,
            "batch_normalize: statistics hold " << stats.channels()
                                                << " channels, input has " << c);
  RDC_CHECK(scale.numel() == c && shift.numel() == c,
            "batch_normalize: scale/shift length must equal channel count " << c);
}

struct Moments {
  double mean;
  double var;  // biased
};

Moments channel_moments(const Tensor& input, std::size_t c) {
  const Shape& s = input.shape();
  const std::size_t plane = s.plane();
  double sum = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* p = input.ptr() + input.offset(n, c, 0, 0);
    for (std::size_t i = 0; i < plane; ++i) sum += p[i];
  }
  const double count = static_cast<double>(s.n * plane);
  const double mean = sum / count;
  double sq = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* p = input.ptr() + input.offset(n, c, 0, 0);
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = p[i] - mean;
      sq += d * d;
    }
  }
  return {mean, sq / count};
}

}  // namespace

Tensor batch_normalize(const Tensor& input, NormStatistics& stats,
                       const Tensor& scale, const Tensor& shift, NormMode mode,
                       double momentum) {
  check_norm_args(input, stats, scale, shift);
  RDC_CHECK(momentum > 0.0 && momentum < 1.0,
            "batch_normalize: momentum must lie in (0, 1), got " << momentum);
  const Shape& s = input.shape();
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n * plane);
  RDC_CHECK(count > 0, "batch_normalize: empty input");
  Tensor out(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == NormMode::kTrain) {
      const Moments m = channel_moments(input, c);
      mean = m.mean;
      var = m.var;
      const double unbiased = count > 1 ? m.var * count / (count - 1) : m.var;
      stats.mean[c] = (1.0 - momentum) * stats.mean[c] + momentum * m.mean;
      stats.var[c] = (1.0 - momentum) * stats.var[c] + momentum * unbiased;
    } else {
      RDC_CHECK(stats.var[c] > 0.0 && std::isfinite(stats.var[c]),
                "batch_normalize: running variance of channel "
                    << c << " is " << stats.var[c]
                    << "; statistics are corrupted");
      mean = stats.mean[c];
      var = stats.var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEpsilon);
    const double a = scale[c] * inv_std;
    const double b = shift[c] - a * mean;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t off = input.offset(n, c, 0, 0);
      const double* p = input.ptr() + off;
      double* q = out.ptr() + off;
      for (std::size_t i = 0; i < plane; ++i) q[i] = a * p[i] + b;
    }
  }
  return out;
}

void batch_normalize_backward(const Tensor& grad_output, Tensor& input,
                              const NormStatistics& stats, Tensor& scale,
                              Tensor& shift, NormMode mode) {
  check_norm_args(input, stats, scale, shift);
  const Shape& s = input.shape();
  RDC_CHECK(grad_output.shape() == s,
            "batch_normalize_backward: grad_output shape mismatch");
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n * plane);
  for (std::size_t c = 0; c < s.c; ++c) {
    double mean, var;
    if (mode == NormMode::kTrain) {
      const Moments m = channel_moments(input, c);
      mean = m.mean;
      var = m.var;
    } else {
      mean = stats.mean[c];
      var = stats.var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEpsilon);
    double sum_g = 0.0;
    double sum_g_xhat = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t off = input.offset(n, c, 0, 0);
      const double* p = input.ptr() + off;
      const double* g = grad_output.ptr() + off;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += g[i];
        sum_g_xhat += g[i] * (p[i] - mean) * inv_std;
      }
    }
    if (scale.has_grad()) scale.grad()[c] += sum_g_xhat;
    if (shift.has_grad()) shift.grad()[c] += sum_g;
    if (!input.has_grad()) continue;
    const double k = scale[c] * inv_std;
    for (std::size_t n = 0; n < s.n; ++n) {
      const std::size_t off = input.offset(n, c, 0, 0);
      const double* p = input.ptr() + off;
      const double* g = grad_output.ptr() + off;
      double* gi = input.grad().data() + off;
      if (mode == NormMode::kTrain) {
        for (std::size_t i = 0; i < plane; ++i) {
          const double xhat = (p[i] - mean) * inv_std;
          gi[i] += k * (g[i] - sum_g / count - xhat * sum_g_xhat / count);
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) gi[i] += k * g[i];
      }
    }
  }
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.numel(); ++i) {
    out[i] = input[i] > 0.0 ? input[i] : 0.0;
  }
  return out;
}

void relu_backward(const Tensor& grad_output, Tensor& input) {
  RDC_CHECK(grad_output.shape() == input.shape(),
            "relu_backward: grad_output shape mismatch");
  if (!input.has_grad()) return;
  auto g = input.grad();
  for (std::size_t i = 0; i < input.numel(); ++i) {
    if (input[i] > 0.0) g[i] += grad_output[i];
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  RDC_CHECK(a.shape() == b.shape(), "add: shapes " << a.shape().str() << " and "
                                                   << b.shape().str() << " differ");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

namespace {

struct Tap1d {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

Tap1d upsample_tap(std::size_t o, int factor, std::size_t extent) {
  double src = (static_cast<double>(o) + 0.5) / factor - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(extent - 1));
  const auto lo = static_cast<std::size_t>(std::floor(src));
  const std::size_t hi = std::min(lo + 1, extent - 1);
  return {lo, hi, src - static_cast<double>(lo)};
}

}  // namespace

Tensor upsample_bilinear(const Tensor& input, int factor) {
  RDC_CHECK(factor >= 1, "upsample_bilinear: factor must be >= 1");
  if (factor == 1) return input;
  const Shape& s = input.shape();
  Tensor out(Shape{s.n, s.c, s.h * factor, s.w * factor});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t oy = 0; oy < out.shape().h; ++oy) {
        const Tap1d ty = upsample_tap(oy, factor, s.h);
        for (std::size_t ox = 0; ox < out.shape().w; ++ox) {
          const Tap1d tx = upsample_tap(ox, factor, s.w);
          const double top = (1 - tx.frac) * input.at(n, c, ty.lo, tx.lo) +
                             tx.frac * input.at(n, c, ty.lo, tx.hi);
          const double bot = (1 - tx.frac) * input.at(n, c, ty.hi, tx.lo) +
                             tx.frac * input.at(n, c, ty.hi, tx.hi);
          out.at(n, c, oy, ox) = (1 - ty.frac) * top + ty.frac * bot;
        }
      }
    }
  }
  return out;
}

void upsample_bilinear_backward(const Tensor& grad_output, Tensor& input,
                                int factor) {
  const Shape& s = input.shape();
  RDC_CHECK(grad_output.shape() == (Shape{s.n, s.c, s.h * factor, s.w * factor}),
            "upsample_bilinear_backward: grad_output shape mismatch");
  if (!input.has_grad()) return;
  auto g = input.grad();
  if (factor == 1) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += grad_output[i];
    return;
  }
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t oy = 0; oy < grad_output.shape().h; ++oy) {
        const Tap1d ty = upsample_tap(oy, factor, s.h);
        for (std::size_t ox = 0; ox < grad_output.shape().w; ++ox) {
          const Tap1d tx = upsample_tap(ox, factor, s.w);
          const double go = grad_output.at(n, c, oy, ox);
          g[input.offset(n, c, ty.lo, tx.lo)] += (1 - ty.frac) * (1 - tx.frac) * go;
          g[input.offset(n, c, ty.lo, tx.hi)] += (1 - ty.frac) * tx.frac * go;
          g[input.offset(n, c, ty.hi, tx.lo)] += ty.frac * (1 - tx.frac) * go;
          g[input.offset(n, c, ty.hi, tx.hi)] += ty.frac * tx.frac * go;
        }
      }
    }
  }
}

namespace {

void check_ce_args(const Tensor& logits, const LabelMap& labels,
                   int ignore_class) {
  const Shape& s = logits.shape();
  RDC_CHECK(labels.n == s.n && labels.h == s.h && labels.w == s.w,
            "softmax_cross_entropy: label extents (" << labels.n << ", " << labels.h
                << ", " << labels.w << ") do not match logits " << s.str());
  for (int l : labels.labels) {
    RDC_CHECK(l == ignore_class || (l >= 0 && static_cast<std::size_t>(l) < s.c),
              "softmax_cross_entropy: label " << l << " outside [0, " << s.c
                                              << ") and not the ignore class");
  }
}

// Fills probs with softmax over channels at (n, y, x) and returns log-sum-exp.
double pixel_softmax(const Tensor& logits, std::size_t n, std::size_t y,
                     std::size_t x, std::vector<double>& probs) {
  const std::size_t classes = logits.shape().c;
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, logits.at(n, c, y, x));
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    probs[c] = std::exp(logits.at(n, c, y, x) - mx);
    sum += probs[c];
  }
  for (std::size_t c = 0; c < classes; ++c) probs[c] /= sum;
  return mx + std::log(sum);
}

}  // namespace

double softmax_cross_entropy(const Tensor& logits, const LabelMap& labels,
                             int ignore_class, double loss_scale) {
  check_ce_args(logits, labels, ignore_class);
  const Shape& s = logits.shape();
  std::vector<double> probs(s.c);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        const int l = labels.at(n, y, x);
        if (l == ignore_class) continue;
        const double lse = pixel_softmax(logits, n, y, x, probs);
        total += lse - logits.at(n, static_cast<std::size_t>(l), y, x);
        ++count;
      }
    }
  }
  if (count == 0) return 0.0;
  return loss_scale * total / static_cast<double>(count);
}

void softmax_cross_entropy_backward(Tensor& logits, const LabelMap& labels,
                                    int ignore_class, double loss_scale,
                                    double upstream) {
  check_ce_args(logits, labels, ignore_class);
  if (!logits.has_grad()) return;
  const Shape& s = logits.shape();
  std::size_t count = 0;
  for (int l : labels.labels) count += (l != ignore_class);
  if (count == 0) return;
  const double k = upstream * loss_scale / static_cast<double>(count);
  std::vector<double> probs(s.c);
  auto g = logits.grad();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        const int l = labels.at(n, y, x);
        if (l == ignore_class) continue;
        pixel_softmax(logits, n, y, x, probs);
        for (std::size_t c = 0; c < s.c; ++c) {
          const double onehot = static_cast<int>(c) == l ? 1.0 : 0.0;
          g[logits.offset(n, c, y, x)] += k * (probs[c] - onehot);
        }
      }
    }
  }
}

LabelMap argmax_channels(const Tensor& logits) {
  const Shape& s = logits.shape();
  LabelMap out(s.n, s.h, s.w);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < s.c; ++c) {
          if (logits.at(n, c, y, x) > logits.at(n, best, y, x)) best = c;
        }
        out.at(n, y, x) = static_cast<int>(best);
      }
    }
  }
  return out;
}

}  // namespace rdcseg
