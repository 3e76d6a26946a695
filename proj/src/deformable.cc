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

#include "rdcseg/deformable.h"

#include <cmath>

namespace rdcseg {

std::string_view variant_name(DeformVariant v) {
  switch (v) {
    case DeformVariant::kDeformable:
      return "DC";
    case DeformVariant::kRestricted:
      return "RDC";
    case DeformVariant::kFactorized:
      return "FRDC";
  }
  return "?";
}

KernelGeometry KernelGeometry::regular(int kernel_h, int kernel_w, int dilation) {
  RDC_CHECK(kernel_h > 0 && kernel_h % 2 == 1,
            "kernel height " << kernel_h << " must be positive and odd");
  RDC_CHECK(kernel_w > 0 && kernel_w % 2 == 1,
            "kernel width " << kernel_w << " must be positive and odd");
  RDC_CHECK(dilation > 0, "dilation must be positive, got " << dilation);
  KernelGeometry g;
  g.kernel_h_ = kernel_h;
  g.kernel_w_ = kernel_w;
  g.dilation_ = dilation;
  g.pad_h_ = dilation * (kernel_h - 1) / 2;
  g.pad_w_ = dilation * (kernel_w - 1) / 2;
  const int ch = (kernel_h - 1) / 2;
  const int cw = (kernel_w - 1) / 2;
  for (int ky = 0; ky < kernel_h; ++ky) {
    for (int kx = 0; kx < kernel_w; ++kx) {
      if (ky == ch && kx == cw) g.center_ = g.taps_.size();
      g.taps_.push_back({(ky - ch) * dilation, (kx - cw) * dilation});
    }
  }
  return g;
}

KernelGeometry KernelGeometry::along_axis(int length, Axis axis, int dilation) {
  return axis == Axis::kVertical ? regular(length, 1, dilation)
                                 : regular(1, length, dilation);
}

KernelGeometry KernelGeometry::with_padding(int pad_h, int pad_w) const {
  RDC_CHECK(pad_h >= 0 && pad_w >= 0, "padding must be nonnegative");
  KernelGeometry g = *this;
  g.pad_h_ = pad_h;
  g.pad_w_ = pad_w;
  return g;
}

std::size_t offset_channels(DeformVariant variant, const KernelGeometry& geometry) {
  const std::size_t n = geometry.num_taps();
  switch (variant) {
    case DeformVariant::kDeformable:
      return 2 * n;
    case DeformVariant::kRestricted:
      return 2 * (n - 1);
    case DeformVariant::kFactorized:
      RDC_CHECK(geometry.is_1d(), "FRDC requires a 1D (k x 1 or 1 x k) kernel, got "
                                      << geometry.kernel_h() << "x"
                                      << geometry.kernel_w());
      return n - 1;
  }
  return 0;
}

BilinearStencil bilinear_stencil(SamplePosition pos) {
  const double yf = std::floor(pos.v);
  const double xf = std::floor(pos.u);
  return {static_cast<long long>(yf), static_cast<long long>(xf), pos.v - yf,
          pos.u - xf};
}

double bilinear_sample(const PlaneView& plane, SamplePosition pos) {
  const BilinearStencil s = bilinear_stencil(pos);
  const double v00 = plane.at_or_zero(s.y0, s.x0);
  const double v01 = plane.at_or_zero(s.y0, s.x0 + 1);
  const double v10 = plane.at_or_zero(s.y0 + 1, s.x0);
  const double v11 = plane.at_or_zero(s.y0 + 1, s.x0 + 1);
  return (1 - s.fy) * ((1 - s.fx) * v00 + s.fx * v01) +
         s.fy * ((1 - s.fx) * v10 + s.fx * v11);
}

PositionGradient bilinear_position_gradient(const PlaneView& plane,
                                            SamplePosition pos) {
  const BilinearStencil s = bilinear_stencil(pos);
  const double v00 = plane.at_or_zero(s.y0, s.x0);
  const double v01 = plane.at_or_zero(s.y0, s.x0 + 1);
  const double v10 = plane.at_or_zero(s.y0 + 1, s.x0);
  const double v11 = plane.at_or_zero(s.y0 + 1, s.x0 + 1);
  return {(1 - s.fy) * (v01 - v00) + s.fy * (v11 - v10),
          (1 - s.fx) * (v10 - v00) + s.fx * (v11 - v01)};
}

void bilinear_scatter(std::span<double> grad_plane, std::size_t height,
                      std::size_t width, SamplePosition pos, double upstream) {
  const BilinearStencil s = bilinear_stencil(pos);
  auto put = [&](long long y, long long x, double w) {
    if (y < 0 || x < 0 || y >= static_cast<long long>(height) ||
        x >= static_cast<long long>(width)) {
      return;
    }
    grad_plane[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] +=
        w * upstream;
  };
  put(s.y0, s.x0, (1 - s.fy) * (1 - s.fx));
  put(s.y0, s.x0 + 1, (1 - s.fy) * s.fx);
  put(s.y0 + 1, s.x0, s.fy * (1 - s.fx));
  put(s.y0 + 1, s.x0 + 1, s.fy * s.fx);
}

namespace {

// How one kernel tap finds its sample: a fixed lattice read or a learned
// displacement read from offset channels (-1 = no displacement on that axis).
struct TapPlan {
  int dy;
  int dx;
  bool fixed;
  int v_channel;
  int u_channel;
};

std::vector<TapPlan> make_plan(DeformVariant variant, const KernelGeometry& g) {
  std::vector<TapPlan> plan;
  const bool vertical = g.kernel_w() == 1 && g.kernel_h() > 1;
  int outer = 0;
  for (std::size_t n = 0; n < g.num_taps(); ++n) {
    const TapLocation t = g.taps()[n];
    if (variant == DeformVariant::kDeformable) {
      plan.push_back({t.dy, t.dx, false, static_cast<int>(2 * n),
                      static_cast<int>(2 * n + 1)});
      continue;
    }
    if (n == g.center_index()) {
      plan.push_back({t.dy, t.dx, true, -1, -1});
      continue;
    }
    if (variant == DeformVariant::kRestricted) {
      plan.push_back({t.dy, t.dx, false, 2 * outer, 2 * outer + 1});
    } else if (vertical) {
      plan.push_back({t.dy, t.dx, false, outer, -1});
    } else {
      plan.push_back({t.dy, t.dx, false, -1, outer});
    }
    ++outer;
  }
  return plan;
}

struct Extents {
  std::size_t out_h;
  std::size_t out_w;
};

Extents validate(DeformVariant variant, const Tensor& input, const Tensor& weights,
                 const Tensor& bias, const Tensor& offsets,
                 const KernelGeometry& g) {
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  const std::string_view name = variant_name(variant);
  RDC_CHECK(ws.c == is.c, name << ": weights in-channel extent " << ws.c
                               << " does not match input channel extent " << is.c);
  RDC_CHECK(static_cast<int>(ws.h) == g.kernel_h() &&
                static_cast<int>(ws.w) == g.kernel_w(),
            name << ": weights kernel " << ws.h << "x" << ws.w
                 << " does not match geometry " << g.kernel_h() << "x"
                 << g.kernel_w());
  RDC_CHECK(bias.numel() == ws.n, name << ": bias length " << bias.numel()
                                       << " does not match out channels " << ws.n);
  const long long oh = static_cast<long long>(is.h) + 2 * g.pad_h() -
                       static_cast<long long>(g.dilation()) * (g.kernel_h() - 1);
  const long long ow = static_cast<long long>(is.w) + 2 * g.pad_w() -
                       static_cast<long long>(g.dilation()) * (g.kernel_w() - 1);
  RDC_CHECK(oh > 0 && ow > 0, name << ": input " << is.str()
                                   << " is too small for the kernel");

  const std::size_t n_taps = g.num_taps();
  const std::size_t expected = offset_channels(variant, g);
  const std::size_t got = offsets.shape().c;
  if (got != expected) {
    if (variant == DeformVariant::kRestricted && got == 2 * n_taps) {
      RDC_CHECK(false, "RDC: variant mismatch, offsets carry " << got
                           << " channels (the DC layout 2N); RDC expects 2(N-1) = "
                           << expected);
    }
    if (variant == DeformVariant::kFactorized && got == 2 * (n_taps - 1)) {
      RDC_CHECK(false, "FRDC: 2D offset layout supplied (" << got
                           << " channels); FRDC expects one displacement per outer tap, "
                           << expected << " channels");
    }
    RDC_CHECK(false, name << ": offset channel extent " << got << ", expected "
                          << expected
                          << (variant == DeformVariant::kDeformable ? " (2N)"
                              : variant == DeformVariant::kRestricted ? " (2(N-1))"
                                                                      : " (k-1)"));
  }
  RDC_CHECK(offsets.shape().n == is.n && offsets.shape().h == static_cast<std::size_t>(oh) &&
                offsets.shape().w == static_cast<std::size_t>(ow),
            name << ": offsets shape " << offsets.shape().str()
                 << " must be (" << is.n << ", " << expected << ", " << oh << ", "
                 << ow << ")");
  return {static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)};
}

// Sampling positions for every (tap, output pixel) of one batch item.
struct TapSample {
  SamplePosition pos;
  long long y;  // lattice coordinates for fixed taps
  long long x;
  bool fixed;
};

std::vector<TapSample> sample_positions(const std::vector<TapPlan>& plan,
                                        const Tensor& offsets, std::size_t n,
                                        const KernelGeometry& g, Extents e) {
  const std::size_t pixels = e.out_h * e.out_w;
  std::vector<TapSample> out(plan.size() * pixels);
  const long long cy = static_cast<long long>(g.dilation()) * (g.kernel_h() - 1) / 2 - g.pad_h();
  const long long cx = static_cast<long long>(g.dilation()) * (g.kernel_w() - 1) / 2 - g.pad_w();
  for (std::size_t t = 0; t < plan.size(); ++t) {
    const TapPlan& tp = plan[t];
    const double* dv = tp.v_channel >= 0
                           ? offsets.ptr() + offsets.offset(n, tp.v_channel, 0, 0)
                           : nullptr;
    const double* du = tp.u_channel >= 0
                           ? offsets.ptr() + offsets.offset(n, tp.u_channel, 0, 0)
                           : nullptr;
    for (std::size_t oy = 0; oy < e.out_h; ++oy) {
      for (std::size_t ox = 0; ox < e.out_w; ++ox) {
        const std::size_t p = oy * e.out_w + ox;
        TapSample& s = out[t * pixels + p];
        s.y = static_cast<long long>(oy) + cy + tp.dy;
        s.x = static_cast<long long>(ox) + cx + tp.dx;
        s.fixed = tp.fixed;
        s.pos = {static_cast<double>(s.x) + (du ? du[p] : 0.0),
                 static_cast<double>(s.y) + (dv ? dv[p] : 0.0)};
      }
    }
  }
  return out;
}

// cols[(c * taps + t) * pixels + p]
void fill_columns(const Tensor& input, std::size_t n,
                  const std::vector<TapSample>& samples, std::size_t taps,
                  std::size_t pixels, std::vector<double>& cols) {
  const Shape& is = input.shape();
  cols.assign(is.c * taps * pixels, 0.0);
  for (std::size_t c = 0; c < is.c; ++c) {
    const PlaneView plane{input.ptr() + input.offset(n, c, 0, 0), is.h, is.w};
    for (std::size_t t = 0; t < taps; ++t) {
      double* col = cols.data() + (c * taps + t) * pixels;
      const TapSample* s = samples.data() + t * pixels;
      for (std::size_t p = 0; p < pixels; ++p) {
        col[p] = s[p].fixed ? plane.at_or_zero(s[p].y, s[p].x)
                            : bilinear_sample(plane, s[p].pos);
      }
    }
  }
}

Tensor forward_impl(DeformVariant variant, const Tensor& input,
                    const Tensor& weights, const Tensor& bias,
                    const Tensor& offsets, const KernelGeometry& g) {
  const Extents e = validate(variant, input, weights, bias, offsets, g);
  const std::vector<TapPlan> plan = make_plan(variant, g);
  const Shape& is = input.shape();
  const std::size_t out_c = weights.shape().n;
  const std::size_t taps = plan.size();
  const std::size_t pixels = e.out_h * e.out_w;
  const std::size_t inner = is.c * taps;
  Tensor out(Shape{is.n, out_c, e.out_h, e.out_w});
  std::vector<double> cols;
  for (std::size_t n = 0; n < is.n; ++n) {
    const auto samples = sample_positions(plan, offsets, n, g, e);
    fill_columns(input, n, samples, taps, pixels, cols);
    for (std::size_t oc = 0; oc < out_c; ++oc) {
      double* dst = out.ptr() + out.offset(n, oc, 0, 0);
      std::fill(dst, dst + pixels, bias[oc]);
      const double* wrow = weights.ptr() + oc * inner;
      for (std::size_t j = 0; j < inner; ++j) {
        const double wv = wrow[j];
        const double* col = cols.data() + j * pixels;
        for (std::size_t p = 0; p < pixels; ++p) dst[p] += wv * col[p];
      }
    }
  }
  return out;
}

void backward_impl(DeformVariant variant, const Tensor& grad_output,
                   Tensor& input, Tensor& weights, Tensor& bias,
                   Tensor& offsets, const KernelGeometry& g) {
  const Extents e = validate(variant, input, weights, bias, offsets, g);
  const Shape& is = input.shape();
  const std::size_t out_c = weights.shape().n;
  RDC_CHECK(grad_output.shape() == (Shape{is.n, out_c, e.out_h, e.out_w}),
            variant_name(variant) << "_backward: grad_output shape "
                                  << grad_output.shape().str() << " does not match forward");
  const std::vector<TapPlan> plan = make_plan(variant, g);
  const std::size_t taps = plan.size();
  const std::size_t pixels = e.out_h * e.out_w;
  const std::size_t inner = is.c * taps;
  const bool want_in = input.has_grad();
  const bool want_w = weights.has_grad();
  const bool want_off = offsets.has_grad();

  std::vector<double> cols;
  std::vector<double> grad_cols;
  for (std::size_t n = 0; n < is.n; ++n) {
    const double* gy = grad_output.ptr() + grad_output.offset(n, 0, 0, 0);
    if (bias.has_grad()) {
      for (std::size_t oc = 0; oc < out_c; ++oc) {
        double acc = 0.0;
        for (std::size_t p = 0; p < pixels; ++p) acc += gy[oc * pixels + p];
        bias.grad()[oc] += acc;
      }
    }
    const auto samples = sample_positions(plan, offsets, n, g, e);
    if (want_w) {
      fill_columns(input, n, samples, taps, pixels, cols);
      for (std::size_t oc = 0; oc < out_c; ++oc) {
        const double* grow = gy + oc * pixels;
        double* gw = weights.grad().data() + oc * inner;
        for (std::size_t j = 0; j < inner; ++j) {
          const double* col = cols.data() + j * pixels;
          double acc = 0.0;
          for (std::size_t p = 0; p < pixels; ++p) acc += grow[p] * col[p];
          gw[j] += acc;
        }
      }
    }
    if (!want_in && !want_off) continue;

    grad_cols.assign(inner * pixels, 0.0);
    for (std::size_t oc = 0; oc < out_c; ++oc) {
      const double* grow = gy + oc * pixels;
      const double* wrow = weights.ptr() + oc * inner;
      for (std::size_t j = 0; j < inner; ++j) {
        const double wv = wrow[j];
        double* gc = grad_cols.data() + j * pixels;
        for (std::size_t p = 0; p < pixels; ++p) gc[p] += wv * grow[p];
      }
    }

    for (std::size_t c = 0; c < is.c; ++c) {
      const std::size_t plane_off = input.offset(n, c, 0, 0);
      const PlaneView plane{input.ptr() + plane_off, is.h, is.w};
      std::span<double> gplane =
          want_in ? input.grad().subspan(plane_off, is.h * is.w) : std::span<double>{};
      for (std::size_t t = 0; t < taps; ++t) {
        const TapPlan& tp = plan[t];
        const double* gc = grad_cols.data() + (c * taps + t) * pixels;
        const TapSample* s = samples.data() + t * pixels;
        double* gdv = (want_off && tp.v_channel >= 0)
                          ? offsets.grad().data() + offsets.offset(n, tp.v_channel, 0, 0)
                          : nullptr;
        double* gdu = (want_off && tp.u_channel >= 0)
                          ? offsets.grad().data() + offsets.offset(n, tp.u_channel, 0, 0)
                          : nullptr;
        for (std::size_t p = 0; p < pixels; ++p) {
          const double up = gc[p];
          if (s[p].fixed) {
            if (want_in && s[p].y >= 0 && s[p].x >= 0 &&
                s[p].y < static_cast<long long>(is.h) &&
                s[p].x < static_cast<long long>(is.w)) {
              gplane[static_cast<std::size_t>(s[p].y) * is.w +
                     static_cast<std::size_t>(s[p].x)] += up;
            }
            continue;
          }
          if (want_in) bilinear_scatter(gplane, is.h, is.w, s[p].pos, up);
          if (gdv || gdu) {
            const PositionGradient pg = bilinear_position_gradient(plane, s[p].pos);
            if (gdv) gdv[p] += up * pg.d_v;
            if (gdu) gdu[p] += up * pg.d_u;
          }
        }
      }
    }
  }
}

KernelGeometry factorized_geometry(const Tensor& weights, Axis axis, int dilation) {
  const Shape& ws = weights.shape();
  if (axis == Axis::kVertical) {
    RDC_CHECK(ws.w == 1, "FRDC: vertical kernel must be k x 1, got " << ws.h << "x" << ws.w);
    return KernelGeometry::along_axis(static_cast<int>(ws.h), axis, dilation);
  }
  RDC_CHECK(ws.h == 1, "FRDC: horizontal kernel must be 1 x k, got " << ws.h << "x" << ws.w);
  return KernelGeometry::along_axis(static_cast<int>(ws.w), axis, dilation);
}

}  // namespace

Tensor deformable_conv2d(const Tensor& input, const Tensor& weights,
                         const Tensor& bias, const Tensor& offsets,
                         const KernelGeometry& geometry) {
  return forward_impl(DeformVariant::kDeformable, input, weights, bias, offsets,
                      geometry);
}

void deformable_conv2d_backward(const Tensor& grad_output, Tensor& input,
                                Tensor& weights, Tensor& bias, Tensor& offsets,
                                const KernelGeometry& geometry) {
  backward_impl(DeformVariant::kDeformable, grad_output, input, weights, bias,
                offsets, geometry);
}

Tensor restricted_deformable_conv2d(const Tensor& input, const Tensor& weights,
                                    const Tensor& bias, const Tensor& offsets,
                                    const KernelGeometry& geometry) {
  return forward_impl(DeformVariant::kRestricted, input, weights, bias, offsets,
                      geometry);
}

void restricted_deformable_conv2d_backward(const Tensor& grad_output,
                                           Tensor& input, Tensor& weights,
                                           Tensor& bias, Tensor& offsets,
                                           const KernelGeometry& geometry) {
  backward_impl(DeformVariant::kRestricted, grad_output, input, weights, bias,
                offsets, geometry);
}

Tensor factorized_rdc_1d(const Tensor& input, const Tensor& weights,
                         const Tensor& bias, const Tensor& axis_offsets,
                         Axis axis, int dilation) {
  return forward_impl(DeformVariant::kFactorized, input, weights, bias,
                      axis_offsets, factorized_geometry(weights, axis, dilation));
}

void factorized_rdc_1d_backward(const Tensor& grad_output, Tensor& input,
                                Tensor& weights, Tensor& bias,
                                Tensor& axis_offsets, Axis axis, int dilation) {
  backward_impl(DeformVariant::kFactorized, grad_output, input, weights, bias,
                axis_offsets, factorized_geometry(weights, axis, dilation));
}

Tensor deform_conv_forward(DeformVariant variant, const Tensor& input,
                           const Tensor& weights, const Tensor& bias,
                           const Tensor& offsets, const KernelGeometry& geometry) {
  return forward_impl(variant, input, weights, bias, offsets, geometry);
}

void deform_conv_backward(DeformVariant variant, const Tensor& grad_output,
                          Tensor& input, Tensor& weights, Tensor& bias,
                          Tensor& offsets, const KernelGeometry& geometry) {
  backward_impl(variant, grad_output, input, weights, bias, offsets, geometry);
}

OffsetLayerSpec make_offset_layer(std::size_t in_channels,
                                  const KernelGeometry& geometry,
                                  DeformVariant variant) {
  OffsetLayerSpec spec;
  spec.in_channels = in_channels;
  spec.out_channels = offset_channels(variant, geometry);
  spec.kernel_h = geometry.kernel_h();
  spec.kernel_w = geometry.kernel_w();
  spec.options = geometry.conv_options();
  spec.weights = Tensor(Shape{spec.out_channels, in_channels,
                              static_cast<std::size_t>(geometry.kernel_h()),
                              static_cast<std::size_t>(geometry.kernel_w())});
  spec.bias = Tensor::channel_vector(spec.out_channels);
  return spec;
}

}  // namespace rdcseg
