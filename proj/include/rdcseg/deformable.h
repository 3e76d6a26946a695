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

#ifndef RDCSEG_DEFORMABLE_H_
#define RDCSEG_DEFORMABLE_H_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "rdcseg/ops.h"
#include "rdcseg/tensor.h"

namespace rdcseg {

// Deformable convolution family. All variants run at stride 1 and share one
// offset field across every input and output channel.
//
// Offset layout, per output pixel, in tap order (row-major over the kernel):
//   DC   2N channels:      (dv, du) for every tap
//   RDC  2(N-1) channels:  (dv, du) for every tap except the center
//   FRDC k-1 channels:     displacement along the kernel axis, outer taps only
// where v is the vertical (height) axis and u the horizontal (width) axis.

enum class DeformVariant { kDeformable, kRestricted, kFactorized };
enum class Axis { kVertical, kHorizontal };

std::string_view variant_name(DeformVariant v);

struct TapLocation {
  int dy;
  int dx;
  bool operator==(const TapLocation&) const = default;
};

// The sampling grid of a kH x kW kernel with the given dilation, centered on
// (0, 0). Padding defaults to the value that preserves spatial extents.
class KernelGeometry {
 public:
  static KernelGeometry regular(int kernel_h, int kernel_w, int dilation = 1);
  static KernelGeometry along_axis(int length, Axis axis, int dilation = 1);

  KernelGeometry with_padding(int pad_h, int pad_w) const;

  int kernel_h() const { return kernel_h_; }
  int kernel_w() const { return kernel_w_; }
  int dilation() const { return dilation_; }
  int pad_h() const { return pad_h_; }
  int pad_w() const { return pad_w_; }
  std::span<const TapLocation> taps() const { return taps_; }
  std::size_t num_taps() const { return taps_.size(); }
  std::size_t center_index() const { return center_; }
  bool is_1d() const { return kernel_h_ == 1 || kernel_w_ == 1; }

  // Equivalent regular convolution settings.
  Conv2dOptions conv_options() const { return {1, dilation_, pad_h_, pad_w_}; }

 private:
  KernelGeometry() = default;
  int kernel_h_ = 0;
  int kernel_w_ = 0;
  int dilation_ = 1;
  int pad_h_ = 0;
  int pad_w_ = 0;
  std::vector<TapLocation> taps_;
  std::size_t center_ = 0;
};

std::size_t offset_channels(DeformVariant variant, const KernelGeometry& geometry);

// ---------------------------------------------------------------------------
// Bilinear sampler over a single plane, with the plane implicitly extended
// by zeros outside [0, H) x [0, W).

struct SamplePosition {
  double u;  // horizontal
  double v;  // vertical
};

struct PlaneView {
  const double* data;
  std::size_t height;
  std::size_t width;

  double at_or_zero(long long y, long long x) const {
    if (y < 0 || x < 0 || y >= static_cast<long long>(height) ||
        x >= static_cast<long long>(width)) {
      return 0.0;
    }
    return data[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
  }
};

// Four-neighbor stencil of a fractional position: the cell's top-left
// corner (floor) and the fractional parts. Integer positions sit at the
// top-left of their cell (right-continuous convention).
struct BilinearStencil {
  long long y0;
  long long x0;
  double fy;
  double fx;
};

BilinearStencil bilinear_stencil(SamplePosition pos);
double bilinear_sample(const PlaneView& plane, SamplePosition pos);

struct PositionGradient {
  double d_u;
  double d_v;
};

// Partial derivatives of bilinear_sample with respect to (u, v).
PositionGradient bilinear_position_gradient(const PlaneView& plane,
                                            SamplePosition pos);
// Adds upstream * d(sample)/d(plane values) into `grad_plane` (same extents
// as the sampled plane); out-of-range neighbors are dropped.
void bilinear_scatter(std::span<double> grad_plane, std::size_t height,
                      std::size_t width, SamplePosition pos, double upstream);

// ---------------------------------------------------------------------------
// Operators. weights: (outC, inC, kH, kW); bias: channel vector of outC;
// offsets: (N, offset_channels, outH, outW).

Tensor deformable_conv2d(const Tensor& input, const Tensor& weights,
                         const Tensor& bias, const Tensor& offsets,
                         const KernelGeometry& geometry);
void deformable_conv2d_backward(const Tensor& grad_output, Tensor& input,
                                Tensor& weights, Tensor& bias, Tensor& offsets,
                                const KernelGeometry& geometry);

Tensor restricted_deformable_conv2d(const Tensor& input, const Tensor& weights,
                                    const Tensor& bias, const Tensor& offsets,
                                    const KernelGeometry& geometry);
void restricted_deformable_conv2d_backward(const Tensor& grad_output,
                                           Tensor& input, Tensor& weights,
                                           Tensor& bias, Tensor& offsets,
                                           const KernelGeometry& geometry);

// weights must be (outC, inC, k, 1) for kVertical or (outC, inC, 1, k) for
// kHorizontal.
Tensor factorized_rdc_1d(const Tensor& input, const Tensor& weights,
                         const Tensor& bias, const Tensor& axis_offsets,
                         Axis axis, int dilation = 1);
void factorized_rdc_1d_backward(const Tensor& grad_output, Tensor& input,
                                Tensor& weights, Tensor& bias,
                                Tensor& axis_offsets, Axis axis,
                                int dilation = 1);

// Variant dispatch used by the network layers. `geometry` must be 1D for
// kFactorized.
Tensor deform_conv_forward(DeformVariant variant, const Tensor& input,
                           const Tensor& weights, const Tensor& bias,
                           const Tensor& offsets, const KernelGeometry& geometry);
void deform_conv_backward(DeformVariant variant, const Tensor& grad_output,
                          Tensor& input, Tensor& weights, Tensor& bias,
                          Tensor& offsets, const KernelGeometry& geometry);

// Regular convolution that predicts the offset field from the same input
// the deformable layer consumes. Same kernel extents, dilation and padding
// as the host layer, zero-initialized weights and bias.
struct OffsetLayerSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  Conv2dOptions options;
  Tensor weights;
  Tensor bias;
};

OffsetLayerSpec make_offset_layer(std::size_t in_channels,
                                  const KernelGeometry& geometry,
                                  DeformVariant variant);

}  // namespace rdcseg

#endif  // RDCSEG_DEFORMABLE_H_
