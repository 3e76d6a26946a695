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

#ifndef RDCSEG_OPS_H_
#define RDCSEG_OPS_H_

#include <cstddef>
#include <vector>

#include "rdcseg/tensor.h"

namespace rdcseg {

// Every *_backward function takes the upstream gradient plus the forward
// arguments and accumulates (+=) into the grad buffer of each argument that
// has one enabled. Arguments without a grad buffer are skipped.

struct Conv2dOptions {
  int stride = 1;
  int dilation = 1;
  int pad_h = 0;
  int pad_w = 0;

  static Conv2dOptions with_padding(int padding, int stride = 1,
                                    int dilation = 1) {
    return {stride, dilation, padding, padding};
  }
  // Padding that preserves spatial extents at stride 1.
  static Conv2dOptions same(int kh, int kw, int dilation = 1) {
    return {1, dilation, dilation * (kh - 1) / 2, dilation * (kw - 1) / 2};
  }
};

// Output extent of a sliding window along one axis.
int conv_output_extent(int input, int kernel, int stride, int dilation,
                       int pad);

// weights: (outC, inC, kH, kW); bias: channel vector of outC. Zero padding.
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const Conv2dOptions& options);
void conv2d_backward(const Tensor& grad_output, Tensor& input,
                     Tensor& weights, Tensor& bias,
                     const Conv2dOptions& options);

struct NormStatistics {
  std::vector<double> mean;
  std::vector<double> var;

  NormStatistics() = default;
  explicit NormStatistics(std::size_t channels)
      : mean(channels, 0.0), var(channels, 1.0) {}
  std::size_t channels() const { return mean.size(); }
  bool operator==(const NormStatistics&) const = default;
};

enum class NormMode { kTrain, kInference };

inline constexpr double kBatchNormEpsilon = 1e-5;

// Train mode normalizes with batch statistics and folds them into `stats`
// (running = (1 - momentum) * running + momentum * batch, unbiased variance).
// Inference mode normalizes with `stats` and leaves it untouched.
Tensor batch_normalize(const Tensor& input, NormStatistics& stats,
                       const Tensor& scale, const Tensor& shift, NormMode mode,
                       double momentum);
void batch_normalize_backward(const Tensor& grad_output, Tensor& input,
                              const NormStatistics& stats, Tensor& scale,
                              Tensor& shift, NormMode mode);

Tensor relu(const Tensor& input);
void relu_backward(const Tensor& grad_output, Tensor& input);

Tensor add(const Tensor& a, const Tensor& b);

// Integer-factor bilinear upsampling with half-pixel centers and edge clamp.
Tensor upsample_bilinear(const Tensor& input, int factor);
void upsample_bilinear_backward(const Tensor& grad_output, Tensor& input,
                                int factor);

// loss_scale * mean over non-ignored pixels of -log softmax(true class).
double softmax_cross_entropy(const Tensor& logits, const LabelMap& labels,
                             int ignore_class, double loss_scale);
// Adds upstream * d(loss)/d(logits) into logits.grad.
void softmax_cross_entropy_backward(Tensor& logits, const LabelMap& labels,
                                    int ignore_class, double loss_scale,
                                    double upstream = 1.0);

// Per-pixel argmax over channels.
LabelMap argmax_channels(const Tensor& logits);

}  // namespace rdcseg

#endif  // RDCSEG_OPS_H_
