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

#ifndef RDCSEG_NETWORK_H_
#define RDCSEG_NETWORK_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rdcseg/deformable.h"
#include "rdcseg/ops.h"
#include "rdcseg/tensor.h"

namespace rdcseg {

enum class ParamRole {
  kWeight,
  kBias,
  kNormScale,
  kNormShift,
  kOffsetWeight,
  kOffsetBias,
};

struct Parameter {
  std::string name;
  ParamRole role = ParamRole::kWeight;
  Tensor value;     // grad buffer always enabled
  Tensor velocity;  // optimizer state, same shape

  bool is_offset() const {
    return role == ParamRole::kOffsetWeight || role == ParamRole::kOffsetBias;
  }
  // Weight decay applies to convolution weights only.
  bool decays() const {
    return role == ParamRole::kWeight || role == ParamRole::kOffsetWeight;
  }
};

// Running normalization statistics per domain, for every normalization layer
// of one network. Domains share the layer/channel layout but never storage.
class DomainNormBank {
 public:
  DomainNormBank() = default;
  explicit DomainNormBank(std::vector<std::size_t> layer_channels);

  void register_domain(int domain);
  bool has_domain(int domain) const { return stats_.count(domain) > 0; }
  std::vector<int> domains() const;
  std::size_t num_layers() const { return layout_.size(); }
  const std::vector<std::size_t>& layout() const { return layout_; }

  std::vector<NormStatistics>& domain(int domain);
  const std::vector<NormStatistics>& domain(int domain) const;

  bool operator==(const DomainNormBank&) const = default;

 private:
  std::vector<std::size_t> layout_;
  std::map<int, std::vector<NormStatistics>> stats_;
};

enum class ConvVariant { kRegular, kDC, kRDC, kFRDC };

std::string_view conv_variant_name(ConvVariant v);
ConvVariant parse_conv_variant(std::string_view s);

enum class BlockKind { kDownsampler, kResidual };

struct BlockSpec {
  BlockKind kind = BlockKind::kResidual;
  std::size_t out_channels = 0;  // downsampler only
  ConvVariant variant = ConvVariant::kRegular;  // residual only
  int dilation = 1;                             // residual only

  static BlockSpec downsampler(std::size_t out_channels) {
    return {BlockKind::kDownsampler, out_channels, ConvVariant::kRegular, 1};
  }
  static BlockSpec residual(ConvVariant variant, int dilation = 1) {
    return {BlockKind::kResidual, 0, variant, dilation};
  }
};

struct ToyNetConfig {
  std::size_t in_channels = 3;
  int kernel_size = 3;
  std::vector<BlockSpec> blocks;
  // One classifier (main and auxiliary) per domain; entry d is the class
  // count of domain d's label space.
  std::vector<std::size_t> domain_classes;
  std::size_t aux_channels = 128;
  double norm_momentum = 0.1;
  std::uint64_t init_seed = 1;

  void validate() const;
};

struct NetOutput {
  Tensor logits;
  Tensor aux_logits;
};

class Layer;

// Encoder of downsamplers and factorized residual blocks, per-domain 1x1
// classifiers and an auxiliary branch (1x1 conv, normalization, activation,
// per-domain 1x1 classifier) tapped at the encoder output. Both heads are
// bilinearly upsampled back to the input resolution.
//
// Layers cache their inputs, so backward() must follow the forward() it
// differentiates.
class ToyNet {
 public:
  explicit ToyNet(const ToyNetConfig& config);
  ~ToyNet();
  ToyNet(ToyNet&&) noexcept;
  ToyNet& operator=(ToyNet&&) noexcept;

  const ToyNetConfig& config() const { return config_; }
  std::size_t num_domains() const { return config_.domain_classes.size(); }
  // Total stride of the encoder.
  int output_stride() const { return stride_; }

  // A bank with this network's normalization layout and domains 0..D-1.
  DomainNormBank make_bank() const;
  std::vector<std::size_t> norm_layout() const { return norm_layout_; }

  NetOutput forward(const Tensor& input, int domain, DomainNormBank& bank,
                    NormMode mode);
  // Accumulates parameter gradients given d(loss)/d(logits) and
  // d(loss)/d(aux_logits) of the latest forward. Returns d(loss)/d(input).
  Tensor backward(const Tensor& grad_logits, const Tensor& grad_aux);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter* find_parameter(const std::string& name);
  std::size_t parameter_count() const;
  void zero_grad();

  // Offset fields produced by deformable layers during the latest forward.
  std::vector<const Tensor*> last_offsets() const;
  double mean_abs_offset() const;

 private:
  ToyNetConfig config_;
  int stride_ = 1;
  std::vector<std::size_t> norm_layout_;
  std::vector<std::unique_ptr<Parameter>> params_;
  std::vector<std::unique_ptr<Layer>> encoder_;
  std::vector<std::unique_ptr<Layer>> heads_;      // per domain
  std::unique_ptr<Layer> aux_trunk_;
  std::vector<std::unique_ptr<Layer>> aux_heads_;  // per domain
  int active_domain_ = -1;
  Tensor encoder_out_;
  Tensor head_out_;
  Tensor aux_out_;
};

}  // namespace rdcseg

#endif  // RDCSEG_NETWORK_H_
