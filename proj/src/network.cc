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

#include "rdcseg/network.h"

#include <cmath>
#include <random>

namespace rdcseg {

DomainNormBank::DomainNormBank(std::vector<std::size_t> layer_channels)
    : layout_(std::move(layer_channels)) {}

void DomainNormBank::register_domain(int domain) {
  if (has_domain(domain)) return;
  std::vector<NormStatistics> layers;
  layers.reserve(layout_.size());
  for (std::size_t c : layout_) layers.emplace_back(c);
  stats_.emplace(domain, std::move(layers));
}

std::vector<int> DomainNormBank::domains() const {
  std::vector<int> out;
  for (const auto& [id, _] : stats_) out.push_back(id);
  return out;
}

std::vector<NormStatistics>& DomainNormBank::domain(int domain) {
  auto it = stats_.find(domain);
  RDC_CHECK(it != stats_.end(), "domain " << domain << " is not registered");
  return it->second;
}

const std::vector<NormStatistics>& DomainNormBank::domain(int domain) const {
  auto it = stats_.find(domain);
  RDC_CHECK(it != stats_.end(), "domain " << domain << " is not registered");
  return it->second;
}

std::string_view conv_variant_name(ConvVariant v) {
  switch (v) {
    case ConvVariant::kRegular:
      return "regular";
    case ConvVariant::kDC:
      return "dc";
    case ConvVariant::kRDC:
      return "rdc";
    case ConvVariant::kFRDC:
      return "frdc";
  }
  return "?";
}

ConvVariant parse_conv_variant(std::string_view s) {
  for (ConvVariant v : {ConvVariant::kRegular, ConvVariant::kDC, ConvVariant::kRDC,
                        ConvVariant::kFRDC}) {
    if (s == conv_variant_name(v)) return v;
  }
  RDC_CHECK(false, "unknown convolution variant '" << s
                                                   << "' (expected regular|dc|rdc|frdc)");
  return ConvVariant::kRegular;
}

void ToyNetConfig::validate() const {
  RDC_CHECK(in_channels > 0, "toy net: in_channels must be positive");
  RDC_CHECK(kernel_size > 0 && kernel_size % 2 == 1,
            "toy net: kernel_size must be odd, got " << kernel_size);
  RDC_CHECK(!domain_classes.empty(), "toy net: at least one domain classifier is required");
  for (std::size_t c : domain_classes) {
    RDC_CHECK(c > 0, "toy net: every domain needs at least one class");
  }
  RDC_CHECK(aux_channels > 0, "toy net: aux_channels must be positive");
  RDC_CHECK(norm_momentum > 0.0 && norm_momentum < 1.0,
            "toy net: norm_momentum must lie in (0, 1)");
  bool downsampled = false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockSpec& b = blocks[i];
    if (b.kind == BlockKind::kDownsampler) {
      RDC_CHECK(b.out_channels > 0, "toy net: block " << i << " downsampler needs channels");
      downsampled = true;
      continue;
    }
    RDC_CHECK(b.dilation > 0, "toy net: block " << i << " dilation must be positive");
    RDC_CHECK(b.variant == ConvVariant::kRegular || downsampled,
              "toy net: block " << i << " uses the " << conv_variant_name(b.variant)
                                << " variant before any downsampler");
    RDC_CHECK(b.variant == ConvVariant::kRegular || kernel_size >= 3,
              "toy net: deformable variants need kernel_size >= 3");
  }
}

// ---------------------------------------------------------------------------

struct ForwardContext {
  std::vector<NormStatistics>* stats;
  NormMode mode;
  double momentum;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, const ForwardContext& ctx) = 0;
  virtual Tensor backward(const Tensor& grad) = 0;
  virtual void collect_offsets(std::vector<const Tensor*>&) const {}
};

namespace {

Tensor grad_of(Tensor& t) { return t.grad_tensor(); }

class ConvLayer final : public Layer {
 public:
  ConvLayer(Parameter* w, Parameter* b, Conv2dOptions opt) : w_(w), b_(b), opt_(opt) {}
  Tensor forward(const Tensor& x, const ForwardContext&) override {
    input_ = x;
    return conv2d(x, w_->value, b_->value, opt_);
  }
  Tensor backward(const Tensor& grad) override {
    input_.enable_grad();
    input_.zero_grad();
    conv2d_backward(grad, input_, w_->value, b_->value, opt_);
    return grad_of(input_);
  }

 private:
  Parameter* w_;
  Parameter* b_;
  Conv2dOptions opt_;
  Tensor input_;
};

class DeformLayer final : public Layer {
 public:
  DeformLayer(DeformVariant variant, KernelGeometry geometry, Parameter* w,
              Parameter* b, Parameter* offset_w, Parameter* offset_b)
      : variant_(variant),
        geometry_(std::move(geometry)),
        w_(w),
        b_(b),
        offset_w_(offset_w),
        offset_b_(offset_b) {}

  Tensor forward(const Tensor& x, const ForwardContext&) override {
    input_ = x;
    offsets_ = conv2d(x, offset_w_->value, offset_b_->value, geometry_.conv_options());
    return deform_conv_forward(variant_, x, w_->value, b_->value, offsets_, geometry_);
  }
  Tensor backward(const Tensor& grad) override {
    input_.enable_grad();
    input_.zero_grad();
    offsets_.enable_grad();
    offsets_.zero_grad();
    deform_conv_backward(variant_, grad, input_, w_->value, b_->value, offsets_,
                         geometry_);
    const Tensor offset_grad = grad_of(offsets_);
    conv2d_backward(offset_grad, input_, offset_w_->value, offset_b_->value,
                    geometry_.conv_options());
    return grad_of(input_);
  }
  void collect_offsets(std::vector<const Tensor*>& out) const override {
    out.push_back(&offsets_);
  }

 private:
  DeformVariant variant_;
  KernelGeometry geometry_;
  Parameter* w_;
  Parameter* b_;
  Parameter* offset_w_;
  Parameter* offset_b_;
  Tensor input_;
  Tensor offsets_;
};

class NormLayer final : public Layer {
 public:
  NormLayer(std::size_t index, Parameter* scale, Parameter* shift)
      : index_(index), scale_(scale), shift_(shift) {}
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
    input_ = x;
    stats_ = &(*ctx.stats)[index_];
    mode_ = ctx.mode;
    return batch_normalize(x, *stats_, scale_->value, shift_->value, ctx.mode,
                           ctx.momentum);
  }
  Tensor backward(const Tensor& grad) override {
    input_.enable_grad();
    input_.zero_grad();
    batch_normalize_backward(grad, input_, *stats_, scale_->value, shift_->value, mode_);
    return grad_of(input_);
  }

 private:
  std::size_t index_;
  Parameter* scale_;
  Parameter* shift_;
  Tensor input_;
  NormStatistics* stats_ = nullptr;
  NormMode mode_ = NormMode::kTrain;
};

class ReluLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x, const ForwardContext&) override {
    input_ = x;
    return relu(x);
  }
  Tensor backward(const Tensor& grad) override {
    input_.enable_grad();
    input_.zero_grad();
    relu_backward(grad, input_);
    return grad_of(input_);
  }

 private:
  Tensor input_;
};

class UpsampleLayer final : public Layer {
 public:
  explicit UpsampleLayer(int factor) : factor_(factor) {}
  Tensor forward(const Tensor& x, const ForwardContext&) override {
    input_shape_ = x.shape();
    return upsample_bilinear(x, factor_);
  }
  Tensor backward(const Tensor& grad) override {
    Tensor in(input_shape_);
    in.enable_grad();
    upsample_bilinear_backward(grad, in, factor_);
    return grad_of(in);
  }

 private:
  int factor_;
  Shape input_shape_;
};

class Sequence final : public Layer {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, ctx);
    return h;
  }
  Tensor backward(const Tensor& grad) override {
    Tensor g = grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }
  void collect_offsets(std::vector<const Tensor*>& out) const override {
    for (const auto& l : layers_) l->collect_offsets(out);
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// out = relu(body(x) + x)
class ResidualLayer final : public Layer {
 public:
  explicit ResidualLayer(std::unique_ptr<Sequence> body) : body_(std::move(body)) {}
  Tensor forward(const Tensor& x, const ForwardContext& ctx) override {
    sum_ = add(body_->forward(x, ctx), x);
    return relu(sum_);
  }
  Tensor backward(const Tensor& grad) override {
    sum_.enable_grad();
    sum_.zero_grad();
    relu_backward(grad, sum_);
    const Tensor g_sum = grad_of(sum_);
    Tensor g = body_->backward(g_sum);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += g_sum[i];
    return g;
  }
  void collect_offsets(std::vector<const Tensor*>& out) const override {
    body_->collect_offsets(out);
  }

 private:
  std::unique_ptr<Sequence> body_;
  Tensor sum_;
};

DeformVariant to_deform_variant(ConvVariant v) {
  switch (v) {
    case ConvVariant::kDC:
      return DeformVariant::kDeformable;
    case ConvVariant::kRDC:
      return DeformVariant::kRestricted;
    default:
      return DeformVariant::kFactorized;
  }
}

// Creates parameters in construction order; Xavier-uniform for convolution
// weights, zeros for biases and offset layers, ones for norm scales.
class Builder {
 public:
  Builder(std::vector<std::unique_ptr<Parameter>>& params,
          std::vector<std::size_t>& norm_layout, std::uint64_t seed)
      : params_(params), norm_layout_(norm_layout), rng_(seed) {}

  Parameter* param(const std::string& name, Shape shape, ParamRole role) {
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->role = role;
    p->value = Tensor(shape);
    if (role == ParamRole::kWeight) {
      const double fan_in = static_cast<double>(shape.c * shape.h * shape.w);
      const double fan_out = static_cast<double>(shape.n * shape.h * shape.w);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : p->value.data()) v = dist(rng_);
    } else if (role == ParamRole::kNormScale) {
      p->value.fill(1.0);
    }
    p->value.enable_grad();
    p->velocity = Tensor(shape);
    params_.push_back(std::move(p));
    return params_.back().get();
  }

  std::unique_ptr<Layer> conv(const std::string& name, std::size_t in, std::size_t out,
                              int kh, int kw, Conv2dOptions opt) {
    Parameter* w = param(name + ".weight", Shape{out, in, static_cast<std::size_t>(kh),
                                                 static_cast<std::size_t>(kw)},
                         ParamRole::kWeight);
    Parameter* b = param(name + ".bias", Shape{1, out, 1, 1}, ParamRole::kBias);
    return std::make_unique<ConvLayer>(w, b, opt);
  }

  // Regular or deformable stride-1 convolution with "same" padding.
  std::unique_ptr<Layer> conv_variant(const std::string& name, ConvVariant variant,
                                      std::size_t channels, int kh, int kw, int dilation) {
    if (variant == ConvVariant::kRegular) {
      return conv(name, channels, channels, kh, kw, Conv2dOptions::same(kh, kw, dilation));
    }
    const KernelGeometry g = KernelGeometry::regular(kh, kw, dilation);
    const DeformVariant dv = to_deform_variant(variant);
    Parameter* w = param(name + ".weight",
                         Shape{channels, channels, static_cast<std::size_t>(kh),
                               static_cast<std::size_t>(kw)},
                         ParamRole::kWeight);
    Parameter* b = param(name + ".bias", Shape{1, channels, 1, 1}, ParamRole::kBias);
    const OffsetLayerSpec spec = make_offset_layer(channels, g, dv);
    Parameter* ow = param(name + ".offset.weight", spec.weights.shape(),
                          ParamRole::kOffsetWeight);
    Parameter* ob = param(name + ".offset.bias", spec.bias.shape(), ParamRole::kOffsetBias);
    return std::make_unique<DeformLayer>(dv, g, w, b, ow, ob);
  }

  std::unique_ptr<Layer> norm(const std::string& name, std::size_t channels) {
    Parameter* s = param(name + ".scale", Shape{1, channels, 1, 1}, ParamRole::kNormScale);
    Parameter* t = param(name + ".shift", Shape{1, channels, 1, 1}, ParamRole::kNormShift);
    norm_layout_.push_back(channels);
    return std::make_unique<NormLayer>(norm_layout_.size() - 1, s, t);
  }

 private:
  std::vector<std::unique_ptr<Parameter>>& params_;
  std::vector<std::size_t>& norm_layout_;
  std::mt19937_64 rng_;
};

}  // namespace

ToyNet::ToyNet(const ToyNetConfig& config) : config_(config) {
  config_.validate();
  Builder b(params_, norm_layout_, config_.init_seed);
  const int k = config_.kernel_size;
  std::size_t channels = config_.in_channels;
  for (std::size_t i = 0; i < config_.blocks.size(); ++i) {
    const BlockSpec& spec = config_.blocks[i];
    const std::string name = "block" + std::to_string(i);
    auto seq = std::make_unique<Sequence>();
    if (spec.kind == BlockKind::kDownsampler) {
      seq->add(b.conv(name + ".conv", channels, spec.out_channels, k, k,
                      Conv2dOptions::with_padding((k - 1) / 2, 2)));
      seq->add(b.norm(name + ".norm", spec.out_channels));
      seq->add(std::make_unique<ReluLayer>());
      channels = spec.out_channels;
      stride_ *= 2;
      encoder_.push_back(std::move(seq));
      continue;
    }
    // Factorized residual block: (k x 1, 1 x k) at dilation 1, then at the
    // block dilation; the first pair carries the block's variant.
    seq->add(b.conv_variant(name + ".conv_a", spec.variant, channels, k, 1, 1));
    seq->add(b.norm(name + ".norm_a", channels));
    seq->add(std::make_unique<ReluLayer>());
    seq->add(b.conv_variant(name + ".conv_b", spec.variant, channels, 1, k, 1));
    seq->add(b.norm(name + ".norm_b", channels));
    seq->add(std::make_unique<ReluLayer>());
    seq->add(b.conv_variant(name + ".conv_c", ConvVariant::kRegular, channels, k, 1,
                            spec.dilation));
    seq->add(b.norm(name + ".norm_c", channels));
    seq->add(std::make_unique<ReluLayer>());
    seq->add(b.conv_variant(name + ".conv_d", ConvVariant::kRegular, channels, 1, k,
                            spec.dilation));
    seq->add(b.norm(name + ".norm_d", channels));
    encoder_.push_back(std::make_unique<ResidualLayer>(std::move(seq)));
  }

  for (std::size_t d = 0; d < num_domains(); ++d) {
    auto seq = std::make_unique<Sequence>();
    seq->add(b.conv("head" + std::to_string(d), channels, config_.domain_classes[d], 1, 1,
                    Conv2dOptions{}));
    seq->add(std::make_unique<UpsampleLayer>(stride_));
    heads_.push_back(std::move(seq));
  }
  auto trunk = std::make_unique<Sequence>();
  trunk->add(b.conv("aux.conv", channels, config_.aux_channels, 1, 1, Conv2dOptions{}));
  trunk->add(b.norm("aux.norm", config_.aux_channels));
  trunk->add(std::make_unique<ReluLayer>());
  aux_trunk_ = std::move(trunk);
  for (std::size_t d = 0; d < num_domains(); ++d) {
    auto seq = std::make_unique<Sequence>();
    seq->add(b.conv("aux_head" + std::to_string(d), config_.aux_channels,
                    config_.domain_classes[d], 1, 1, Conv2dOptions{}));
    seq->add(std::make_unique<UpsampleLayer>(stride_));
    aux_heads_.push_back(std::move(seq));
  }
}

ToyNet::~ToyNet() = default;
ToyNet::ToyNet(ToyNet&&) noexcept = default;
ToyNet& ToyNet::operator=(ToyNet&&) noexcept = default;

DomainNormBank ToyNet::make_bank() const {
  DomainNormBank bank(norm_layout_);
  for (std::size_t d = 0; d < num_domains(); ++d) bank.register_domain(static_cast<int>(d));
  return bank;
}

NetOutput ToyNet::forward(const Tensor& input, int domain, DomainNormBank& bank,
                          NormMode mode) {
  RDC_CHECK(domain >= 0 && static_cast<std::size_t>(domain) < num_domains(),
            "domain_forward: unknown domain " << domain << " (network has "
                                              << num_domains() << " classifiers)");
  RDC_CHECK(bank.has_domain(domain),
            "domain_forward: domain " << domain << " is not registered in the bank");
  RDC_CHECK(bank.layout() == norm_layout_,
            "domain_forward: bank layout does not match the network");
  RDC_CHECK(input.shape().c == config_.in_channels,
            "domain_forward: input has " << input.shape().c << " channels, expected "
                                         << config_.in_channels);
  RDC_CHECK(input.shape().h % stride_ == 0 && input.shape().w % stride_ == 0,
            "domain_forward: input extents " << input.shape().h << "x" << input.shape().w
                                             << " must be divisible by the encoder stride "
                                             << stride_);
  const ForwardContext ctx{&bank.domain(domain), mode, config_.norm_momentum};
  active_domain_ = domain;
  Tensor h = input;
  for (auto& layer : encoder_) h = layer->forward(h, ctx);
  NetOutput out;
  out.logits = heads_[domain]->forward(h, ctx);
  const Tensor trunk = aux_trunk_->forward(h, ctx);
  out.aux_logits = aux_heads_[domain]->forward(trunk, ctx);
  return out;
}

Tensor ToyNet::backward(const Tensor& grad_logits, const Tensor& grad_aux) {
  RDC_CHECK(active_domain_ >= 0, "ToyNet::backward called before forward");
  Tensor g = heads_[active_domain_]->backward(grad_logits);
  const Tensor g_aux = aux_trunk_->backward(aux_heads_[active_domain_]->backward(grad_aux));
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] += g_aux[i];
  for (auto it = encoder_.rbegin(); it != encoder_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Parameter*> ToyNet::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ToyNet::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

Parameter* ToyNet::find_parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::size_t ToyNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

void ToyNet::zero_grad() {
  for (auto& p : params_) p->value.zero_grad();
}

std::vector<const Tensor*> ToyNet::last_offsets() const {
  std::vector<const Tensor*> out;
  for (const auto& l : encoder_) l->collect_offsets(out);
  return out;
}

double ToyNet::mean_abs_offset() const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const Tensor* t : last_offsets()) {
    for (double v : t->data()) sum += std::abs(v);
    count += t->numel();
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace rdcseg
