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

#include "rdcseg/gradsuite.h"

#include <algorithm>
#include <cctype>
#include <memory>
#include <random>
#include <string>

#include "rdcseg/deformable.h"
#include "rdcseg/ops.h"

namespace rdcseg {
namespace {

struct Instance {
  DifferentiableOp op;
  std::vector<Tensor> inputs;
};

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  // Integer part in [lo, hi] plus a fractional part in [0.05, 0.95].
  double off_lattice(int lo, int hi) { return integer(lo, hi) + uniform(0.05, 0.95); }
  Tensor tensor(Shape s) {
    Tensor t(s);
    for (double& v : t.data()) v = uniform(-1.0, 1.0);
    return t;
  }
  Tensor offsets(Shape s, int reach) {
    Tensor t(s);
    for (double& v : t.data()) v = off_lattice(-reach - 1, reach);
    return t;
  }
  int odd(int max) { return 2 * integer(0, (max - 1) / 2) + 1; }

 private:
  std::mt19937_64 rng_;
};

Instance bilinear_instance(Gen& g) {
  const auto h = static_cast<std::size_t>(g.integer(2, 5));
  const auto w = static_cast<std::size_t>(g.integer(2, 5));
  const auto p = static_cast<std::size_t>(g.integer(3, 8));
  Tensor plane = g.tensor({1, 1, h, w});
  Tensor pos({1, 2, 1, p});  // channel 0: u, channel 1: v
  for (std::size_t i = 0; i < p; ++i) {
    pos.at(0, 0, 0, i) = g.off_lattice(-2, static_cast<int>(w));
    pos.at(0, 1, 0, i) = g.off_lattice(-2, static_cast<int>(h));
  }
  DifferentiableOp op;
  op.forward = [](std::vector<Tensor>& in) {
    const Tensor& pl = in[0];
    const PlaneView view{pl.ptr(), pl.shape().h, pl.shape().w};
    Tensor out({1, 1, 1, in[1].shape().w});
    for (std::size_t i = 0; i < out.numel(); ++i) {
      out[i] = bilinear_sample(view, {in[1].at(0, 0, 0, i), in[1].at(0, 1, 0, i)});
    }
    return out;
  };
  op.backward = [](const Tensor& grad, std::vector<Tensor>& in) {
    Tensor& pl = in[0];
    const PlaneView view{pl.ptr(), pl.shape().h, pl.shape().w};
    for (std::size_t i = 0; i < grad.numel(); ++i) {
      const SamplePosition sp{in[1].at(0, 0, 0, i), in[1].at(0, 1, 0, i)};
      if (pl.has_grad()) bilinear_scatter(pl.grad(), pl.shape().h, pl.shape().w, sp, grad[i]);
      if (in[1].has_grad()) {
        const PositionGradient pg = bilinear_position_gradient(view, sp);
        in[1].grad()[in[1].offset(0, 0, 0, i)] += grad[i] * pg.d_u;
        in[1].grad()[in[1].offset(0, 1, 0, i)] += grad[i] * pg.d_v;
      }
    }
  };
  return {op, {plane, pos}};
}

Instance deform_instance(Gen& g, DeformVariant variant) {
  const auto n = static_cast<std::size_t>(g.integer(1, 2));
  const auto cin = static_cast<std::size_t>(g.integer(1, 3));
  const auto cout = static_cast<std::size_t>(g.integer(1, 3));
  const auto h = static_cast<std::size_t>(g.integer(3, 6));
  const auto w = static_cast<std::size_t>(g.integer(3, 6));
  const int dil = g.integer(1, 2);
  KernelGeometry geom = KernelGeometry::regular(3, 3, dil);
  if (variant == DeformVariant::kFactorized) {
    const Axis axis = g.integer(0, 1) ? Axis::kHorizontal : Axis::kVertical;
    geom = KernelGeometry::along_axis(g.integer(1, 2) * 2 + 1, axis, dil);
  } else if (g.integer(0, 1)) {
    geom = KernelGeometry::regular(g.odd(3), g.odd(3), dil);
  }
  const auto kh = static_cast<std::size_t>(geom.kernel_h());
  const auto kw = static_cast<std::size_t>(geom.kernel_w());
  Tensor x = g.tensor({n, cin, h, w});
  Tensor wt = g.tensor({cout, cin, kh, kw});
  Tensor b = g.tensor({1, cout, 1, 1});
  Tensor off = g.offsets({n, offset_channels(variant, geom), h, w}, 1);
  DifferentiableOp op;
  op.forward = [variant, geom](std::vector<Tensor>& in) {
    return deform_conv_forward(variant, in[0], in[1], in[2], in[3], geom);
  };
  op.backward = [variant, geom](const Tensor& grad, std::vector<Tensor>& in) {
    deform_conv_backward(variant, grad, in[0], in[1], in[2], in[3], geom);
  };
  return {op, {x, wt, b, off}};
}

Instance conv_instance(Gen& g) {
  const auto n = static_cast<std::size_t>(g.integer(1, 2));
  const auto cin = static_cast<std::size_t>(g.integer(1, 3));
  const auto cout = static_cast<std::size_t>(g.integer(1, 3));
  const int kh = g.odd(3);
  const int kw = g.odd(3);
  const Conv2dOptions opt{g.integer(1, 2), g.integer(1, 2), g.integer(0, 2), g.integer(0, 2)};
  const int min_h = opt.dilation * (kh - 1) + 1 - 2 * opt.pad_h;
  const int min_w = opt.dilation * (kw - 1) + 1 - 2 * opt.pad_w;
  const auto h = static_cast<std::size_t>(std::max(min_h, 1) + g.integer(0, 3));
  const auto w = static_cast<std::size_t>(std::max(min_w, 1) + g.integer(0, 3));
  Tensor x = g.tensor({n, cin, h, w});
  Tensor wt = g.tensor({cout, cin, static_cast<std::size_t>(kh), static_cast<std::size_t>(kw)});
  Tensor b = g.tensor({1, cout, 1, 1});
  DifferentiableOp op;
  op.forward = [opt](std::vector<Tensor>& in) { return conv2d(in[0], in[1], in[2], opt); };
  op.backward = [opt](const Tensor& grad, std::vector<Tensor>& in) {
    conv2d_backward(grad, in[0], in[1], in[2], opt);
  };
  return {op, {x, wt, b}};
}

Instance bn_instance(Gen& g) {
  const auto n = static_cast<std::size_t>(g.integer(2, 3));
  const auto c = static_cast<std::size_t>(g.integer(1, 3));
  const auto h = static_cast<std::size_t>(g.integer(1, 3));
  const auto w = static_cast<std::size_t>(g.integer(2, 3));
  const NormMode mode = g.integer(0, 1) ? NormMode::kTrain : NormMode::kInference;
  auto stats = std::make_shared<NormStatistics>(c);
  for (std::size_t k = 0; k < c; ++k) {
    stats->mean[k] = g.uniform(-0.5, 0.5);
    stats->var[k] = g.uniform(0.5, 2.0);
  }
  Tensor x = g.tensor({n, c, h, w});
  Tensor scale = g.tensor({1, c, 1, 1});
  Tensor shift = g.tensor({1, c, 1, 1});
  DifferentiableOp op;
  op.forward = [stats, mode](std::vector<Tensor>& in) {
    // Forward mutates running statistics in train mode; the output does not
    // depend on them there, and inference mode reads them untouched.
    NormStatistics local = *stats;
    return batch_normalize(in[0], local, in[1], in[2], mode, 0.1);
  };
  op.backward = [stats, mode](const Tensor& grad, std::vector<Tensor>& in) {
    batch_normalize_backward(grad, in[0], *stats, in[1], in[2], mode);
  };
  return {op, {x, scale, shift}};
}

Instance ce_instance(Gen& g) {
  const auto n = static_cast<std::size_t>(g.integer(1, 2));
  const auto c = static_cast<std::size_t>(g.integer(2, 4));
  const auto h = static_cast<std::size_t>(g.integer(1, 3));
  const auto w = static_cast<std::size_t>(g.integer(1, 3));
  constexpr int kIgnore = 255;
  Tensor logits = g.tensor({n, c, h, w});
  for (double& v : logits.data()) v *= 3.0;
  auto labels = std::make_shared<LabelMap>(n, h, w);
  for (int& l : labels->labels) l = g.integer(0, 5) == 0 ? kIgnore : g.integer(0, static_cast<int>(c) - 1);
  labels->labels[0] = 0;  // at least one scored pixel
  const double scale = g.uniform(0.5, 2.0);
  DifferentiableOp op;
  op.forward = [labels, scale](std::vector<Tensor>& in) {
    return Tensor({1, 1, 1, 1}, {softmax_cross_entropy(in[0], *labels, kIgnore, scale)});
  };
  op.backward = [labels, scale](const Tensor& grad, std::vector<Tensor>& in) {
    softmax_cross_entropy_backward(in[0], *labels, kIgnore, scale, grad[0]);
  };
  return {op, {logits}};
}

}  // namespace

std::optional<GradSuiteOp> parse_grad_suite_op(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (s == "bilinear") return GradSuiteOp::kBilinear;
  if (s == "dc") return GradSuiteOp::kDC;
  if (s == "rdc") return GradSuiteOp::kRDC;
  if (s == "frdc") return GradSuiteOp::kFRDC;
  if (s == "conv") return GradSuiteOp::kConv;
  if (s == "bn") return GradSuiteOp::kBatchNorm;
  if (s == "ce") return GradSuiteOp::kCrossEntropy;
  return std::nullopt;
}

std::string_view grad_suite_op_name(GradSuiteOp op) {
  switch (op) {
    case GradSuiteOp::kBilinear: return "bilinear";
    case GradSuiteOp::kDC: return "dc";
    case GradSuiteOp::kRDC: return "rdc";
    case GradSuiteOp::kFRDC: return "frdc";
    case GradSuiteOp::kConv: return "conv";
    case GradSuiteOp::kBatchNorm: return "bn";
    case GradSuiteOp::kCrossEntropy: return "ce";
  }
  return "?";
}

GradientCheckReport run_grad_suite(GradSuiteOp which, const GradSuiteOptions& options) {
  RDC_CHECK(options.instances > 0, "gradient suite needs at least one instance");
  Gen gen(options.seed);
  GradientCheckReport total;
  total.tolerance = options.tolerance;
  for (std::size_t i = 0; i < options.instances; ++i) {
    Instance inst;
    switch (which) {
      case GradSuiteOp::kBilinear: inst = bilinear_instance(gen); break;
      case GradSuiteOp::kDC: inst = deform_instance(gen, DeformVariant::kDeformable); break;
      case GradSuiteOp::kRDC: inst = deform_instance(gen, DeformVariant::kRestricted); break;
      case GradSuiteOp::kFRDC: inst = deform_instance(gen, DeformVariant::kFactorized); break;
      case GradSuiteOp::kConv: inst = conv_instance(gen); break;
      case GradSuiteOp::kBatchNorm: inst = bn_instance(gen); break;
      case GradSuiteOp::kCrossEntropy: inst = ce_instance(gen); break;
    }
    if (options.inject_fault) {
      auto real = inst.op.backward;
      inst.op.backward = [real](const Tensor& grad, std::vector<Tensor>& in) {
        Tensor scaled = grad;
        for (double& v : scaled.data()) v *= 1.5;
        real(scaled, in);
      };
    }
    GradCheckOptions gco;
    gco.seed = options.seed * 1000003u + i;
    total.merge(finite_difference_check(inst.op, std::move(inst.inputs), options.epsilon,
                                        options.tolerance, gco));
  }
  return total;
}

}  // namespace rdcseg
