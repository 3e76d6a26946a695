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

#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "oracles.h"
#include "rdcseg/deformable.h"
#include "rdcseg/gradcheck.h"
#include "rdcseg/gradsuite.h"

namespace rdcseg {
namespace {

double max_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor offsets_in(Shape s, std::mt19937_64& rng, double lo, double hi) {
  return oracle::random_tensor(s, rng, lo, hi);
}

TEST(BilinearTest, LatticePointReadsStoredValue) {
  const double plane[] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  const PlaneView view{plane, 4, 5};
  // u = 3 (column), v = 2 (row).
  EXPECT_EQ(bilinear_sample(view, {3.0, 2.0}), plane[2 * 5 + 3]);
  const PositionGradient g = bilinear_position_gradient(view, {3.0, 2.0});
  EXPECT_EQ(g.d_u, plane[2 * 5 + 4] - plane[2 * 5 + 3]);
  EXPECT_EQ(g.d_v, plane[3 * 5 + 3] - plane[2 * 5 + 3]);
}

TEST(BilinearTest, CellCenterAveragesCorners) {
  const double plane[] = {0, 0, 0, 4};
  EXPECT_EQ(bilinear_sample({plane, 2, 2}, {0.5, 0.5}), 1.0);
}

TEST(BilinearTest, MatchesScalarQFormula) {
  Tensor t(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const PlaneView view{t.ptr(), 2, 2};
  EXPECT_NEAR(bilinear_sample(view, {0.25, 0.75}), oracle::scalar_bilinear(t, 0, 0, 0.25, 0.75),
              1e-12);
  std::mt19937_64 rng(41);
  const Tensor big = oracle::random_tensor({1, 1, 5, 7}, rng);
  std::uniform_real_distribution<double> pos(-2.0, 8.0);
  for (int i = 0; i < 500; ++i) {
    const double u = pos(rng), v = pos(rng);
    EXPECT_NEAR(bilinear_sample({big.ptr(), 5, 7}, {u, v}), oracle::scalar_bilinear(big, 0, 0, u, v),
                1e-12);
  }
}

TEST(BilinearTest, FarOutsideReadsZeroWithZeroGradient) {
  const double plane[] = {1, 2, 3, 4};
  const PlaneView view{plane, 2, 2};
  EXPECT_EQ(bilinear_sample(view, {-5.5, 0.3}), 0.0);
  const PositionGradient g = bilinear_position_gradient(view, {7.2, 9.9});
  EXPECT_EQ(g.d_u, 0.0);
  EXPECT_EQ(g.d_v, 0.0);
}

TEST(BilinearTest, GradientSuitePasses) {
  GradSuiteOptions opt;
  opt.seed = 42;
  const auto r = run_grad_suite(GradSuiteOp::kBilinear, opt);
  EXPECT_TRUE(r.passed) << r.describe();
}

TEST(KernelGeometryTest, RegularGridIsCenteredAndDistinct) {
  const auto g = KernelGeometry::regular(3, 3, 2);
  ASSERT_EQ(g.num_taps(), 9u);
  EXPECT_EQ(g.taps()[g.center_index()], (TapLocation{0, 0}));
  EXPECT_EQ(g.taps()[0], (TapLocation{-2, -2}));
  EXPECT_EQ(g.taps()[8], (TapLocation{2, 2}));
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = i + 1; j < 9; ++j) EXPECT_FALSE(g.taps()[i] == g.taps()[j]);
  EXPECT_EQ(g.pad_h(), 2);
  EXPECT_THROW(KernelGeometry::regular(2, 3), std::invalid_argument);
}

TEST(KernelGeometryTest, OffsetLayerChannelCounts) {
  const auto k33 = KernelGeometry::regular(3, 3);
  EXPECT_EQ(make_offset_layer(8, k33, DeformVariant::kRestricted).out_channels, 16u);
  EXPECT_EQ(make_offset_layer(8, k33, DeformVariant::kDeformable).out_channels, 18u);
  const auto layer = make_offset_layer(8, KernelGeometry::along_axis(3, Axis::kVertical),
                                       DeformVariant::kFactorized);
  EXPECT_EQ(layer.out_channels, 2u);
  EXPECT_EQ(layer.kernel_h, 3);
  EXPECT_EQ(layer.kernel_w, 1);
  for (double v : layer.weights.data()) EXPECT_EQ(v, 0.0);
  for (double v : layer.bias.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(layer.weights.shape(), (Shape{2, 8, 3, 1}));
}

struct Case {
  Tensor x, w, b;
  KernelGeometry geom;
};

Case random_case(std::mt19937_64& rng, bool one_d) {
  std::uniform_int_distribution<int> small(1, 3), dil(1, 3), odd(0, 2), ext(2, 7);
  KernelGeometry g = KernelGeometry::regular(2 * odd(rng) + 1, 2 * odd(rng) + 1, dil(rng));
  if (one_d) {
    g = KernelGeometry::along_axis(2 * small(rng) + 1, small(rng) % 2 ? Axis::kVertical : Axis::kHorizontal,
                                   dil(rng));
  }
  const auto n = static_cast<std::size_t>(small(rng)), cin = static_cast<std::size_t>(small(rng)),
             cout = static_cast<std::size_t>(small(rng));
  const auto h = static_cast<std::size_t>(ext(rng)), w = static_cast<std::size_t>(ext(rng));
  return {oracle::random_tensor({n, cin, h, w}, rng),
          oracle::random_tensor({cout, cin, static_cast<std::size_t>(g.kernel_h()),
                                 static_cast<std::size_t>(g.kernel_w())},
                                rng),
          oracle::random_tensor({1, cout, 1, 1}, rng), g};
}

TEST(DeformableTest, ZeroOffsetsReproduceConvolution) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    for (DeformVariant v : {DeformVariant::kDeformable, DeformVariant::kRestricted,
                            DeformVariant::kFactorized}) {
      const Case c = random_case(rng, v == DeformVariant::kFactorized);
      const Shape& s = c.x.shape();
      const Tensor off(Shape{s.n, offset_channels(v, c.geom), s.h, s.w});
      const Tensor ref = conv2d(c.x, c.w, c.b, c.geom.conv_options());
      EXPECT_LE(max_diff(deform_conv_forward(v, c.x, c.w, c.b, off, c.geom), ref), 1e-12)
          << variant_name(v) << " trial " << trial;
    }
  }
}

TEST(DeformableTest, MatchesNaiveOracle) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 40; ++trial) {
    const Case c = random_case(rng, false);
    const Shape& s = c.x.shape();
    const int dil = c.geom.dilation();
    const Tensor dc_off = offsets_in({s.n, 2 * c.geom.num_taps(), s.h, s.w}, rng, -2.5, 2.5);
    EXPECT_LE(max_diff(deformable_conv2d(c.x, c.w, c.b, dc_off, c.geom),
                       oracle::deform(oracle::Kind::kDC, c.x, c.w, c.b, dc_off, dil)),
              1e-12);
    const Tensor rdc_off = offsets_in({s.n, 2 * (c.geom.num_taps() - 1), s.h, s.w}, rng, -2.5, 2.5);
    EXPECT_LE(max_diff(restricted_deformable_conv2d(c.x, c.w, c.b, rdc_off, c.geom),
                       oracle::deform(oracle::Kind::kRDC, c.x, c.w, c.b, rdc_off, dil)),
              1e-12);
  }
  for (int trial = 0; trial < 40; ++trial) {
    const Case c = random_case(rng, true);
    const Shape& s = c.x.shape();
    const Axis axis = c.geom.kernel_w() == 1 ? Axis::kVertical : Axis::kHorizontal;
    const Tensor off = offsets_in({s.n, c.geom.num_taps() - 1, s.h, s.w}, rng, -2.5, 2.5);
    EXPECT_LE(max_diff(factorized_rdc_1d(c.x, c.w, c.b, off, axis, c.geom.dilation()),
                       oracle::deform(oracle::Kind::kFRDC, c.x, c.w, c.b, off, c.geom.dilation())),
              1e-12);
  }
}

TEST(DeformableTest, RestrictedEqualsDeformableWithPinnedCenter) {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    const Case c = random_case(rng, false);
    const Shape& s = c.x.shape();
    const std::size_t taps = c.geom.num_taps(), m = c.geom.center_index();
    const Tensor rdc_off = offsets_in({s.n, 2 * (taps - 1), s.h, s.w}, rng, -1.5, 1.5);
    Tensor dc_off(Shape{s.n, 2 * taps, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t t = 0, k = 0; t < taps; ++t) {
        if (t == m) continue;
        for (std::size_t comp = 0; comp < 2; ++comp)
          for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j)
              dc_off.at(n, 2 * t + comp, i, j) = rdc_off.at(n, 2 * k + comp, i, j);
        ++k;
      }
    EXPECT_LE(max_diff(restricted_deformable_conv2d(c.x, c.w, c.b, rdc_off, c.geom),
                       deformable_conv2d(c.x, c.w, c.b, dc_off, c.geom)),
              1e-12);
  }
}

TEST(DeformableTest, ConstantFieldIgnoresInBoundsOffsets) {
  std::mt19937_64 rng(46);
  const double cval = 1.75;
  const Tensor x(Shape{1, 2, 8, 8}, cval);
  const Tensor w = oracle::random_tensor({2, 2, 3, 3}, rng);
  const Tensor b(Shape{1, 2, 1, 1}, {0.5, -0.5});
  const auto g = KernelGeometry::regular(3, 3);
  // Only interior outputs with offsets in (-1, 1) keep every tap inside.
  const Tensor off = offsets_in({1, 18, 8, 8}, rng, -0.99, 0.99);
  const Tensor y = deformable_conv2d(x, w, b, off, g);
  for (std::size_t o = 0; o < 2; ++o) {
    double sw = 0.0;
    for (std::size_t k = 0; k < 18; ++k) sw += w[o * 18 + k];
    for (std::size_t i = 2; i < 6; ++i)
      for (std::size_t j = 2; j < 6; ++j) EXPECT_NEAR(y.at(0, o, i, j), cval * sw + b[o], 1e-12);
  }
}

TEST(DeformableTest, ChannelDuplicationDoublesPreBiasOutput) {
  std::mt19937_64 rng(47);
  const Tensor x = oracle::random_tensor({1, 2, 5, 6}, rng);
  const Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
  const Tensor zero_b(Shape{1, 3, 1, 1});
  Tensor x2(Shape{1, 4, 5, 6}), w2(Shape{3, 4, 3, 3});
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 6; ++j) x2.at(0, c, i, j) = x.at(0, c % 2, i, j);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t k = 0; k < 9; ++k) w2.at(o, c, k / 3, k % 3) = w.at(o, c % 2, k / 3, k % 3);
  const auto g = KernelGeometry::regular(3, 3);
  const Tensor off = offsets_in({1, 16, 5, 6}, rng, -2.0, 2.0);
  const Tensor y = restricted_deformable_conv2d(x, w, zero_b, off, g);
  const Tensor y2 = restricted_deformable_conv2d(x2, w2, zero_b, off, g);
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y2[i], 2.0 * y[i], 1e-12);
}

TEST(DeformableTest, UnitAxisShiftReproducesDilationTwo) {
  std::mt19937_64 rng(48);
  const Tensor x = oracle::random_tensor({1, 2, 9, 9}, rng);
  const Tensor wv = oracle::random_tensor({2, 2, 3, 1}, rng);
  const Tensor b = oracle::random_tensor({1, 2, 1, 1}, rng);
  // Outer taps sit at -1 and +1; shifting them outward by one reaches -2, +2.
  Tensor off(Shape{1, 2, 9, 9});
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) {
      off.at(0, 0, i, j) = -1.0;
      off.at(0, 1, i, j) = 1.0;
    }
  const Tensor y = factorized_rdc_1d(x, wv, b, off, Axis::kVertical, 1);
  const Tensor ref = conv2d(x, wv, b, Conv2dOptions{1, 2, 2, 0});
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 2; i < 7; ++i)
      for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(y.at(0, o, i, j), ref.at(0, o, i, j), 1e-12);
}

TEST(DeformableTest, OffsetLayoutValidation) {
  const Tensor x(Shape{1, 1, 4, 4});
  const Tensor w(Shape{1, 1, 3, 3});
  const Tensor b(Shape{1, 1, 1, 1});
  const auto g = KernelGeometry::regular(3, 3);
  try {
    restricted_deformable_conv2d(x, w, b, Tensor(Shape{1, 18, 4, 4}), g);
    FAIL() << "RDC accepted the DC offset layout";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("variant"), std::string::npos) << e.what();
  }
  try {
    deformable_conv2d(x, w, b, Tensor(Shape{1, 16, 4, 4}), g);
    FAIL() << "DC accepted 16 offset channels";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("18"), std::string::npos) << e.what();
  }
  EXPECT_THROW(deformable_conv2d(x, w, b, Tensor(Shape{1, 18, 3, 4}), g), std::invalid_argument);
  const Tensor w1(Shape{1, 1, 3, 1});
  EXPECT_THROW(factorized_rdc_1d(x, w1, b, Tensor(Shape{1, 4, 4, 4}), Axis::kVertical),
               std::invalid_argument);
  EXPECT_THROW(factorized_rdc_1d(x, w1, b, Tensor(Shape{1, 2, 4, 4}), Axis::kHorizontal),
               std::invalid_argument);
}

TEST(DeformableTest, CenterTapHasNoOffsetGradient) {
  // RDC offsets carry no center channels; an RDC result equals DC whose
  // center offset gradient is simply absent. Check the DC center-offset
  // gradient is generally nonzero so the distinction is meaningful.
  std::mt19937_64 rng(49);
  Tensor x = oracle::random_tensor({1, 1, 5, 5}, rng);
  Tensor w = oracle::random_tensor({1, 1, 3, 3}, rng);
  Tensor b(Shape{1, 1, 1, 1});
  Tensor off = offsets_in({1, 18, 5, 5}, rng, 0.1, 0.9);
  off.enable_grad();
  const auto g = KernelGeometry::regular(3, 3);
  deformable_conv2d_backward(Tensor(Shape{1, 1, 5, 5}, 1.0), x, w, b, off, g);
  double center = 0.0;
  for (std::size_t i = 0; i < 25; ++i) center += std::abs(off.grad()[8 * 25 + i]);
  EXPECT_GT(center, 0.0);
}

TEST(DeformableTest, BackwardIsBitwiseRepeatable) {
  std::mt19937_64 rng(50);
  const Case c = random_case(rng, false);
  const Shape& s = c.x.shape();
  const Tensor off0 = offsets_in({s.n, 2 * (c.geom.num_taps() - 1), s.h, s.w}, rng, -2, 2);
  const Tensor gout = oracle::random_tensor({s.n, c.w.shape().n, s.h, s.w}, rng);
  std::vector<double> first;
  for (int rep = 0; rep < 2; ++rep) {
    Tensor x = c.x, w = c.w, b = c.b, off = off0;
    for (Tensor* t : {&x, &w, &b, &off}) t->enable_grad();
    restricted_deformable_conv2d_backward(gout, x, w, b, off, c.geom);
    std::vector<double> all;
    for (Tensor* t : {&x, &w, &b, &off}) all.insert(all.end(), t->grad().begin(), t->grad().end());
    if (rep == 0) first = all;
    else EXPECT_EQ(all, first);
  }
}

class DeformGradientTest : public ::testing::TestWithParam<GradSuiteOp> {};

TEST_P(DeformGradientTest, SuitePasses) {
  GradSuiteOptions opt;
  opt.seed = 51;
  const auto r = run_grad_suite(GetParam(), opt);
  EXPECT_TRUE(r.passed) << r.describe();
  opt.inject_fault = true;
  EXPECT_FALSE(run_grad_suite(GetParam(), opt).passed);
}

INSTANTIATE_TEST_SUITE_P(Variants, DeformGradientTest,
                         ::testing::Values(GradSuiteOp::kDC, GradSuiteOp::kRDC, GradSuiteOp::kFRDC),
                         [](const auto& info) { return std::string(grad_suite_op_name(info.param)); });

TEST(DeformableTest, SixBySixOffsetGradientsPass) {
  std::mt19937_64 rng(52);
  const auto g = KernelGeometry::regular(3, 3);
  Tensor off = offsets_in({1, 18, 6, 6}, rng, -1.0, 1.0);
  // Keep fractional parts off the lattice.
  for (double& v : off.data()) {
    const double f = v - std::floor(v);
    if (f < 0.05) v += 0.05;
    if (f > 0.95) v -= 0.05;
  }
  DifferentiableOp op{
      [&](std::vector<Tensor>& in) { return deformable_conv2d(in[0], in[1], in[2], in[3], g); },
      [&](const Tensor& gr, std::vector<Tensor>& in) {
        deformable_conv2d_backward(gr, in[0], in[1], in[2], in[3], g);
      }};
  const auto r = finite_difference_check(
      op,
      {oracle::random_tensor({1, 1, 6, 6}, rng), oracle::random_tensor({1, 1, 3, 3}, rng),
       Tensor(Shape{1, 1, 1, 1}, 0.2), off},
      1e-6, 1e-4);
  EXPECT_TRUE(r.passed) << r.describe();
}

}  // namespace
}  // namespace rdcseg
