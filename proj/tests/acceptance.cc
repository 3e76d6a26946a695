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

// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
// Optional arguments select criteria by name.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.h"
#include "metric_cases.h"
#include "oracles.h"
#include "rdcseg/dataset.h"
#include "rdcseg/deformable.h"
#include "rdcseg/fisheye.h"
#include "rdcseg/gradsuite.h"
#include "rdcseg/metrics.h"
#include "rdcseg/synth.h"
#include "rdcseg/training.h"

namespace rdcseg {
namespace {

namespace fs = std::filesystem;

constexpr double kIdentityTol = 1e-12;
constexpr int kIdentityInstances = 100;  // per variant
constexpr double kIdentityBudgetSec = 60.0;
constexpr double kGradTol = 1e-4;
constexpr std::size_t kGradInstances = 20;
constexpr double kGradBudgetSec = 300.0;
constexpr double kOracleTol = 1e-12;
constexpr int kOracleInstances = 200;
constexpr double kQuarterPiRelTol = 1e-9;
constexpr double kSmallAngleRel = 1e-4;
constexpr double kGridTolPx = 1e-9;
constexpr int kGridPixels = 1000;
constexpr int kClosureMaps = 100;
constexpr int kAdaBnIters = 500;
constexpr double kAdaBnRelTol = 0.10;
constexpr std::size_t kToyScenes = 500;
constexpr std::size_t kToyTrain = 400;
constexpr int kToyIters = 2000;
constexpr double kToyMarginPoints = 0.5;
constexpr double kToyMinOffset = 0.05;
constexpr double kToyBudgetSec = 1800.0;
constexpr int kPipelineIters = 50;

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double max_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Offsets with fractional parts kept away from the lattice.
Tensor random_offsets(Shape s, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> whole(-2, 2);
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  Tensor t(s);
  for (double& v : t.data()) v = whole(rng) + frac(rng);
  return t;
}

Outcome operator_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> small(1, 3), odd(0, 2), ext(1, 8);
  double worst = 0.0;
  int count = 0;
  for (DeformVariant v :
       {DeformVariant::kDeformable, DeformVariant::kRestricted, DeformVariant::kFactorized}) {
    for (int i = 0; i < kIdentityInstances; ++i) {
      const int dil = small(rng);
      const KernelGeometry g =
          v == DeformVariant::kFactorized
              ? KernelGeometry::along_axis(2 * small(rng) + 1,
                                           small(rng) % 2 ? Axis::kVertical : Axis::kHorizontal, dil)
              : KernelGeometry::regular(2 * odd(rng) + 1, 2 * odd(rng) + 1, dil);
      const Shape xs{std::size_t(small(rng)), std::size_t(small(rng)), std::size_t(ext(rng)),
                     std::size_t(ext(rng))};
      const Tensor x = oracle::random_tensor(xs, rng);
      const Tensor w = oracle::random_tensor(
          {std::size_t(small(rng)), xs.c, std::size_t(g.kernel_h()), std::size_t(g.kernel_w())}, rng);
      const Tensor b = oracle::random_tensor({1, w.shape().n, 1, 1}, rng);
      const Tensor off(Shape{xs.n, offset_channels(v, g), xs.h, xs.w});
      worst = std::max(worst, max_diff(deform_conv_forward(v, x, w, b, off, g),
                                       conv2d(x, w, b, g.conv_options())));
      ++count;
    }
  }
  const double sec = seconds_since(t0);
  return {worst <= kIdentityTol && sec < kIdentityBudgetSec,
          std::to_string(count) + " instances, max |diff| " + fmt("%.3g", worst) + " (tol " +
              fmt("%.0e", kIdentityTol) + "), " + fmt("%.2f", sec) + " s (budget " +
              fmt("%.0f", kIdentityBudgetSec) + " s)"};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (GradSuiteOp op : {GradSuiteOp::kBilinear, GradSuiteOp::kDC, GradSuiteOp::kRDC,
                         GradSuiteOp::kFRDC, GradSuiteOp::kConv, GradSuiteOp::kBatchNorm,
                         GradSuiteOp::kCrossEntropy}) {
    GradSuiteOptions o;
    o.instances = kGradInstances;
    o.tolerance = kGradTol;
    o.seed = 202;
    const GradientCheckReport r = run_grad_suite(op, o);
    ok = ok && r.passed;
    detail += std::string(grad_suite_op_name(op)) + " " + fmt("%.2g", r.max_rel_error) + "; ";
  }
  const double sec = seconds_since(t0);
  return {ok && sec < kGradBudgetSec,
          std::to_string(kGradInstances) + " instances/op, max rel error: " + detail + "tol " +
              fmt("%.0e", kGradTol) + ", " + fmt("%.1f", sec) + " s (budget " +
              fmt("%.0f", kGradBudgetSec) + " s)"};
}

Outcome rdc_oracle() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> bn(1, 2), bc(1, 4), bext(1, 8), odd(0, 1), dil(1, 2);
  double worst = 0.0;
  bool hit_max = false;
  for (int i = 0; i < kOracleInstances; ++i) {
    // The last instances pin the largest extents.
    const bool largest = i >= kOracleInstances - 10;
    const Shape xs = largest ? Shape{2, 4, 8, 8}
                             : Shape{std::size_t(bn(rng)), std::size_t(bc(rng)),
                                     std::size_t(bext(rng)), std::size_t(bext(rng))};
    hit_max = hit_max || largest;
    const KernelGeometry g = KernelGeometry::regular(2 * odd(rng) + 1 + 2 * largest,
                                                     2 * odd(rng) + 1 + 2 * largest, dil(rng));
    if (g.num_taps() < 2) continue;
    const Tensor x = oracle::random_tensor(xs, rng);
    const Tensor w = oracle::random_tensor(
        {std::size_t(bc(rng)), xs.c, std::size_t(g.kernel_h()), std::size_t(g.kernel_w())}, rng);
    const Tensor b = oracle::random_tensor({1, w.shape().n, 1, 1}, rng);
    const Tensor off = random_offsets({xs.n, offset_channels(DeformVariant::kRestricted, g), xs.h, xs.w}, rng);
    worst = std::max(worst, max_diff(restricted_deformable_conv2d(x, w, b, off, g),
                                     oracle::deform(oracle::Kind::kRDC, x, w, b, off, g.dilation())));
  }
  return {worst <= kOracleTol && hit_max,
          std::to_string(kOracleInstances) + " instances up to 2x4x8x8, max |diff| " +
              fmt("%.3g", worst) + " (tol " + fmt("%.0e", kOracleTol) + ")"};
}

Outcome geometry_fixpoints() {
  bool ok = true;
  std::string detail;
  for (double f : {12.5, 159.0, 800.0}) {
    ok = ok && radial_map(0.0, f).value() == 0.0;
    const double q = radial_map(f * std::numbers::pi / 4, f).value();
    ok = ok && std::abs(q - f) <= kQuarterPiRelTol * f;
    for (int i = 1; i <= 1000; ++i) {
      const double r = 0.01 * f * i / 1000.0;
      ok = ok && std::abs(radial_map(r, f).value() - r) <= kSmallAngleRel * r;
    }
  }
  detail += "r(0)=0, r(f*pi/4)=f, small-angle bound: " + std::string(ok ? "hold" : "violated");

  const Extents target{576, 640}, source{512, 1024};
  const RemapGrid g = build_remap_grid(ProjectionParams::centered(159.0, target, source), target, source);
  const PixelPoint ct = image_center(target), cs = image_center(source);
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<std::size_t> ry(0, target.height - 1), rx(0, target.width - 1);
  double worst = 0.0;
  int mismatched = 0, mapped = 0;
  for (int i = 0; i < kGridPixels; ++i) {
    const std::size_t y = ry(rng), x = rx(rng);
    const auto o = oracle::fisheye_source(double(x), double(y), 159.0, ct.x, ct.y, cs.x, cs.y,
                                          double(source.width), double(source.height));
    if (o.valid != g.mapped(y, x)) {
      ++mismatched;
      continue;
    }
    if (!o.valid) continue;
    ++mapped;
    worst = std::max({worst, std::abs(g.at(y, x).x - o.x), std::abs(g.at(y, x).y - o.y)});
  }
  ok = ok && mismatched == 0 && worst <= kGridTolPx;
  detail += "; f=159 576x640<-512x1024 grid: " + std::to_string(kGridPixels) + " pixels (" +
            std::to_string(mapped) + " mapped, " + std::to_string(mismatched) +
            " validity mismatches), max |diff| " + fmt("%.3g", worst) + " px (tol " +
            fmt("%.0e", kGridTolPx) + ")";
  return {ok, detail};
}

Outcome label_closure() {
  SceneSpec spec;
  spec.extents = {512, 1024};
  spec.num_classes = 4;
  spec.seed = 505;
  const auto cfg = ZoomAugmentConfig::random(200.0, 800.0, spec.extents);
  std::mt19937_64 rng(505);
  int violations = 0;
  std::size_t voids = 0;
  double fmin = 1e9, fmax = 0.0;
  for (int i = 0; i < kClosureMaps; ++i) {
    const Scene s = generate_scene(spec, static_cast<std::size_t>(i));
    const WarpedPair p = zoom_augment(s.image, s.labels, cfg, rng);
    fmin = std::min(fmin, p.focal);
    fmax = std::max(fmax, p.focal);
    const std::set<int> in(s.labels.pixels.begin(), s.labels.pixels.end());
    for (std::uint8_t v : p.labels.pixels) {
      if (v == cfg.void_class) {
        ++voids;
      } else if (!in.count(v)) {
        ++violations;
      }
    }
  }
  return {violations == 0,
          std::to_string(kClosureMaps) + " warped 512x1024 maps, focal drawn in [" +
              fmt("%.1f", fmin) + ", " + fmt("%.1f", fmax) + "], " + std::to_string(violations) +
              " labels outside input set, " + std::to_string(voids) + " void pixels"};
}

Outcome hlw_arithmetic() {
  struct Row {
    double alpha, beta, gamma;
    long num, den;  // exact total for unit losses
  };
  const Row rows[] = {{0.5, 0.5, 0.0, 1, 1}, {0.5, 0.5, 0.3, 13, 10}, {1.0 / 3.0, 0.5, 0.3, 13, 10}};
  const std::vector<double> ones(3, 1.0);
  bool ok = true;
  std::string detail;
  for (const Row& r : rows) {
    const double got = hlw_total_loss(ones, ones, {r.alpha, r.beta, r.gamma, 2});
    const double hand = ((1.0 - r.alpha) * 1.0 + r.alpha / 2.0 * (1.0 + 1.0)) +
                        r.gamma * ((1.0 - r.beta) * 1.0 + r.beta / 2.0 * (1.0 + 1.0));
    const double exact = static_cast<double>(r.num) / static_cast<double>(r.den);
    const bool row_ok = got == hand && got == exact;
    ok = ok && row_ok;
    detail += fmt("a=%.4g ", r.alpha) + fmt("b=%.4g ", r.beta) + fmt("g=%.4g -> ", r.gamma) +
              fmt("%.17g", got) + (row_ok ? "" : " (expected " + fmt("%.17g", exact) + ")") + "; ";
  }
  return {ok, detail + "K=2, unit losses, compared with =="};
}

std::vector<double> first_layer_means(const DomainNormBank& bank, int domain) {
  return bank.domain(domain)[0].mean;
}

Outcome adabn_isolation() {
  ToyNetConfig cfg;
  cfg.in_channels = 3;
  cfg.blocks = {BlockSpec::downsampler(8), BlockSpec::residual(ConvVariant::kRegular, 1)};
  cfg.domain_classes = {4, 4, 4};
  cfg.aux_channels = 8;
  cfg.init_seed = 606;
  ToyNet net(cfg);
  DomainNormBank bank = net.make_bank();
  const std::vector<NormStatistics> third = bank.domain(2);

  SceneSpec spec;
  spec.extents = {32, 32};
  spec.seed = 606;
  std::vector<Sample> a, b;
  for (std::size_t i = 0; i < 64; ++i) {
    Scene s = generate_scene(spec, i);
    (i % 2 ? b : a).push_back({"s" + std::to_string(i), std::move(s.image), std::move(s.labels)});
  }
  // Injected per-channel shift in normalized input units.
  const double shift[3] = {0.9, -0.6, 0.4};
  DomainSampler sa(a, 0, std::nullopt, 1), sb(b, 1, std::nullopt, 2);
  Schedule sched;
  sched.max_iter = kAdaBnIters;
  sched.offset_freeze_iters = 0;
  Trainer trainer(net, bank, {0.5, 0.5, 0.0, 1}, sched, 255);
  for (int it = 0; it < kAdaBnIters; ++it) {
    std::vector<DomainBatch> batches = {sa.next(4), sb.next(4)};
    Tensor& x = batches[1].images;
    for (std::size_t n = 0; n < x.shape().n; ++n)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < x.shape().h; ++y)
          for (std::size_t xx = 0; xx < x.shape().w; ++xx) x.at(n, c, y, xx) += shift[c];
    trainer.step(batches, it);
  }
  const bool untouched = bank.domain(2) == third;

  // The first normalization layer follows the first convolution, so a
  // constant input shift moves its mean by the convolution of the shift
  // field (bias excluded) under the final weights.
  Parameter* w = net.find_parameter("block0.conv.weight");
  Tensor field(Shape{1, 3, spec.extents.height, spec.extents.width});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < field.shape().h; ++y)
      for (std::size_t xx = 0; xx < field.shape().w; ++xx) field.at(0, c, y, xx) = shift[c];
  const Tensor zero_bias(Shape{1, w->value.shape().n, 1, 1});
  const Tensor moved = conv2d(field, w->value, zero_bias, Conv2dOptions::with_padding(1, 2));
  const std::size_t plane = moved.shape().h * moved.shape().w;
  const auto m0 = first_layer_means(bank, 0), m1 = first_layer_means(bank, 1);
  double err2 = 0.0, exp2 = 0.0;
  for (std::size_t o = 0; o < m0.size(); ++o) {
    double expected = 0.0;
    for (std::size_t p = 0; p < plane; ++p) expected += moved[o * plane + p];
    expected /= static_cast<double>(plane);
    err2 += (m1[o] - m0[o] - expected) * (m1[o] - m0[o] - expected);
    exp2 += expected * expected;
  }
  const double rel = std::sqrt(err2 / exp2);
  return {untouched && rel <= kAdaBnRelTol,
          std::to_string(kAdaBnIters) + " iterations on domains 0/1; domain 2 statistics " +
              (untouched ? "bitwise unchanged" : "CHANGED") +
              "; first-layer mean gap vs injected shift: relative error " + fmt("%.3g", rel) +
              " (tol " + fmt("%.2f", kAdaBnRelTol) + ")"};
}

struct ToyResult {
  double miou;
  double offset;
  double seconds;
};

ToyResult toy_train(ConvVariant variant, const std::vector<Sample>& train,
                    const std::vector<Sample>& val) {
  const auto t0 = Clock::now();
  ToyNetConfig cfg;
  cfg.in_channels = 3;
  cfg.blocks = {BlockSpec::downsampler(16), BlockSpec::residual(variant, 1),
                BlockSpec::downsampler(24), BlockSpec::residual(variant, 2)};
  cfg.domain_classes = {4};
  cfg.aux_channels = 16;
  cfg.init_seed = 707;
  ToyNet net(cfg);
  DomainNormBank bank = net.make_bank();
  Schedule sched;
  sched.max_iter = kToyIters;
  sched.offset_freeze_iters = Schedule::default_freeze_iters(kToyIters);
  sched.batch_per_domain = 4;
  Trainer trainer(net, bank, {0.5, 0.5, 0.3, 0}, sched, 255);
  DomainSampler sampler(train, 0, std::nullopt, 708);
  for (int it = 0; it < kToyIters; ++it) {
    const std::vector<DomainBatch> batch = {sampler.next(sched.batch_per_domain)};
    trainer.step(batch, it);
  }
  const double miou = mean_iou(evaluate(net, bank, 0, val, 255));
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < val.size(); i += 8) {
    std::vector<const RgbImage*> imgs;
    for (std::size_t j = i; j < std::min(val.size(), i + 8); ++j) imgs.push_back(&val[j].image);
    net.forward(images_to_tensor(imgs), 0, bank, NormMode::kInference);
    for (const Tensor* t : net.last_offsets()) {
      for (double v : t->data()) sum += std::abs(v);
      count += t->numel();
    }
  }
  return {miou, count ? sum / static_cast<double>(count) : 0.0, seconds_since(t0)};
}

Outcome toy_experiment() {
  const auto t0 = Clock::now();
  SceneSpec spec;
  spec.extents = {64, 64};
  spec.seed = 707;
  // Focal range [200, 800] at 1024 px wide, scaled to the scene width.
  const double scale = static_cast<double>(spec.extents.width) / 1024.0;
  const auto zoom = ZoomAugmentConfig::random(200.0 * scale, 800.0 * scale, spec.extents);
  std::mt19937_64 rng(707);
  std::vector<Sample> train, val;
  for (std::size_t i = 0; i < kToyScenes; ++i) {
    const Scene s = generate_scene(spec, i);
    WarpedPair p = zoom_augment(s.image, s.labels, zoom, rng);
    (i < kToyTrain ? train : val)
        .push_back({"s" + std::to_string(i), std::move(p.image), std::move(p.labels)});
  }
  const ToyResult reg = toy_train(ConvVariant::kRegular, train, val);
  const ToyResult rdc = toy_train(ConvVariant::kRDC, train, val);
  const double sec = seconds_since(t0);
  const double gap = 100.0 * (rdc.miou - reg.miou);
  const bool ok = gap >= -kToyMarginPoints && rdc.offset > kToyMinOffset && sec <= kToyBudgetSec;
  return {ok, "regular mIoU " + fmt("%.2f", 100 * reg.miou) + ", RDC mIoU " +
                  fmt("%.2f", 100 * rdc.miou) + " (" + fmt("%+.2f", gap) + " points, margin -" +
                  fmt("%.1f", kToyMarginPoints) + "; " + (gap > 0 ? "improved" : "no improvement") +
                  "); mean |offset| " + fmt("%.3f", rdc.offset) + " px (min " +
                  fmt("%.2f", kToyMinOffset) + "); " + fmt("%.0f", sec) + " s (budget " +
                  fmt("%.0f", kToyBudgetSec) + " s)"};
}

Outcome metric_oracle() {
  bool ok = true;
  int n = 0;
  for (const auto& c : cases::metric_cases()) {
    ConfusionMatrix cm(c.classes, cases::kVoid);
    cm.accumulate(c.pred, c.truth);
    for (std::size_t t = 0; t < c.classes; ++t)
      for (std::size_t p = 0; p < c.classes; ++p) ok = ok && cm.count(t, p) == c.counts[t][p];
    ok = ok && per_class_iou(cm) == c.iou && mean_iou(cm) == c.miou;
    ++n;
  }
  return {ok, std::to_string(n) + " hand-counted 4x4 cases, exact equality"};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    files[fs::relative(e.path(), root).string()] = os.str();
  }
  return files;
}

bool run_pipeline(const fs::path& root, std::string& log) {
  fs::remove_all(root);
  fs::create_directories(root);
  std::ostringstream out, err;
  cli::SynthArgs s;
  s.spec.extents = {32, 32};
  s.spec.seed = 808;
  s.count = 12;
  s.out = root / "real";
  cli::WarpArgs w;
  w.source = s.out;
  w.out = root / "fisheye";
  w.focal_min = 6.25;
  w.focal_max = 25.0;
  w.seed = 808;
  {
    std::ofstream cfg(root / "train.cfg");
    cfg << "seed=808\nmax_iter=" << kPipelineIters
        << "\nnum_aux_tasks=1\nbatch_per_domain=2\nblocks=down:8,res:rdc:1\naux_channels=8\n"
           "classes=4\ngamma=0.3\nzoom.0=random:6.25:25\n";
  }
  cli::TrainArgs t;
  t.config = root / "train.cfg";
  t.data = {s.out, w.out};
  t.out = root / "run";
  cli::EvalArgs e;
  e.checkpoint = root / "run" / cli::kCheckpointName;
  e.data = w.out;
  e.domain = 1;
  e.out = root / "eval" / "metrics.csv";
  e.confusion = root / "eval" / "confusion.csv";
  const bool ok = cli::cmd_synth(s, out, err) == 0 && cli::cmd_warp(w, out, err) == 0 &&
                  cli::cmd_train(t, out, err) == 0 && cli::cmd_eval(e, out, err) == 0;
  log = out.str() + err.str();
  return ok;
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "rdcseg_acceptance_determinism";
  std::string log_a, log_b;
  const bool ran = run_pipeline(base / "a", log_a) && run_pipeline(base / "b", log_b);
  if (!ran) return {false, "pipeline failed: " + log_a + log_b};
  const auto a = snapshot(base / "a"), b = snapshot(base / "b");
  std::size_t bytes = 0;
  for (const auto& [name, content] : a) bytes += content.size();
  // Progress output names the run directory; compare it with that removed.
  const auto strip = [](std::string s, const std::string& dir) {
    for (std::size_t p; (p = s.find(dir)) != std::string::npos;) s.erase(p, dir.size());
    return s;
  };
  const bool same = a == b && strip(log_a, (base / "a").string()) == strip(log_b, (base / "b").string());
  fs::remove_all(base);
  return {same, "synth -> warp -> train(" + std::to_string(kPipelineIters) +
                    " iters) -> eval run twice: " + std::to_string(a.size()) + " files, " +
                    std::to_string(bytes) + " bytes, " + (same ? "bitwise identical" : "DIFFER")};
}

}  // namespace
}  // namespace rdcseg

int main(int argc, char** argv) {
  using namespace rdcseg;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"operator-identity", operator_identity},
      {"gradient-suite", gradient_suite},
      {"rdc-oracle", rdc_oracle},
      {"geometry-fixpoints", geometry_fixpoints},
      {"label-closure", label_closure},
      {"hlw-arithmetic", hlw_arithmetic},
      {"adabn-isolation", adabn_isolation},
      {"toy-distortion", toy_experiment},
      {"metric-oracle", metric_oracle},
      {"determinism", determinism},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
