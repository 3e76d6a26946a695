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

#include "rdcseg/synth.h"

#include <algorithm>
#include <array>
#include <random>

#include "rdcseg/tensor.h"

namespace rdcseg {
namespace {

constexpr std::array<std::array<int, 3>, 8> kPalette = {{
    {90, 150, 90},    // background: vegetation
    {110, 110, 120},  // band: road
    {170, 80, 60},    // rectangle: building
    {70, 90, 190},    // disc: sign
    {200, 190, 70},
    {60, 170, 170},
    {180, 70, 170},
    {140, 140, 40},
}};

std::size_t fold_class(std::size_t kind, std::size_t classes) {
  if (classes <= 1) return 0;
  return 1 + (kind - 1) % (classes - 1);
}

class Painter {
 public:
  Painter(Scene& scene, const SceneSpec& spec, std::mt19937_64& rng)
      : scene_(scene), spec_(spec), rng_(rng) {}

  std::array<int, 3> shape_color(std::size_t cls) {
    std::uniform_int_distribution<int> jitter(-spec_.shape_jitter, spec_.shape_jitter);
    std::array<int, 3> c = kPalette[cls % kPalette.size()];
    for (int& v : c) v += jitter(rng_);
    return c;
  }

  template <typename Inside>
  void paint(std::size_t cls, Inside inside) {
    const std::array<int, 3> color = shape_color(cls);
    for (std::size_t y = 0; y < scene_.image.height; ++y) {
      for (std::size_t x = 0; x < scene_.image.width; ++x) {
        if (!inside(static_cast<double>(y), static_cast<double>(x))) continue;
        scene_.labels.at(y, x) = static_cast<std::uint8_t>(cls);
        std::uint8_t* px = scene_.image.at(y, x);
        for (int ch = 0; ch < 3; ++ch) px[ch] = static_cast<std::uint8_t>(std::clamp(color[ch], 0, 255));
      }
    }
  }

 private:
  Scene& scene_;
  const SceneSpec& spec_;
  std::mt19937_64& rng_;
};

}  // namespace

void SceneSpec::validate() const {
  RDC_CHECK(extents.height > 0 && extents.width > 0, "scene extents must be positive");
  RDC_CHECK(num_classes >= 2 && num_classes <= 255,
            "scene class count must lie in [2, 255], got " << num_classes);
  RDC_CHECK(shape_jitter >= 0 && pixel_noise >= 0, "scene noise levels must be nonnegative");
}

Scene generate_scene(const SceneSpec& spec, std::size_t index) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  const std::size_t h = spec.extents.height;
  const std::size_t w = spec.extents.width;
  Scene scene{RgbImage(w, h), GrayImage(w, h)};
  Painter painter(scene, spec, rng);
  painter.paint(0, [](double, double) { return true; });

  const double hd = static_cast<double>(h);
  const double wd = static_cast<double>(w);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < spec.bands; ++i) {
    // Slanted horizontal band in the lower half.
    const double top = hd * (0.5 + 0.3 * unit(rng));
    const double thick = hd * (0.12 + 0.2 * unit(rng));
    const double slope = (unit(rng) - 0.5) * 0.6;
    painter.paint(fold_class(1, spec.num_classes), [=](double y, double x) {
      const double t = top + slope * (x - wd / 2);
      return y >= t && y < t + thick;
    });
  }
  for (std::size_t i = 0; i < spec.rectangles; ++i) {
    const double rh = hd * (0.15 + 0.3 * unit(rng));
    const double rw = wd * (0.1 + 0.25 * unit(rng));
    const double y0 = (hd - rh) * unit(rng);
    const double x0 = (wd - rw) * unit(rng);
    painter.paint(fold_class(2, spec.num_classes), [=](double y, double x) {
      return y >= y0 && y < y0 + rh && x >= x0 && x < x0 + rw;
    });
  }
  for (std::size_t i = 0; i < spec.discs; ++i) {
    const double r = std::min(hd, wd) * (0.06 + 0.12 * unit(rng));
    const double cy = hd * unit(rng);
    const double cx = wd * unit(rng);
    painter.paint(fold_class(3, spec.num_classes), [=](double y, double x) {
      return (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
    });
  }

  std::uniform_int_distribution<int> noise(-spec.pixel_noise, spec.pixel_noise);
  for (std::uint8_t& v : scene.image.pixels) v = static_cast<std::uint8_t>(std::clamp(v + noise(rng), 0, 255));
  return scene;
}

}  // namespace rdcseg
