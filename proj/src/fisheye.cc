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

#include "rdcseg/fisheye.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "rdcseg/checkpoint.h"
#include "rdcseg/tensor.h"

namespace rdcseg {

PixelPoint image_center(Extents e) {
  return {(static_cast<double>(e.width) - 1.0) / 2.0,
          (static_cast<double>(e.height) - 1.0) / 2.0};
}

ProjectionParams ProjectionParams::centered(double focal, Extents target,
                                            Extents source) {
  return {focal, image_center(target), image_center(source)};
}

std::optional<double> radial_map(double r_f, double f) {
  RDC_CHECK(f > 0.0, "radial_map: focal length must be positive, got " << f);
  RDC_CHECK(r_f >= 0.0, "radial_map: radius must be nonnegative, got " << r_f);
  const double theta = r_f / f;
  if (theta >= std::numbers::pi / 2) return std::nullopt;
  return f * std::tan(theta);
}

RemapGrid::RemapGrid(Extents target, Extents source)
    : target_(target),
      source_(source),
      xy_(2 * target.height * target.width, std::numeric_limits<double>::quiet_NaN()) {}

bool RemapGrid::mapped(std::size_t y, std::size_t x) const {
  return !std::isnan(xy_[2 * (y * target_.width + x)]);
}

PixelPoint RemapGrid::at(std::size_t y, std::size_t x) const {
  const std::size_t i = 2 * (y * target_.width + x);
  return {xy_[i], xy_[i + 1]};
}

void RemapGrid::set(std::size_t y, std::size_t x, PixelPoint p) {
  const std::size_t i = 2 * (y * target_.width + x);
  xy_[i] = p.x;
  xy_[i + 1] = p.y;
}

void RemapGrid::set_unmapped(std::size_t y, std::size_t x) {
  set(y, x, {std::numeric_limits<double>::quiet_NaN(),
             std::numeric_limits<double>::quiet_NaN()});
}

std::size_t RemapGrid::mapped_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < xy_.size(); i += 2) n += !std::isnan(xy_[i]);
  return n;
}

bool RemapGrid::operator==(const RemapGrid& other) const {
  if (!(target_ == other.target_) || !(source_ == other.source_)) return false;
  for (std::size_t i = 0; i < xy_.size(); ++i) {
    const bool a = std::isnan(xy_[i]), b = std::isnan(other.xy_[i]);
    if (a != b || (!a && xy_[i] != other.xy_[i])) return false;
  }
  return true;
}

RemapGrid build_remap_grid(const ProjectionParams& params, Extents target,
                           Extents source) {
  RDC_CHECK(target.height > 0 && target.width > 0 && source.height > 0 &&
                source.width > 0,
            "build_remap_grid: extents must be positive");
  RDC_CHECK(params.focal > 0.0, "build_remap_grid: focal length must be positive");
  const PixelPoint uf = params.fisheye_principal;
  const PixelPoint uc = params.conventional_principal;
  RDC_CHECK(uf.x >= 0 && uf.y >= 0 && uf.x <= target.width - 1.0 &&
                uf.y <= target.height - 1.0,
            "build_remap_grid: fisheye principal point outside target image");
  RDC_CHECK(uc.x >= 0 && uc.y >= 0 && uc.x <= source.width - 1.0 &&
                uc.y <= source.height - 1.0,
            "build_remap_grid: conventional principal point outside source image");

  const double max_x = static_cast<double>(source.width) - 1.0;
  const double max_y = static_cast<double>(source.height) - 1.0;
  RemapGrid grid(target, source);
  for (std::size_t yf = 0; yf < target.height; ++yf) {
    for (std::size_t xf = 0; xf < target.width; ++xf) {
      const double dx = static_cast<double>(xf) - uf.x;
      const double dy = static_cast<double>(yf) - uf.y;
      const double r_f = std::hypot(dx, dy);
      const std::optional<double> r_c = radial_map(r_f, params.focal);
      if (!r_c) continue;
      const double phi = std::atan2(dy, dx);
      const double xc = uc.x + *r_c * std::cos(phi);
      const double yc = uc.y + *r_c * std::sin(phi);
      if (xc < 0.0 || yc < 0.0 || xc > max_x || yc > max_y) continue;
      grid.set(yf, xf, {xc, yc});
    }
  }
  return grid;
}

void write_grid(std::ostream& os, const RemapGrid& grid) {
  for (std::size_t e : {grid.target().height, grid.target().width,
                        grid.source().height, grid.source().width}) {
    write_u32_le(os, static_cast<std::uint32_t>(e));
  }
  for (double v : grid.coordinates()) write_f64_le(os, v);
}

RemapGrid read_grid(std::istream& is) {
  Extents target, source;
  target.height = read_u32_le(is);
  target.width = read_u32_le(is);
  source.height = read_u32_le(is);
  source.width = read_u32_le(is);
  RemapGrid grid(target, source);
  for (std::size_t y = 0; y < target.height; ++y) {
    for (std::size_t x = 0; x < target.width; ++x) {
      const double xc = read_f64_le(is);
      const double yc = read_f64_le(is);
      grid.set(y, x, {xc, yc});
    }
  }
  return grid;
}

void save_grid(const std::filesystem::path& path, const RemapGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  RDC_CHECK(os.good(), "cannot write " << path);
  write_grid(os, grid);
}

RemapGrid load_grid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  RDC_CHECK(is.good(), "cannot open " << path);
  return read_grid(is);
}

RgbImage warp_image(const RgbImage& source, const RemapGrid& grid, Rgb fill) {
  RDC_CHECK(source.height == grid.source().height && source.width == grid.source().width,
            "warp_image: image is " << source.height << "x" << source.width
                                    << " but grid expects " << grid.source().height
                                    << "x" << grid.source().width);
  const Extents t = grid.target();
  RgbImage out(t.width, t.height);
  for (std::size_t y = 0; y < t.height; ++y) {
    for (std::size_t x = 0; x < t.width; ++x) {
      std::uint8_t* dst = out.at(y, x);
      if (!grid.mapped(y, x)) {
        std::copy(fill.begin(), fill.end(), dst);
        continue;
      }
      const PixelPoint p = grid.at(y, x);
      const auto x0 = static_cast<std::size_t>(std::floor(p.x));
      const auto y0 = static_cast<std::size_t>(std::floor(p.y));
      const std::size_t x1 = std::min(x0 + 1, source.width - 1);
      const std::size_t y1 = std::min(y0 + 1, source.height - 1);
      const double fx = p.x - static_cast<double>(x0);
      const double fy = p.y - static_cast<double>(y0);
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * source.at(y0, x0)[c] + fx * source.at(y0, x1)[c]) +
                         fy * ((1 - fx) * source.at(y1, x0)[c] + fx * source.at(y1, x1)[c]);
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

GrayImage warp_labels(const GrayImage& source, const RemapGrid& grid,
                      std::uint8_t void_class) {
  RDC_CHECK(source.height == grid.source().height && source.width == grid.source().width,
            "warp_labels: label map is " << source.height << "x" << source.width
                                         << " but grid expects " << grid.source().height
                                         << "x" << grid.source().width);
  const Extents t = grid.target();
  GrayImage out(t.width, t.height, void_class);
  for (std::size_t y = 0; y < t.height; ++y) {
    for (std::size_t x = 0; x < t.width; ++x) {
      if (!grid.mapped(y, x)) continue;
      const PixelPoint p = grid.at(y, x);
      const auto sx = static_cast<std::size_t>(std::lround(p.x));
      const auto sy = static_cast<std::size_t>(std::lround(p.y));
      out.at(y, x) = source.at(sy, sx);
    }
  }
  return out;
}

ZoomAugmentConfig ZoomAugmentConfig::fixed(double focal, Extents output) {
  ZoomAugmentConfig c;
  c.mode = ZoomMode::kFixed;
  c.focal = focal;
  c.output = output;
  return c;
}

ZoomAugmentConfig ZoomAugmentConfig::random(double focal_min, double focal_max,
                                            Extents output) {
  ZoomAugmentConfig c;
  c.mode = ZoomMode::kRandom;
  c.focal_min = focal_min;
  c.focal_max = focal_max;
  c.output = output;
  return c;
}

void ZoomAugmentConfig::validate() const {
  if (mode == ZoomMode::kFixed) {
    RDC_CHECK(focal > 0.0, "zoom augmentation: fixed focal length must be positive");
  } else {
    RDC_CHECK(focal_min > 0.0 && focal_min <= focal_max,
              "zoom augmentation: need 0 < focal_min <= focal_max, got ["
                  << focal_min << ", " << focal_max << "]");
  }
  RDC_CHECK(output.height > 0 && output.width > 0,
            "zoom augmentation: output extents must be positive");
}

double sample_focal(const ZoomAugmentConfig& config, std::mt19937_64& rng) {
  config.validate();
  if (config.mode == ZoomMode::kFixed) return config.focal;
  if (config.focal_min == config.focal_max) return config.focal_min;
  return std::uniform_real_distribution<double>(config.focal_min, config.focal_max)(rng);
}

double default_base_focal(Extents target) {
  RDC_CHECK(target.height > 0 && target.width > 0,
            "default_base_focal: extents must be positive");
  const double r = static_cast<double>(std::min(target.height, target.width)) / 2.0;
  return 2.0 * r / std::numbers::pi;
}

WarpedPair zoom_augment(const RgbImage& image, const GrayImage& labels,
                        const ZoomAugmentConfig& config, std::mt19937_64& rng) {
  RDC_CHECK(image.width == labels.width && image.height == labels.height,
            "zoom_augment: image and label extents differ");
  const double f = sample_focal(config, rng);
  const Extents source{image.height, image.width};
  const RemapGrid grid =
      build_remap_grid(ProjectionParams::centered(f, config.output, source),
                       config.output, source);
  return {warp_image(image, grid, config.fill),
          warp_labels(labels, grid, config.void_class), f};
}

}  // namespace rdcseg
