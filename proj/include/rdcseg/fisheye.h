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

#ifndef RDCSEG_FISHEYE_H_
#define RDCSEG_FISHEYE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "rdcseg/netpbm.h"

namespace rdcseg {

// Pinhole-to-fisheye zoom augmentation. A target (fisheye) pixel at radius
// r_f from its principal point looks up the source (pinhole) image at
// radius r_c = f * tan(r_f / f) along the same direction.

struct Extents {
  std::size_t height = 0;
  std::size_t width = 0;
  bool operator==(const Extents&) const = default;
};

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};

// Principal point at the center of the pixel grid, ((W-1)/2, (H-1)/2).
PixelPoint image_center(Extents e);

struct ProjectionParams {
  double focal = 0.0;
  PixelPoint fisheye_principal;
  PixelPoint conventional_principal;

  static ProjectionParams centered(double focal, Extents target, Extents source);
};

// f * tan(r_f / f), or nullopt once r_f / f reaches the hemisphere limit
// pi/2. Throws for r_f < 0 or f <= 0.
std::optional<double> radial_map(double r_f, double f);

// Per-target-pixel source coordinates; unmapped pixels hold NaN.
class RemapGrid {
 public:
  RemapGrid() = default;
  RemapGrid(Extents target, Extents source);

  Extents target() const { return target_; }
  Extents source() const { return source_; }
  bool mapped(std::size_t y, std::size_t x) const;
  // Source (x_c, y_c); meaningless when !mapped(y, x).
  PixelPoint at(std::size_t y, std::size_t x) const;
  void set(std::size_t y, std::size_t x, PixelPoint p);
  void set_unmapped(std::size_t y, std::size_t x);
  std::size_t mapped_count() const;

  const std::vector<double>& coordinates() const { return xy_; }
  bool operator==(const RemapGrid& other) const;

 private:
  Extents target_;
  Extents source_;
  std::vector<double> xy_;  // interleaved (x_c, y_c)
};

// Pixels beyond the hemisphere limit or landing outside
// [0, W-1] x [0, H-1] of the source are unmapped.
RemapGrid build_remap_grid(const ProjectionParams& params, Extents target,
                           Extents source);

// Cache file: uint32 LE target H, target W, source H, source W, then
// interleaved float64 LE (x_c, y_c) per target pixel, NaN when unmapped.
void write_grid(std::ostream& os, const RemapGrid& grid);
RemapGrid read_grid(std::istream& is);
void save_grid(const std::filesystem::path& path, const RemapGrid& grid);
RemapGrid load_grid(const std::filesystem::path& path);

using Rgb = std::array<std::uint8_t, 3>;

// Bilinear resampling; unmapped pixels receive `fill`.
RgbImage warp_image(const RgbImage& source, const RemapGrid& grid,
                    Rgb fill = {0, 0, 0});
// Nearest-neighbor resampling; unmapped pixels receive `void_class`.
GrayImage warp_labels(const GrayImage& source, const RemapGrid& grid,
                      std::uint8_t void_class);

enum class ZoomMode { kFixed, kRandom };

struct ZoomAugmentConfig {
  ZoomMode mode = ZoomMode::kFixed;
  double focal = 0.0;      // fixed mode
  double focal_min = 0.0;  // random mode
  double focal_max = 0.0;
  Extents output;
  Rgb fill = {0, 0, 0};
  std::uint8_t void_class = 255;

  static ZoomAugmentConfig fixed(double focal, Extents output);
  static ZoomAugmentConfig random(double focal_min, double focal_max, Extents output);
  void validate() const;
};

// Uniform draw in [focal_min, focal_max] for random mode; the fixed value
// otherwise (rng untouched).
double sample_focal(const ZoomAugmentConfig& config, std::mt19937_64& rng);

// f0 = 2R / pi with R the distance from the centered principal point to the
// nearest border, so the border sits at incidence angle pi/2.
double default_base_focal(Extents target);

struct WarpedPair {
  RgbImage image;
  GrayImage labels;
  double focal;
};

// Warps an image/label pair with one grid built from a sampled focal length
// and centered principal points.
WarpedPair zoom_augment(const RgbImage& image, const GrayImage& labels,
                        const ZoomAugmentConfig& config, std::mt19937_64& rng);

}  // namespace rdcseg

#endif  // RDCSEG_FISHEYE_H_
