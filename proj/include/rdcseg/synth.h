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

#ifndef RDCSEG_SYNTH_H_
#define RDCSEG_SYNTH_H_

#include <cstddef>
#include <cstdint>

#include "rdcseg/fisheye.h"
#include "rdcseg/netpbm.h"

namespace rdcseg {

// Procedural road-like scenes. Class 0 is background; bands, rectangles and
// discs take classes 1, 2 and 3 (folded into [1, num_classes) when fewer
// classes are requested). Colors are a per-class base plus per-shape jitter
// and per-pixel noise, so texture alone does not fully separate classes.
struct SceneSpec {
  Extents extents{64, 64};
  std::size_t num_classes = 4;
  std::size_t bands = 1;
  std::size_t rectangles = 3;
  std::size_t discs = 2;
  int shape_jitter = 40;
  int pixel_noise = 12;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Scene {
  RgbImage image;
  GrayImage labels;
};

// Deterministic in (spec, index).
Scene generate_scene(const SceneSpec& spec, std::size_t index);

}  // namespace rdcseg

#endif  // RDCSEG_SYNTH_H_
