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

#ifndef RDCSEG_CHECKPOINT_H_
#define RDCSEG_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rdcseg/tensor.h"

namespace rdcseg {

// Tensor file: four little-endian uint32 extents (N, C, H, W) followed by
// N*C*H*W little-endian float32 values. Values are narrowed from double.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline constexpr const char* kCheckpointManifest = "manifest.txt";

// Writes one file per tensor plus manifest.txt with tab-separated lines
// "name  filename  N C H W". Names may not contain whitespace.
void save_checkpoint(const std::filesystem::path& dir,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors);
// Tensors in manifest order. Throws if a file disagrees with its manifest
// shape.
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& dir);

// Little-endian scalar helpers shared by the binary formats.
void write_u32_le(std::ostream& os, std::uint32_t v);
std::uint32_t read_u32_le(std::istream& is);
void write_f32_le(std::ostream& os, float v);
float read_f32_le(std::istream& is);
void write_f64_le(std::ostream& os, double v);
double read_f64_le(std::istream& is);

}  // namespace rdcseg

#endif  // RDCSEG_CHECKPOINT_H_
