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

#ifndef RDCSEG_DATASET_H_
#define RDCSEG_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rdcseg/fisheye.h"
#include "rdcseg/metrics.h"
#include "rdcseg/netpbm.h"
#include "rdcseg/network.h"
#include "rdcseg/tensor.h"
#include "rdcseg/training.h"

namespace rdcseg {

struct Sample {
  std::string stem;
  RgbImage image;
  GrayImage labels;
};

// Pairs <stem>.ppm with <stem>.pgm in lexicographic stem order. Unreadable or
// mismatched pairs are skipped with a line on `warn` (when non-null).
std::vector<Sample> load_samples(const std::filesystem::path& dir, std::ostream* warn);

// (value - 127.5) / 63.75 per channel.
Tensor images_to_tensor(const std::vector<const RgbImage*>& images);
LabelMap labels_to_map(const std::vector<const GrayImage*>& labels);
GrayImage label_plane(const LabelMap& map, std::size_t index);

// Draws batches for one task: shuffled passes over the samples, optionally
// re-warped online by zoom augmentation. Each sampler owns its random stream.
class DomainSampler {
 public:
  DomainSampler(const std::vector<Sample>& samples, int domain,
                std::optional<ZoomAugmentConfig> zoom, std::uint64_t seed);

  DomainBatch next(std::size_t batch_size);

 private:
  const std::vector<Sample>& samples_;
  int domain_;
  std::optional<ZoomAugmentConfig> zoom_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Inference-mode predictions for every sample, in order.
std::vector<GrayImage> predict(ToyNet& net, DomainNormBank& bank, int domain,
                               const std::vector<Sample>& samples,
                               std::size_t batch_size = 8);

ConfusionMatrix evaluate(ToyNet& net, DomainNormBank& bank, int domain,
                         const std::vector<Sample>& samples, int void_class,
                         std::size_t batch_size = 8);

}  // namespace rdcseg

#endif  // RDCSEG_DATASET_H_
