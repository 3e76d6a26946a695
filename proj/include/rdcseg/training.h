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

#ifndef RDCSEG_TRAINING_H_
#define RDCSEG_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdcseg/fisheye.h"
#include "rdcseg/network.h"
#include "rdcseg/tensor.h"

namespace rdcseg {

// Task weighting over one real-domain task (index 0) and K transformed-domain
// tasks (1..K):
//   main  = (1 - alpha) L0 + alpha / K * sum_i Li
//   aux   = (1 - beta)  A0 + beta  / K * sum_i Ai
//   total = main + gamma * aux
// K = 0 is single-task training: total = L0 + gamma * A0.
struct LossWeights {
  double alpha = 0.5;
  double beta = 0.5;
  double gamma = 0.0;
  int num_aux_tasks = 2;  // K

  void validate() const;
};

double hlw_total_loss(std::span<const double> main_losses,
                      std::span<const double> aux_losses, const LossWeights& w);

// d(total)/d(L_i) and d(total)/d(A_i) (the latter includes gamma).
struct HlwCoefficients {
  std::vector<double> main;
  std::vector<double> aux;
};
HlwCoefficients hlw_coefficients(const LossWeights& w);

enum class TrainingPhase { kEncoder, kJoint };

struct Schedule {
  double base_lr = 0.05;
  double power = 0.9;
  int max_iter = 1000;
  // Offset layers keep their initial values for the first iterations.
  int offset_freeze_iters = 0;
  double offset_lr_multiplier_encoder = 1.0;
  double offset_lr_multiplier_joint = 0.1;
  TrainingPhase phase = TrainingPhase::kEncoder;
  double momentum = 0.9;
  double weight_decay = 2e-4;
  std::size_t batch_per_domain = 4;
  double loss_scale = 2.0;

  void validate() const;
  // 20/120 of max_iter, the warm-up share of the encoder phase.
  static int default_freeze_iters(int max_iter);
  double offset_multiplier(int iter) const;
};

// base_lr * (1 - iter / max_iter)^power; 0 past max_iter.
double poly_lr(int iter, const Schedule& schedule);

// Nesterov step:
//   g = grad + weight_decay * param
//   v = momentum * v - lr * lr_multiplier * g
//   param += momentum * v - lr * lr_multiplier * g
// lr_multiplier == 0 freezes the parameter and its velocity.
void nag_step(std::span<double> param, std::span<const double> grad,
              std::span<double> velocity, double lr, double momentum,
              double weight_decay, double lr_multiplier);

struct DomainBatch {
  int domain = 0;
  Tensor images;
  LabelMap labels;
};

struct StepResult {
  int iter = 0;
  double lr = 0.0;
  std::vector<double> main_losses;
  std::vector<double> aux_losses;
  double total = 0.0;
};

class Trainer {
 public:
  Trainer(ToyNet& net, DomainNormBank& bank, LossWeights weights, Schedule schedule,
          int void_class);

  // batches[i] feeds task i (0 = real domain). One forward per task with
  // that task's domain statistics, gradients of the weighted total summed
  // over tasks, then one optimizer update at poly_lr(iter).
  StepResult step(std::span<const DomainBatch> batches, int iter);

  const LossWeights& weights() const { return weights_; }
  const Schedule& schedule() const { return schedule_; }

 private:
  ToyNet& net_;
  DomainNormBank& bank_;
  LossWeights weights_;
  Schedule schedule_;
  int void_class_;
};

// CSV training log: iter, lr, L0..LK, A0..AK, total.
void write_log_header(std::ostream& os, int num_aux_tasks);
void write_log_row(std::ostream& os, const StepResult& r);

// ---------------------------------------------------------------------------
// Line-oriented key=value training configuration. '#' starts a comment.

struct DomainAugment {
  std::optional<ZoomAugmentConfig> zoom;  // nullopt: images used as-is
};

struct TrainConfig {
  std::uint64_t seed = 1;
  int void_class = 255;
  Schedule schedule;
  LossWeights weights;
  ToyNetConfig net;
  // zoom.<i>: per-task online augmentation, keyed by task index.
  std::vector<DomainAugment> augment;
  // Zoom output extents; 0 means "same as the source image".
  std::size_t zoom_height = 0;
  std::size_t zoom_width = 0;
};

// Every recognized key with a one-line description, for --help output and
// the README.
std::string train_config_reference();

// Throws std::invalid_argument naming the offending key.
TrainConfig parse_train_config(std::istream& is);
TrainConfig load_train_config(const std::filesystem::path& path);
void write_train_config(std::ostream& os, const TrainConfig& config);

std::string format_blocks(const std::vector<BlockSpec>& blocks);
std::vector<BlockSpec> parse_blocks(const std::string& text);

// ---------------------------------------------------------------------------
// Model persistence: parameters as a tensor checkpoint, one statistics file
// per domain (domain_<id>.stats: per normalization layer, mean then variance
// tensors in the checkpoint tensor format), and the config that rebuilds the
// network.

void save_model(const std::filesystem::path& dir, const ToyNet& net,
                const DomainNormBank& bank, const TrainConfig& config);

struct LoadedModel {
  TrainConfig config;
  ToyNet net;
  DomainNormBank bank;
};
LoadedModel load_model(const std::filesystem::path& dir);

void write_domain_stats(std::ostream& os, const std::vector<NormStatistics>& stats);
std::vector<NormStatistics> read_domain_stats(std::istream& is,
                                              const std::vector<std::size_t>& layout);

}  // namespace rdcseg

#endif  // RDCSEG_TRAINING_H_
