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

#ifndef RDCSEG_TOOLS_COMMANDS_H_
#define RDCSEG_TOOLS_COMMANDS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rdcseg/synth.h"

namespace rdcseg::cli {

// Every command returns a process exit status, writes progress to `out` and
// diagnostics to `err`, and never throws.

struct SynthArgs {
  SceneSpec spec;
  std::size_t count = 0;
  std::filesystem::path out;
};
int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

struct WarpArgs {
  std::filesystem::path source;
  std::filesystem::path out;
  std::optional<double> focal;      // fixed mode
  std::optional<double> focal_min;  // random mode
  std::optional<double> focal_max;
  // 0 keeps the source extent.
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint64_t seed = 1;
  int void_class = 255;
};
inline constexpr const char* kManifestName = "manifest.tsv";
int cmd_warp(const WarpArgs& args, std::ostream& out, std::ostream& err);

struct GradcheckArgs {
  std::string op;
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  std::size_t instances = 20;
  bool inject_fault = false;
};
int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err);

struct TrainArgs {
  std::filesystem::path config;
  std::vector<std::filesystem::path> data;  // task i reads data[i]
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;  // overrides the config seed
};
inline constexpr const char* kTrainLogName = "train_log.csv";
inline constexpr const char* kCheckpointName = "checkpoint";
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
  // Exactly one of checkpoint / pred.
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> pred;  // <stem>.pgm predictions
  std::size_t classes = 0;                    // required with pred
  std::filesystem::path data;
  int domain = 0;
  int void_class = 255;
  std::filesystem::path out;
  std::optional<std::filesystem::path> confusion;
};
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

}  // namespace rdcseg::cli

#endif  // RDCSEG_TOOLS_COMMANDS_H_
