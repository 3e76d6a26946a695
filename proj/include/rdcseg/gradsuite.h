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

#ifndef RDCSEG_GRADSUITE_H_
#define RDCSEG_GRADSUITE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "rdcseg/gradcheck.h"

namespace rdcseg {

// Operators covered by the randomized finite-difference suite.
enum class GradSuiteOp { kBilinear, kDC, kRDC, kFRDC, kConv, kBatchNorm, kCrossEntropy };

// Accepts bilinear, dc, rdc, frdc, conv, bn, ce (case-insensitive).
std::optional<GradSuiteOp> parse_grad_suite_op(std::string_view name);
std::string_view grad_suite_op_name(GradSuiteOp op);

struct GradSuiteOptions {
  std::uint64_t seed = 1;
  std::size_t instances = 20;
  double tolerance = 1e-4;
  double epsilon = 1e-6;
  // Scales every analytic gradient by 1.5 so the suite must fail.
  bool inject_fault = false;
};

// Randomized small instances of `op`. Sample positions are kept at least
// 0.05 pixel away from integer coordinates, where the bilinear sampler is
// not differentiable. Returns the merged report over all instances.
GradientCheckReport run_grad_suite(GradSuiteOp op, const GradSuiteOptions& options);

}  // namespace rdcseg

#endif  // RDCSEG_GRADSUITE_H_
