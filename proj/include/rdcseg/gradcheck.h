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

#ifndef RDCSEG_GRADCHECK_H_
#define RDCSEG_GRADCHECK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rdcseg/tensor.h"

namespace rdcseg {

struct GradientCheckReport {
  double max_abs_error = 0.0;
  // |analytic - numeric| / max(|analytic|, |numeric|, 1).
  double max_rel_error = 0.0;
  // Flat index over the concatenation of all checked coordinates.
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  double tolerance = 0.0;
  bool passed = true;

  std::string describe() const;
  // Folds another report in, keeping the worst coordinate.
  void merge(const GradientCheckReport& other);
};

// A deterministic operation together with its adjoint. `backward` must
// accumulate into the grad buffers of `inputs` (those that have one).
struct DifferentiableOp {
  std::function<Tensor(std::vector<Tensor>& inputs)> forward;
  std::function<void(const Tensor& grad_output, std::vector<Tensor>& inputs)>
      backward;
};

struct GradCheckOptions {
  // Inputs to differentiate; empty means all of them.
  std::vector<std::size_t> inputs_to_check;
  // Upper bound on coordinates checked per input (a seeded random subset);
  // 0 checks every coordinate.
  std::size_t max_coordinates_per_input = 0;
  std::uint64_t seed = 0x5eed;
};

// Central differences (f(x+e) - f(x-e)) / 2e on a scalar objective,
// compared coordinate-wise against `analytic`.
GradientCheckReport check_scalar_gradient(
    const std::function<double()>& objective, std::span<double* const> coords,
    std::span<const double> analytic, double epsilon, double tolerance);

// Reduces the op output to a scalar by a fixed random projection R and
// checks d(sum R * op(x)) / dx against op.backward(R).
GradientCheckReport finite_difference_check(const DifferentiableOp& op,
                                            std::vector<Tensor> inputs,
                                            double epsilon, double tolerance,
                                            const GradCheckOptions& options = {});

}  // namespace rdcseg

#endif  // RDCSEG_GRADCHECK_H_
