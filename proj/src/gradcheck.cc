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

#include "rdcseg/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rdcseg {

std::string GradientCheckReport::describe() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " coordinates=" << coordinates
     << " max_abs_error=" << max_abs_error
     << " max_rel_error=" << max_rel_error << " worst_index=" << worst_index
     << " tolerance=" << tolerance;
  return os.str();
}

void GradientCheckReport::merge(const GradientCheckReport& other) {
  if (other.max_rel_error > max_rel_error) {
    max_rel_error = other.max_rel_error;
    worst_index = coordinates + other.worst_index;
  }
  max_abs_error = std::max(max_abs_error, other.max_abs_error);
  coordinates += other.coordinates;
  tolerance = std::max(tolerance, other.tolerance);
  passed = passed && other.passed;
}

GradientCheckReport check_scalar_gradient(
    const std::function<double()>& objective, std::span<double* const> coords,
    std::span<const double> analytic, double epsilon, double tolerance) {
  RDC_CHECK(epsilon > 0.0, "finite_difference_check: epsilon must be positive");
  RDC_CHECK(coords.size() == analytic.size(),
            "finite_difference_check: " << coords.size() << " coordinates but "
                                        << analytic.size() << " analytic values");
  GradientCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double* x = coords[i];
    const double saved = *x;
    *x = saved + epsilon;
    const double plus = objective();
    *x = saved - epsilon;
    const double minus = objective();
    *x = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double abs_err = std::abs(analytic[i] - numeric);
    const double scale =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1.0});
    const double rel_err = abs_err / scale;
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel_err > report.max_rel_error || !std::isfinite(rel_err)) {
      report.max_rel_error = rel_err;
      report.worst_index = i;
    }
  }
  report.coordinates = coords.size();
  report.passed = std::isfinite(report.max_rel_error) &&
                  report.max_rel_error <= tolerance;
  return report;
}

GradientCheckReport finite_difference_check(const DifferentiableOp& op,
                                            std::vector<Tensor> inputs,
                                            double epsilon, double tolerance,
                                            const GradCheckOptions& options) {
  RDC_CHECK(epsilon > 0.0, "finite_difference_check: epsilon must be positive");
  std::vector<std::size_t> which = options.inputs_to_check;
  if (which.empty()) {
    which.resize(inputs.size());
    std::iota(which.begin(), which.end(), 0);
  }
  for (std::size_t i : which) {
    RDC_CHECK(i < inputs.size(), "finite_difference_check: input index " << i
                                                                         << " out of range");
  }

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (Tensor& t : inputs) t.drop_grad();
  const Tensor probe = op.forward(inputs);
  Tensor projection(probe.shape());
  for (double& v : projection.data()) v = normal(rng);

  for (std::size_t i : which) inputs[i].enable_grad();
  op.backward(projection, inputs);

  std::vector<double*> coords;
  std::vector<double> analytic;
  for (std::size_t i : which) {
    Tensor& t = inputs[i];
    std::vector<std::size_t> idx(t.numel());
    std::iota(idx.begin(), idx.end(), 0);
    if (options.max_coordinates_per_input > 0 &&
        idx.size() > options.max_coordinates_per_input) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_coordinates_per_input);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t k : idx) {
      coords.push_back(t.ptr() + k);
      analytic.push_back(t.grad()[k]);
    }
  }

  auto objective = [&]() {
    const Tensor out = op.forward(inputs);
    double acc = 0.0;
    for (std::size_t k = 0; k < out.numel(); ++k) acc += projection[k] * out[k];
    return acc;
  };
  return check_scalar_gradient(objective, coords, analytic, epsilon, tolerance);
}

}  // namespace rdcseg
