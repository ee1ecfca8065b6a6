// Copyright 2026 The prefalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PREFALIGN_NUMERICS_GRADCHECK_HPP_
#define PREFALIGN_NUMERICS_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prefalign/numerics/tensor.hpp"

namespace prefalign::numerics {

// Scalar objective of a parameter set.
using LossFn = std::function<double(const ParameterSet&)>;
// Same objective, additionally writing d(loss)/d(params) into grad (which has
// the layout of params). Returns the loss.
using LossGradFn = std::function<double(const ParameterSet&, ParameterSet& grad)>;

struct GradCheckOptions {
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t num_coordinates = 100;
  // Denominator floor of the relative error: |a - n| / max(|a|, |n|, floor).
  double abs_floor = 1e-6;
};

struct GradCheckCoordinate {
  std::size_t flat_index = 0;
  std::string block;
  std::size_t offset = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  GradCheckCoordinate worst;
  std::vector<GradCheckCoordinate> coordinates;
  bool passed = true;
};

// Compares tape gradients against central differences
// (L(theta + h e_i) - L(theta - h e_i)) / 2h on a seeded random subset of
// coordinates (all of them when the set is smaller than requested). Throws if
// loss_fn is not bit-deterministic at theta.
GradCheckReport finite_diff_check(const LossFn& loss_fn, const LossGradFn& grad_fn,
                                  ParameterSet params, const GradCheckOptions& options);

}  // namespace prefalign::numerics

#endif  // PREFALIGN_NUMERICS_GRADCHECK_HPP_
