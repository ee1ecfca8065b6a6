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

#ifndef PREFALIGN_NUMERICS_ADAM_HPP_
#define PREFALIGN_NUMERICS_ADAM_HPP_

#include <cstdint>

#include "prefalign/numerics/tensor.hpp"

namespace prefalign::numerics {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments share the parameter layout; step_count is the number of updates
// applied so far.
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  ParameterSet first_moment;
  ParameterSet second_moment;

  AdamState(const ParameterSet& like, AdamConfig cfg)
      : config(cfg), first_moment(like.zeros_like()), second_moment(like.zeros_like()) {}
};

// One bias-corrected Adam update. Every gradient is validated before any
// parameter is touched: a shape mismatch or a non-finite entry throws and
// leaves params and state unchanged.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state);

// Rescales grads in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ParameterSet& grads, double max_norm);

}  // namespace prefalign::numerics

#endif  // PREFALIGN_NUMERICS_ADAM_HPP_
