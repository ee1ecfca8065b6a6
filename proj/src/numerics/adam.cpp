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

#include "prefalign/numerics/adam.hpp"

#include <cmath>
#include <string>

#include "prefalign/error.hpp"

namespace prefalign::numerics {

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state) {
  if (!params.same_layout(grads) || !params.same_layout(state.first_moment) ||
      !params.same_layout(state.second_moment)) {
    throw Error("adam_step: parameter, gradient and moment layouts differ");
  }
  for (const auto& b : grads.blocks()) {
    for (double g : b.value.data) {
      if (!std::isfinite(g)) {
        throw Error("adam_step: non-finite gradient in parameter block '" + b.name + "'");
      }
    }
  }

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  for (std::size_t k = 0; k < params.num_blocks(); ++k) {
    auto& p = params.block(k).value.data;
    const auto& g = grads.block(k).value.data;
    auto& m = state.first_moment.block(k).value.data;
    auto& v = state.second_moment.block(k).value.data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

double clip_grad_norm(ParameterSet& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw Error("clip_grad_norm: max_norm must be positive");
  const double norm = l2_norm(grads);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& b : grads.blocks()) {
      for (double& g : b.value.data) g *= s;
    }
  }
  return norm;
}

}  // namespace prefalign::numerics
