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

#include "prefalign/numerics/gradcheck.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "prefalign/error.hpp"

namespace prefalign::numerics {

GradCheckReport finite_diff_check(const LossFn& loss_fn, const LossGradFn& grad_fn,
                                  ParameterSet params, const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw Error("finite_diff_check: step must be positive");

  const double first = loss_fn(params);
  const double second = loss_fn(params);
  if (std::bit_cast<std::uint64_t>(first) != std::bit_cast<std::uint64_t>(second)) {
    throw Error("finite_diff_check: loss function is not deterministic");
  }

  ParameterSet grad = params.zeros_like();
  grad_fn(params, grad);

  const std::size_t n = params.num_scalars();
  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.num_coordinates < n) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.num_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  report.coordinates.reserve(coords.size());
  for (std::size_t flat : coords) {
    double& x = params.at(flat);
    const double saved = x;
    x = saved + options.step;
    const double up = loss_fn(params);
    x = saved - options.step;
    const double down = loss_fn(params);
    x = saved;

    GradCheckCoordinate c;
    c.flat_index = flat;
    const auto [b, off] = params.locate(flat);
    c.block = params.block(b).name;
    c.offset = off;
    c.analytic = grad.at(flat);
    c.numeric = (up - down) / (2.0 * options.step);
    const double denom =
        std::max({std::abs(c.analytic), std::abs(c.numeric), options.abs_floor});
    c.relative_error = std::abs(c.analytic - c.numeric) / denom;
    if (!std::isfinite(c.relative_error)) c.relative_error = INFINITY;
    if (report.coordinates.empty() || c.relative_error > report.max_relative_error) {
      report.max_relative_error = c.relative_error;
      report.worst = c;
    }
    report.coordinates.push_back(c);
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace prefalign::numerics
