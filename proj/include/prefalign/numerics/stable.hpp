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

#ifndef PREFALIGN_NUMERICS_STABLE_HPP_
#define PREFALIGN_NUMERICS_STABLE_HPP_

#include <span>

namespace prefalign::numerics {

// ln(1 + e^x) without overflow.
double softplus(double x);

// ln sigma(x), evaluated as -softplus(-x). Never forms sigma(x) first, so the
// result stays accurate for large |x|. Throws on NaN.
double log_sigmoid(double x);

double sigmoid(double x);

// ln sum_i e^{x_i}, shifted by the maximum. Throws on an empty input.
double logsumexp(std::span<const double> xs);

}  // namespace prefalign::numerics

#endif  // PREFALIGN_NUMERICS_STABLE_HPP_
