//
// Copyright 2026 The userdp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Continuous and discrete samplers driven by a RandomStream.

#ifndef USERDP_SAMPLING_H_
#define USERDP_SAMPLING_H_

#include <cstdint>
#include <vector>

#include "absl/types/span.h"
#include "userdp/randomness.h"

namespace userdp {

// Exp(1) by inversion.
double SampleStandardExponential(RandomStream& stream);

// Laplace(0, scale) by inversion of the CDF.
double SampleLaplace(RandomStream& stream, double scale);

// Binomial(trials, p). Exact for any trials that fits in int64.
int64_t SampleBinomial(RandomStream& stream, int64_t trials, double p);

// Gamma with the given shape and scale (mean shape * scale).
double SampleGamma(RandomStream& stream, double shape, double scale);

// Poisson(mean); returns 0 when mean <= 0.
int64_t SamplePoisson(RandomStream& stream, double mean);

// Multinomial(trials, weights / sum(weights)) via conditional binomials.
// Weights must be nonnegative with a positive sum.
std::vector<int64_t> SampleMultinomial(RandomStream& stream, int64_t trials,
                                       absl::Span<const double> weights);

// log(sum(exp(values))); -inf for an empty span.
double LogSumExp(absl::Span<const double> values);

}  // namespace userdp

#endif  // USERDP_SAMPLING_H_
