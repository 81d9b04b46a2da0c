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

#include "userdp/sampling.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

namespace userdp {

double SampleStandardExponential(RandomStream& stream) {
  return -std::log(UniformOpenUnit(stream));
}

double SampleLaplace(RandomStream& stream, double scale) {
  const double u = UniformOpenUnit(stream) - 0.5;
  const double magnitude = -scale * std::log1p(-2.0 * std::abs(u));
  return u < 0 ? -magnitude : magnitude;
}

int64_t SampleBinomial(RandomStream& stream, int64_t trials, double p) {
  if (trials <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  boost::random::binomial_distribution<int64_t, double> dist(trials, p);
  return dist(stream);
}

double SampleGamma(RandomStream& stream, double shape, double scale) {
  boost::random::gamma_distribution<double> dist(shape, scale);
  return dist(stream);
}

int64_t SamplePoisson(RandomStream& stream, double mean) {
  if (!(mean > 0.0)) return 0;
  boost::random::poisson_distribution<int64_t, double> dist(mean);
  return dist(stream);
}

std::vector<int64_t> SampleMultinomial(RandomStream& stream, int64_t trials,
                                       absl::Span<const double> weights) {
  std::vector<int64_t> counts(weights.size(), 0);
  if (weights.empty()) return counts;
  // Suffix sums keep the conditional probabilities accurate.
  std::vector<double> rest(weights.size() + 1, 0.0);
  for (size_t i = weights.size(); i-- > 0;) {
    rest[i] = rest[i + 1] + std::max(0.0, weights[i]);
  }
  int64_t remaining = trials;
  for (size_t i = 0; i < weights.size() && remaining > 0; ++i) {
    if (rest[i + 1] <= 0.0) {
      counts[i] = remaining;
      break;
    }
    const double p = std::clamp(std::max(0.0, weights[i]) / rest[i], 0.0, 1.0);
    counts[i] = SampleBinomial(stream, remaining, p);
    remaining -= counts[i];
  }
  return counts;
}

double LogSumExp(absl::Span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (std::isinf(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

}  // namespace userdp
