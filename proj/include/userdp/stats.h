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

#ifndef USERDP_STATS_H_
#define USERDP_STATS_H_

#include <cstdint>
#include <functional>

#include "absl/status/status.h"
#include "absl/types/span.h"

namespace userdp {

// Linear-interpolation quantile (type 7) of an unsorted sample; 0 if empty.
double Quantile(absl::Span<const double> values, double q);

struct QuantileSummary {
  double min = 0.0;
  double p10 = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

QuantileSummary Summarize(absl::Span<const double> values);

// Runs body(i) for i in [0, n) on up to `threads` threads. Each index runs
// exactly once; the lowest-index failure is returned.
absl::Status ParallelFor(int64_t n, int threads,
                         const std::function<absl::Status(int64_t)>& body);

}  // namespace userdp

#endif  // USERDP_STATS_H_
