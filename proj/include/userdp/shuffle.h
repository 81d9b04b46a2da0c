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

// Shuffle-model protocols built on negative binomial noise: binary summation
// (over- and under-estimating), selection and histogram.
//
// Each user sends its payload messages plus a share of negative binomial
// noise; the shuffler discards message order and the analyzer only counts
// messages per bucket.

#ifndef USERDP_SHUFFLE_H_
#define USERDP_SHUFFLE_H_

#include <cstdint>
#include <map>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "userdp/dp_select.h"
#include "userdp/randomness.h"

namespace userdp {

struct NBParams {
  double r = 1.0;
  double p = 0.5;

  // Requires r > 0 and 0 < p < 1.
  static absl::StatusOr<NBParams> Create(double r, double p);
  double Mean() const { return r * p / (1.0 - p); }
  double Variance() const { return r * p / ((1.0 - p) * (1.0 - p)); }
};

// NB(r, p) with mean r p / (1 - p) via the gamma-Poisson mixture, so r need
// not be an integer.
int64_t SampleNegativeBinomial(const NBParams& params, RandomStream& stream);

struct SummationConfig {
  // Failure probability of the error tail bound.
  double beta = 0.1;
  // Leading constant c in r = ceil(c (1 + ln(1/(beta delta)))). Privacy
  // holds for any c >= 3.
  double r_constant = 1000.0;
  // Test hook: force all noise shares to zero.
  bool disable_noise = false;
};

// Total noise of the summation protocol: p = e^{-0.2 eps},
// r = ceil(c (1 + ln(1/(beta delta)))).
absl::StatusOr<NBParams> SummationNoise(double epsilon, double delta,
                                        const SummationConfig& config);

// Wire format of a simulated message.
struct ShuffleMessage {
  uint32_t bucket = 0;
  uint8_t payload = 1;

  friend bool operator==(const ShuffleMessage&,
                         const ShuffleMessage&) = default;
};

struct ShuffleTranscript {
  // What the analyzer sees.
  std::map<uint32_t, int64_t> message_count_per_bucket;
  // Pre-shuffle message counts, [user][bucket]. Test hook only; analyzers
  // never read it.
  std::vector<std::vector<int64_t>> user_message_counts;
  // Total noise across all users, per bucket.
  NBParams noise;
};

// Every message the users sent, grouped by user. Shuffling this list and
// passing it to AnalyzeMessages reproduces message_count_per_bucket.
std::vector<ShuffleMessage> MaterializeMessages(
    const ShuffleTranscript& transcript);
std::map<uint32_t, int64_t> AnalyzeMessages(
    absl::Span<const ShuffleMessage> messages);

struct SummationResult {
  int64_t estimate = 0;
  ShuffleTranscript transcript;
};

// User i sends x_i + Z_i messages, Z_i ~ NB(r/n, p) drawn from
// Derive(root, ("nb", [i])). The estimate is the message count, always at
// least sum x_i. Requires bits in {0, 1}, eps in (0, 1], delta and beta in
// (0, 1), n >= 1.
absl::StatusOr<SummationResult> ShuffleSumOver(absl::Span<const uint8_t> bits,
                                               double epsilon, double delta,
                                               const SeedRoot& root,
                                               const SummationConfig& config =
                                                   {});

// n minus the over-estimate of sum (1 - x_i); always at most sum x_i and may
// be negative.
absl::StatusOr<SummationResult> ShuffleSumUnder(
    absl::Span<const uint8_t> bits, double epsilon, double delta,
    const SeedRoot& root, const SummationConfig& config = {});

struct ShuffleSelectResult {
  int64_t output = 0;
  // Under-estimates of each bucket's count.
  std::vector<int64_t> estimates;
  ShuffleTranscript transcript;
};

// Per bucket u, the (eps/2, delta/2) under-estimating sum of 1[item_i = u];
// returns the argmax (lowest bucket on ties). Universe size at most 2^16.
absl::StatusOr<ShuffleSelectResult> ShuffleSelect(
    absl::Span<const int64_t> items, int64_t universe_size, double epsilon,
    double delta, const SeedRoot& root, const SummationConfig& config = {});

struct ShuffleHistogramResult {
  HistogramEstimate histogram;
  ShuffleTranscript transcript;
};

// As ShuffleSelect with per-bucket failure probability beta / n; negative
// estimates become 0.
absl::StatusOr<ShuffleHistogramResult> ShuffleHistogram(
    absl::Span<const int64_t> items, int64_t universe_size, double epsilon,
    double delta, const SeedRoot& root, const SummationConfig& config = {});

}  // namespace userdp

#endif  // USERDP_SHUFFLE_H_
