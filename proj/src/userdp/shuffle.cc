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

#include "userdp/shuffle.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "userdp/sampling.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

constexpr int64_t kMaxBuckets = int64_t{1} << 16;

absl::Status CheckSummationParams(int64_t n, double epsilon, double delta,
                                  double beta) {
  if (n < 1) return absl::InvalidArgumentError("summation needs a user");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("shuffle epsilon must be in (0, 1], got ", epsilon));
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("shuffle delta must be in (0, 1), got ", delta));
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("beta must be in (0, 1), got ", beta));
  }
  return absl::OkStatus();
}

// Runs the randomizers of n users over `buckets` buckets. User i sends
// payload(i, u) + Z_i^u messages to bucket u; the noise draws for user i come
// from Derive(root, ("nb", [i])) in bucket order.
absl::StatusOr<ShuffleTranscript> RunRandomizers(
    int64_t n, int64_t buckets,
    const std::function<int64_t(int64_t, int64_t)>& payload,
    const NBParams& total, const SeedRoot& root, bool disable_noise) {
  ShuffleTranscript transcript;
  transcript.noise = total;
  transcript.user_message_counts.assign(n, std::vector<int64_t>(buckets, 0));
  const NBParams share{total.r / static_cast<double>(n), total.p};
  std::vector<int64_t> per_bucket(buckets, 0);
  for (int64_t i = 0; i < n; ++i) {
    USERDP_ASSIGN_OR_RETURN(
        RandomStream stream,
        Derive(root, SubstreamLabel("nb", {static_cast<uint64_t>(i)})));
    for (int64_t u = 0; u < buckets; ++u) {
      const int64_t noise =
          disable_noise ? 0 : SampleNegativeBinomial(share, stream);
      const int64_t sent = payload(i, u) + noise;
      transcript.user_message_counts[i][u] = sent;
      per_bucket[u] += sent;
    }
  }
  for (int64_t u = 0; u < buckets; ++u) {
    transcript.message_count_per_bucket[static_cast<uint32_t>(u)] =
        per_bucket[u];
  }
  return transcript;
}

absl::Status CheckItems(absl::Span<const int64_t> items,
                        int64_t universe_size) {
  if (universe_size < 1 || universe_size > kMaxBuckets) {
    return absl::InvalidArgumentError(absl::StrCat(
        "shuffle universe size must be in [1, 2^16], got ", universe_size));
  }
  for (int64_t item : items) {
    if (item < 0 || item >= universe_size) {
      return absl::InvalidArgumentError(absl::StrCat(
          "item ", item, " outside a universe of size ", universe_size));
    }
  }
  return absl::OkStatus();
}

// Under-estimates of every bucket count under (eps/2, delta/2).
absl::StatusOr<std::pair<std::vector<int64_t>, ShuffleTranscript>>
BucketUnderEstimates(absl::Span<const int64_t> items, int64_t universe_size,
                     double epsilon, double delta, double beta,
                     const SeedRoot& root, const SummationConfig& config) {
  const int64_t n = static_cast<int64_t>(items.size());
  USERDP_RETURN_IF_ERROR(CheckItems(items, universe_size));
  USERDP_RETURN_IF_ERROR(CheckSummationParams(n, epsilon, delta, beta));
  SummationConfig bucket_config = config;
  bucket_config.beta = beta;
  USERDP_ASSIGN_OR_RETURN(
      NBParams noise,
      SummationNoise(epsilon / 2.0, delta / 2.0, bucket_config));
  USERDP_ASSIGN_OR_RETURN(
      ShuffleTranscript transcript,
      RunRandomizers(
          n, universe_size,
          [&](int64_t i, int64_t u) { return items[i] == u ? 0 : 1; }, noise,
          root, config.disable_noise));
  std::vector<int64_t> estimates(universe_size);
  for (int64_t u = 0; u < universe_size; ++u) {
    estimates[u] =
        n - transcript.message_count_per_bucket[static_cast<uint32_t>(u)];
  }
  return std::make_pair(std::move(estimates), std::move(transcript));
}

}  // namespace

absl::StatusOr<NBParams> NBParams::Create(double r, double p) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    return absl::InvalidArgumentError(
        absl::StrCat("NB r must be positive, got ", r));
  }
  if (!(p > 0.0 && p < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("NB p must be in (0, 1), got ", p));
  }
  return NBParams{r, p};
}

int64_t SampleNegativeBinomial(const NBParams& params, RandomStream& stream) {
  const double rate = SampleGamma(stream, params.r,
                                  params.p / (1.0 - params.p));
  return SamplePoisson(stream, rate);
}

absl::StatusOr<NBParams> SummationNoise(double epsilon, double delta,
                                        const SummationConfig& config) {
  if (!(config.r_constant > 0.0)) {
    return absl::InvalidArgumentError("r constant must be positive");
  }
  const double r = std::ceil(
      config.r_constant * (1.0 + std::log(1.0 / (config.beta * delta))));
  return NBParams::Create(r, std::exp(-0.2 * epsilon));
}

std::vector<ShuffleMessage> MaterializeMessages(
    const ShuffleTranscript& transcript) {
  std::vector<ShuffleMessage> messages;
  for (const auto& user : transcript.user_message_counts) {
    for (size_t u = 0; u < user.size(); ++u) {
      for (int64_t k = 0; k < user[u]; ++k) {
        messages.push_back({static_cast<uint32_t>(u), 1});
      }
    }
  }
  return messages;
}

std::map<uint32_t, int64_t> AnalyzeMessages(
    absl::Span<const ShuffleMessage> messages) {
  std::map<uint32_t, int64_t> counts;
  for (const ShuffleMessage& m : messages) counts[m.bucket] += m.payload;
  return counts;
}

absl::StatusOr<SummationResult> ShuffleSumOver(absl::Span<const uint8_t> bits,
                                               double epsilon, double delta,
                                               const SeedRoot& root,
                                               const SummationConfig& config) {
  const int64_t n = static_cast<int64_t>(bits.size());
  USERDP_RETURN_IF_ERROR(
      CheckSummationParams(n, epsilon, delta, config.beta));
  for (uint8_t bit : bits) {
    if (bit > 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("summation inputs must be bits, got ", int{bit}));
    }
  }
  USERDP_ASSIGN_OR_RETURN(NBParams noise,
                          SummationNoise(epsilon, delta, config));
  SummationResult result;
  USERDP_ASSIGN_OR_RETURN(
      result.transcript,
      RunRandomizers(
          n, 1, [&](int64_t i, int64_t) { return int64_t{bits[i]}; },
          noise, root, config.disable_noise));
  result.estimate = result.transcript.message_count_per_bucket[0];
  return result;
}

absl::StatusOr<SummationResult> ShuffleSumUnder(
    absl::Span<const uint8_t> bits, double epsilon, double delta,
    const SeedRoot& root, const SummationConfig& config) {
  std::vector<uint8_t> complement(bits.size());
  for (size_t i = 0; i < bits.size(); ++i) complement[i] = bits[i] == 0;
  USERDP_ASSIGN_OR_RETURN(
      SummationResult result,
      ShuffleSumOver(complement, epsilon, delta, root, config));
  result.estimate = static_cast<int64_t>(bits.size()) - result.estimate;
  return result;
}

absl::StatusOr<ShuffleSelectResult> ShuffleSelect(
    absl::Span<const int64_t> items, int64_t universe_size, double epsilon,
    double delta, const SeedRoot& root, const SummationConfig& config) {
  USERDP_ASSIGN_OR_RETURN(
      auto buckets, BucketUnderEstimates(items, universe_size, epsilon, delta,
                                         config.beta, root, config));
  ShuffleSelectResult result;
  result.estimates = std::move(buckets.first);
  result.transcript = std::move(buckets.second);
  result.output = std::max_element(result.estimates.begin(),
                                   result.estimates.end()) -
                  result.estimates.begin();
  return result;
}

absl::StatusOr<ShuffleHistogramResult> ShuffleHistogram(
    absl::Span<const int64_t> items, int64_t universe_size, double epsilon,
    double delta, const SeedRoot& root, const SummationConfig& config) {
  const double n = static_cast<double>(std::max<size_t>(items.size(), 1));
  USERDP_ASSIGN_OR_RETURN(
      auto buckets, BucketUnderEstimates(items, universe_size, epsilon, delta,
                                         config.beta / n, root, config));
  ShuffleHistogramResult result;
  result.histogram.universe_size = universe_size;
  for (int64_t u = 0; u < universe_size; ++u) {
    result.histogram.estimates[u] =
        static_cast<double>(std::max<int64_t>(buckets.first[u], 0));
  }
  result.transcript = std::move(buckets.second);
  return result;
}

}  // namespace userdp
