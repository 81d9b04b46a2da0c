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

// Differentially private selection over vote sets: the thresholded
// Laplace selection (approximate DP), the exponential mechanism (pure DP),
// unary randomized response (local DP), and group-privacy accounting.

#ifndef USERDP_DP_SELECT_H_
#define USERDP_DP_SELECT_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "userdp/concepts.h"
#include "userdp/correlated_sampling.h"
#include "userdp/randomness.h"

namespace userdp {

struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 0.0;

  // Requires epsilon > 0 and 0 <= delta < 1.
  static absl::StatusOr<PrivacyParams> Create(double epsilon, double delta);
};

// Privacy of a group of k users: (k eps, delta (e^{k eps} - 1)/(e^eps - 1)).
absl::StatusOr<PrivacyParams> GroupPrivacy(const PrivacyParams& params,
                                           int64_t k);

// Test hook shared by all mechanisms. With noise disabled every selection
// returns the plurality vote.
struct MechanismOptions {
  bool disable_noise = false;
};

template <typename Element>
struct VoteTally {
  Element element;
  int64_t count = 0;
};

// One vote per user over a universe. Elements are hypotheses (full space or
// hypothesis-list universes) or indices (any universe with a 64-bit
// cardinality). Tallies list elements with count >= 1 in canonical order.
template <typename Element>
class VoteSet {
 public:
  static absl::StatusOr<VoteSet> Create(OutcomeSpace universe,
                                        std::vector<Element> votes);

  const OutcomeSpace& universe() const { return universe_; }
  int64_t size() const { return size_; }
  const std::vector<VoteTally<Element>>& tallies() const { return tallies_; }
  int64_t CountOf(const Element& e) const;
  // The fixed first element of the universe.
  Element FirstElement() const;
  // Highest count, lowest canonical element on ties; FirstElement() when
  // there are no votes.
  Element Plurality() const;

 private:
  VoteSet(OutcomeSpace universe, int64_t size,
          std::vector<VoteTally<Element>> tallies)
      : universe_(std::move(universe)),
        size_(size),
        tallies_(std::move(tallies)) {}

  OutcomeSpace universe_;
  int64_t size_;
  std::vector<VoteTally<Element>> tallies_;
};

template <typename Element>
struct ApproxSelectTranscript {
  struct Candidate {
    Element element;
    int64_t count = 0;
    double noise = 0.0;
    double noisy_count = 0.0;
  };
  std::vector<Candidate> candidates;
  double threshold = 0.0;
  // Whether the noisy maximum cleared the threshold.
  bool released = false;
  Element output;
};

// Adds Laplace(2/eps) noise to each count >= 1 (canonical order) and releases
// the noisy argmax if its noisy count is at least 1 + 2 ln(1/(2 delta))/eps;
// otherwise returns the universe's first element. Fails when delta = 0.
template <typename Element>
absl::StatusOr<ApproxSelectTranscript<Element>> ApproxSelect(
    const VoteSet<Element>& votes, const PrivacyParams& params,
    RandomStream& stream, const MechanismOptions& options = {});

// Output law of a mechanism choosing index u of [0, universe_size) with
// probability proportional to exp(exponent * c_u).
struct ExponentialMechanismLaw {
  std::vector<std::pair<int64_t, double>> voted;  // (index, probability)
  double unvoted_probability = 0.0;               // each index with c_u = 0
  int64_t unvoted_count = 0;

  double Probability(int64_t index) const;
};

absl::StatusOr<ExponentialMechanismLaw> ExponentialLaw(
    const VoteSet<int64_t>& votes, double exponent);

// Exponential mechanism with score c_u and exponent eps/2. Samples whether
// the output is a voted element, then within the chosen side; the unvoted
// side is sampled by rank so the cost is independent of |U|.
absl::StatusOr<int64_t> PureSelect(const VoteSet<int64_t>& votes,
                                   double epsilon, RandomStream& stream,
                                   const MechanismOptions& options = {});

using LocalMessage = std::vector<uint8_t>;

// Per-bit flip probability 1 / (1 + e^{eps/2}).
double LocalFlipProbability(double epsilon);

// One-hot encodes `item` over [0, universe_size) and flips every bit
// independently. Requires universe_size <= 2^20 and 0 < eps <= 8.
absl::StatusOr<LocalMessage> LocalRandomize(
    int64_t item, int64_t universe_size, double epsilon, RandomStream& stream,
    const MechanismOptions& options = {});

// Exact probability that LocalRandomize(item) emits `message`.
absl::StatusOr<double> LocalMessageProbability(const LocalMessage& message,
                                               int64_t item, double epsilon);

struct HistogramEstimate {
  int64_t universe_size = 0;
  // Missing elements have estimate 0.
  std::map<int64_t, double> estimates;

  double Estimate(int64_t element) const;
};

struct LocalAggregateResult {
  HistogramEstimate histogram;
  int64_t argmax = 0;
};

// Debiased counts (sum_i bit_u(i) - n q) / (1 - 2q) and their argmax
// (lowest index on ties).
absl::StatusOr<LocalAggregateResult> LocalAggregate(
    absl::Span<const LocalMessage> messages, int64_t universe_size,
    double epsilon, const MechanismOptions& options = {});

}  // namespace userdp

#endif  // USERDP_DP_SELECT_H_
