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

// Correlated sampling: parties holding nearby distributions and the same
// stream obtain the same sample with high probability, while each party's
// output has exactly its own distribution.

#ifndef USERDP_CORRELATED_SAMPLING_H_
#define USERDP_CORRELATED_SAMPLING_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "userdp/concepts.h"
#include "userdp/randomness.h"

namespace userdp {

// An enumerable outcome set with an index encoding.
class OutcomeSpace {
 public:
  enum class Kind { kFullHypothesisSpace, kHypothesisList, kGrid };

  // All 2^N labelings of an N-point domain. Index encoding is the canonical
  // integer value and is available for N <= 64.
  static absl::StatusOr<OutcomeSpace> FullHypothesisSpace(int64_t domain_size);
  // The members of `list`, indexed canonically.
  static OutcomeSpace HypothesisList(std::shared_ptr<const ConceptClass> list);
  // {0, 1/I, ..., 1}; index l encodes l / I.
  static absl::StatusOr<OutcomeSpace> Grid(int64_t resolution);

  Kind kind() const { return kind_; }
  // Domain size for hypothesis spaces, 0 for grids.
  int64_t domain_size() const { return domain_size_; }
  // Grid resolution I, 0 for hypothesis spaces.
  int64_t resolution() const { return resolution_; }
  const std::shared_ptr<const ConceptClass>& list() const { return list_; }

  double Log2Cardinality() const;
  // |space| when it fits in 64 bits.
  std::optional<uint64_t> Cardinality() const;

  absl::StatusOr<uint64_t> Encode(const Hypothesis& h) const;
  absl::StatusOr<Hypothesis> DecodeHypothesis(uint64_t index) const;
  absl::StatusOr<uint64_t> EncodeValue(double value) const;
  absl::StatusOr<double> DecodeValue(uint64_t index) const;

 private:
  OutcomeSpace(Kind kind, int64_t domain_size, int64_t resolution,
               std::shared_ptr<const ConceptClass> list)
      : kind_(kind),
        domain_size_(domain_size),
        resolution_(resolution),
        list_(std::move(list)) {}

  Kind kind_;
  int64_t domain_size_;
  int64_t resolution_;
  std::shared_ptr<const ConceptClass> list_;
};

// Probability vector over indices {0, ..., n-1}.
class DiscreteDistribution {
 public:
  // Probabilities must be finite, nonnegative and sum to 1 within 1e-9.
  static absl::StatusOr<DiscreteDistribution> Create(
      std::vector<double> probabilities);
  // Normalizes exp(log_weights). Entries of -inf get probability 0.
  static absl::StatusOr<DiscreteDistribution> FromLogWeights(
      absl::Span<const double> log_weights);
  static DiscreteDistribution PointMass(int64_t size, int64_t index);

  int64_t size() const { return static_cast<int64_t>(probabilities_.size()); }
  double operator[](int64_t i) const { return probabilities_[i]; }
  absl::Span<const double> probabilities() const { return probabilities_; }

 private:
  explicit DiscreteDistribution(std::vector<double> probabilities)
      : probabilities_(std::move(probabilities)) {}

  std::vector<double> probabilities_;
};

// Finitely supported distribution over all labelings of a domain.
class HypothesisDistribution {
 public:
  struct Atom {
    Hypothesis hypothesis;
    double mass = 0.0;
  };

  // Zero-mass atoms are dropped; the rest are sorted canonically. Fails on
  // duplicates, domain mismatch or masses not summing to 1 within 1e-9.
  static absl::StatusOr<HypothesisDistribution> Create(
      int64_t domain_size, std::vector<Atom> atoms);
  // Normalizes exp(log_weights) over `hypotheses`.
  static absl::StatusOr<HypothesisDistribution> FromLogWeights(
      int64_t domain_size, std::vector<Hypothesis> hypotheses,
      absl::Span<const double> log_weights);
  static HypothesisDistribution PointMass(const Hypothesis& h);

  int64_t domain_size() const { return domain_size_; }
  const std::vector<Atom>& support() const { return support_; }
  double Mass(const Hypothesis& h) const;

 private:
  HypothesisDistribution(int64_t domain_size, std::vector<Atom> support)
      : domain_size_(domain_size), support_(std::move(support)) {}

  int64_t domain_size_;
  std::vector<Atom> support_;
};

enum class FullSpaceStrategy {
  // Rejection up to rejection_domain_limit points, race above.
  kAuto,
  // Uniform-proposal rejection over all 2^N labelings.
  kRejection,
  // Per-hypothesis exponential race keyed by the hypothesis bits. Same
  // marginals and coupling as rejection in the limit of a large space, with
  // cost proportional to the support size.
  kRace,
};

struct CorrelatedSamplingOptions {
  int64_t max_iterations = 100'000'000;
  int64_t rejection_domain_limit = 20;
  FullSpaceStrategy full_space_strategy = FullSpaceStrategy::kAuto;
};

// Rejection sampling with uniform proposals: returns the first proposal w
// with u < P(w). Fails with ResourceExhausted past max_iterations.
absl::StatusOr<int64_t> CorrelatedSample(
    const DiscreteDistribution& p, RandomStream& stream,
    const CorrelatedSamplingOptions& options = {});

absl::StatusOr<Hypothesis> CorrelatedSample(
    const HypothesisDistribution& p, RandomStream& stream,
    const CorrelatedSamplingOptions& options = {});

absl::StatusOr<double> TotalVariationDistance(const DiscreteDistribution& p,
                                              const DiscreteDistribution& q);
absl::StatusOr<double> TotalVariationDistance(
    const HypothesisDistribution& p, const HypothesisDistribution& q);

}  // namespace userdp

#endif  // USERDP_CORRELATED_SAMPLING_H_
