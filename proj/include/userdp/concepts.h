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

// Finite domains, bit-vector hypotheses, concept classes and realizable
// distributions.
//
// Points are the integers 0..N-1. A hypothesis stores one bit per point. The
// canonical order on hypotheses is the numeric order of the N-bit integer
// whose most significant bit is h(0); hex strings print that integer
// zero-padded to ceil(N/4) digits.

#ifndef USERDP_CONCEPTS_H_
#define USERDP_CONCEPTS_H_

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "userdp/randomness.h"

namespace userdp {

inline constexpr int64_t kMaxDomainSize = int64_t{1} << 24;

// Checks 1 <= size <= kMaxDomainSize.
absl::Status ValidateDomainSize(int64_t size);

class Hypothesis {
 public:
  // Empty labeling over a zero-point domain; only useful as a placeholder.
  Hypothesis() = default;
  // All-zeros labeling of `domain_size` points.
  explicit Hypothesis(int64_t domain_size);

  // "0110": character i is h(i).
  static absl::StatusOr<Hypothesis> FromBitString(std::string_view bits);
  static absl::StatusOr<Hypothesis> FromHex(std::string_view hex,
                                            int64_t domain_size);
  // Uniformly random labeling.
  static Hypothesis Random(int64_t domain_size, RandomStream& stream);

  int64_t domain_size() const { return size_; }
  bool operator()(int64_t x) const {
    return (words_[x >> 6] >> (63 - (x & 63))) & 1;
  }
  void Set(int64_t x, bool value);

  Hypothesis Complement() const;
  // Number of points labeled 1.
  int64_t CountOnes() const;

  std::string ToBitString() const;
  std::string ToHex() const;
  // Words in big-endian byte order; input to keyed per-hypothesis streams.
  std::vector<uint8_t> ToBytes() const;

  absl::Span<const uint64_t> words() const { return words_; }

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
  friend std::strong_ordering operator<=>(const Hypothesis& a,
                                          const Hypothesis& b);

  template <typename H>
  friend H AbslHashValue(H h, const Hypothesis& hyp) {
    return H::combine(std::move(h), hyp.size_, hyp.words_);
  }

 private:
  int64_t size_ = 0;
  // Point x lives in word x / 64 at bit 63 - x % 64; padding bits are zero.
  std::vector<uint64_t> words_;
};

struct LabeledSample {
  int64_t x = 0;
  bool y = false;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

class ConceptClass {
 public:
  // Sorts members canonically. Fails on an empty list, mismatched domains or
  // duplicates.
  static absl::StatusOr<ConceptClass> Create(int64_t domain_size,
                                             std::vector<Hypothesis> members);
  // As Create, but silently drops duplicates.
  static absl::StatusOr<ConceptClass> CreateDeduplicated(
      int64_t domain_size, std::vector<Hypothesis> members);

  int64_t domain_size() const { return domain_size_; }
  int64_t size() const { return static_cast<int64_t>(members_.size()); }
  const Hypothesis& operator[](int64_t i) const { return members_[i]; }
  const std::vector<Hypothesis>& members() const { return members_; }

  // Canonical index of `h`, if present.
  std::optional<int64_t> IndexOf(const Hypothesis& h) const;
  bool Contains(const Hypothesis& h) const { return IndexOf(h).has_value(); }
  // log2 of the class size.
  double Log2Size() const;

 private:
  ConceptClass(int64_t domain_size, std::vector<Hypothesis> members)
      : domain_size_(domain_size), members_(std::move(members)) {}

  int64_t domain_size_;
  std::vector<Hypothesis> members_;
};

enum class ClassKind { kThresholds, kPoints, kParities, kConjunctions };

absl::StatusOr<ClassKind> ParseClassKind(std::string_view name);
std::string_view ClassKindName(ClassKind kind);

// thresholds: h_t(x) = 1 iff x < t, t = 0..N (N + 1 members).
// points: the N singletons plus all-zeros.
// parities: x in {0,1}^d, h_a(x) = popcount(a & x) mod 2 (2^d members).
// conjunctions: monotone, h_S(x) = AND of bits j in S of x (2^d members).
// Parities and conjunctions need a power-of-two domain. The total bit count
// of the class is capped at 2^30.
absl::StatusOr<ConceptClass> StandardClass(ClassKind kind,
                                           int64_t domain_size);

// The monotone conjunction over d = log2(domain_size) variables in `mask`.
absl::StatusOr<Hypothesis> MonotoneConjunction(int64_t domain_size,
                                               uint64_t mask);

class RealizableDistribution {
 public:
  // Weights must be finite, nonnegative and sum to 1 within 1e-9. They are
  // not renormalized.
  static absl::StatusOr<RealizableDistribution> Create(
      std::vector<double> weights, Hypothesis target);
  static absl::StatusOr<RealizableDistribution> Uniform(int64_t domain_size,
                                                        Hypothesis target);

  int64_t domain_size() const {
    return static_cast<int64_t>(weights_.size());
  }
  absl::Span<const double> weights() const { return weights_; }
  const Hypothesis& target() const { return target_; }

  // One point by inverse CDF over the weights.
  int64_t SamplePoint(RandomStream& stream) const;

 private:
  RealizableDistribution(std::vector<double> weights,
                         std::vector<double> cumulative, Hypothesis target)
      : weights_(std::move(weights)),
        cumulative_(std::move(cumulative)),
        target_(std::move(target)) {}

  std::vector<double> weights_;
  std::vector<double> cumulative_;
  Hypothesis target_;
};

// Sparse histogram of a labeled sample: entries sorted by (x, y), counts > 0.
struct SampleCounts {
  struct Entry {
    int64_t x = 0;
    bool y = false;
    int64_t count = 0;

    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> entries;
  int64_t total = 0;

  static SampleCounts FromSamples(absl::Span<const LabeledSample> samples);
};

// Probability that h disagrees with the target under D.
absl::StatusOr<double> DistributionalError(const Hypothesis& h,
                                           const RealizableDistribution& d);

// Fraction of samples that h mislabels.
absl::StatusOr<double> EmpiricalError(const Hypothesis& h,
                                      absl::Span<const LabeledSample> samples);
absl::StatusOr<double> EmpiricalError(const Hypothesis& h,
                                      const SampleCounts& counts);

// m i.i.d. labeled draws.
std::vector<LabeledSample> DrawSamples(const RealizableDistribution& d,
                                       int64_t m, RandomStream& stream);

// The histogram of m i.i.d. draws, sampled directly from the multinomial law.
// Equal in distribution to SampleCounts::FromSamples(DrawSamples(d, m, ...)),
// but costs O(N) instead of O(m) for large m.
SampleCounts DrawSampleCounts(const RealizableDistribution& d, int64_t m,
                              RandomStream& stream);

}  // namespace userdp

#endif  // USERDP_CONCEPTS_H_
