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

#include "userdp/concepts.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/ascii.h"
#include "absl/strings/str_cat.h"
#include "userdp/sampling.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

constexpr double kWeightTolerance = 1e-9;
constexpr int64_t kMaxClassBits = int64_t{1} << 30;

int64_t WordCount(int64_t domain_size) { return (domain_size + 63) / 64; }

// Mask of the valid (high) bits in the last word.
uint64_t LastWordMask(int64_t domain_size) {
  const int64_t valid = domain_size - 64 * (WordCount(domain_size) - 1);
  return valid == 64 ? ~uint64_t{0} : ~uint64_t{0} << (64 - valid);
}

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  c = absl::ascii_tolower(c);
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

bool IsPowerOfTwo(int64_t n) { return n > 0 && std::has_single_bit(
    static_cast<uint64_t>(n)); }

}  // namespace

absl::Status ValidateDomainSize(int64_t size) {
  if (size < 1 || size > kMaxDomainSize) {
    return absl::InvalidArgumentError(absl::StrCat(
        "domain size must be in [1, ", kMaxDomainSize, "], got ", size));
  }
  return absl::OkStatus();
}

Hypothesis::Hypothesis(int64_t domain_size)
    : size_(domain_size), words_(WordCount(domain_size), 0) {}

absl::StatusOr<Hypothesis> Hypothesis::FromBitString(std::string_view bits) {
  USERDP_RETURN_IF_ERROR(
      ValidateDomainSize(static_cast<int64_t>(bits.size())));
  Hypothesis h(static_cast<int64_t>(bits.size()));
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') {
      return absl::InvalidArgumentError(
          absl::StrCat("bit string contains '", std::string(1, bits[i]), "'"));
    }
    h.Set(static_cast<int64_t>(i), bits[i] == '1');
  }
  return h;
}

absl::StatusOr<Hypothesis> Hypothesis::FromHex(std::string_view hex,
                                               int64_t domain_size) {
  USERDP_RETURN_IF_ERROR(ValidateDomainSize(domain_size));
  if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) {
    hex.remove_prefix(2);
  }
  const int64_t digits = (domain_size + 3) / 4;
  if (hex.empty() || static_cast<int64_t>(hex.size()) > digits) {
    return absl::InvalidArgumentError(
        absl::StrCat("hypothesis over ", domain_size, " points needs at most ",
                     digits, " hex digits, got ", hex.size()));
  }
  // Bit b (0 = most significant) of the padded 4*digits-bit integer.
  const int64_t lead = 4 * digits - domain_size;
  const int64_t pad = digits - static_cast<int64_t>(hex.size());
  Hypothesis h(domain_size);
  for (int64_t d = 0; d < static_cast<int64_t>(hex.size()); ++d) {
    const int value = HexValue(hex[d]);
    if (value < 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("invalid hex digit '", std::string(1, hex[d]), "'"));
    }
    for (int k = 0; k < 4; ++k) {
      if (((value >> (3 - k)) & 1) == 0) continue;
      const int64_t bit = 4 * (pad + d) + k;
      if (bit < lead) {
        return absl::InvalidArgumentError(absl::StrCat(
            "hex value does not fit in ", domain_size, " bits"));
      }
      h.Set(bit - lead, true);
    }
  }
  return h;
}

Hypothesis Hypothesis::Random(int64_t domain_size, RandomStream& stream) {
  Hypothesis h(domain_size);
  for (uint64_t& word : h.words_) word = stream.Next();
  if (!h.words_.empty()) h.words_.back() &= LastWordMask(domain_size);
  return h;
}

void Hypothesis::Set(int64_t x, bool value) {
  const uint64_t bit = uint64_t{1} << (63 - (x & 63));
  if (value) {
    words_[x >> 6] |= bit;
  } else {
    words_[x >> 6] &= ~bit;
  }
}

Hypothesis Hypothesis::Complement() const {
  Hypothesis h = *this;
  for (uint64_t& word : h.words_) word = ~word;
  if (!h.words_.empty()) h.words_.back() &= LastWordMask(size_);
  return h;
}

int64_t Hypothesis::CountOnes() const {
  int64_t ones = 0;
  for (uint64_t word : words_) ones += std::popcount(word);
  return ones;
}

std::string Hypothesis::ToBitString() const {
  std::string out(size_, '0');
  for (int64_t x = 0; x < size_; ++x) {
    if ((*this)(x)) out[x] = '1';
  }
  return out;
}

std::string Hypothesis::ToHex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const int64_t digits = (size_ + 3) / 4;
  const int64_t lead = 4 * digits - size_;
  std::string out(digits, '0');
  for (int64_t x = 0; x < size_; ++x) {
    if (!(*this)(x)) continue;
    const int64_t bit = lead + x;
    out[bit / 4] = static_cast<char>(
        kDigits[HexValue(out[bit / 4]) | (1 << (3 - bit % 4))]);
  }
  return out;
}

std::vector<uint8_t> Hypothesis::ToBytes() const {
  std::vector<uint8_t> out;
  out.reserve(words_.size() * 8);
  for (uint64_t word : words_) {
    for (int shift = 56; shift >= 0; shift -= 8) {
      out.push_back(static_cast<uint8_t>(word >> shift));
    }
  }
  return out;
}

std::strong_ordering operator<=>(const Hypothesis& a, const Hypothesis& b) {
  if (a.size_ != b.size_) return a.size_ <=> b.size_;
  return std::lexicographical_compare_three_way(
      a.words_.begin(), a.words_.end(), b.words_.begin(), b.words_.end());
}

absl::StatusOr<ConceptClass> ConceptClass::Create(
    int64_t domain_size, std::vector<Hypothesis> members) {
  USERDP_RETURN_IF_ERROR(ValidateDomainSize(domain_size));
  if (members.empty()) {
    return absl::InvalidArgumentError("concept class must be nonempty");
  }
  for (const Hypothesis& h : members) {
    if (h.domain_size() != domain_size) {
      return absl::InvalidArgumentError(
          absl::StrCat("member over ", h.domain_size(),
                       " points in a class over ", domain_size));
    }
  }
  std::sort(members.begin(), members.end());
  for (size_t i = 1; i < members.size(); ++i) {
    if (members[i] == members[i - 1]) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate member ", members[i].ToHex()));
    }
  }
  return ConceptClass(domain_size, std::move(members));
}

absl::StatusOr<ConceptClass> ConceptClass::CreateDeduplicated(
    int64_t domain_size, std::vector<Hypothesis> members) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  return Create(domain_size, std::move(members));
}

std::optional<int64_t> ConceptClass::IndexOf(const Hypothesis& h) const {
  auto it = std::lower_bound(members_.begin(), members_.end(), h);
  if (it == members_.end() || *it != h) return std::nullopt;
  return static_cast<int64_t>(it - members_.begin());
}

double ConceptClass::Log2Size() const {
  return std::log2(static_cast<double>(members_.size()));
}

absl::StatusOr<ClassKind> ParseClassKind(std::string_view name) {
  if (name == "thresholds") return ClassKind::kThresholds;
  if (name == "points") return ClassKind::kPoints;
  if (name == "parities") return ClassKind::kParities;
  if (name == "conjunctions") return ClassKind::kConjunctions;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown class kind '", std::string(name), "'"));
}

std::string_view ClassKindName(ClassKind kind) {
  switch (kind) {
    case ClassKind::kThresholds:
      return "thresholds";
    case ClassKind::kPoints:
      return "points";
    case ClassKind::kParities:
      return "parities";
    case ClassKind::kConjunctions:
      return "conjunctions";
  }
  return "unknown";
}

absl::StatusOr<Hypothesis> MonotoneConjunction(int64_t domain_size,
                                               uint64_t mask) {
  USERDP_RETURN_IF_ERROR(ValidateDomainSize(domain_size));
  if (!IsPowerOfTwo(domain_size)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "conjunctions need a power-of-two domain, got ", domain_size));
  }
  if (mask >= static_cast<uint64_t>(domain_size)) {
    return absl::InvalidArgumentError("conjunction uses a missing variable");
  }
  Hypothesis h(domain_size);
  for (int64_t x = 0; x < domain_size; ++x) {
    if ((static_cast<uint64_t>(x) & mask) == mask) h.Set(x, true);
  }
  return h;
}

absl::StatusOr<ConceptClass> StandardClass(ClassKind kind,
                                           int64_t domain_size) {
  USERDP_RETURN_IF_ERROR(ValidateDomainSize(domain_size));
  const int64_t n = domain_size;
  const bool cube = kind == ClassKind::kParities ||
                    kind == ClassKind::kConjunctions;
  if (cube && !IsPowerOfTwo(n)) {
    return absl::InvalidArgumentError(absl::StrCat(
        std::string(ClassKindName(kind)), " need a domain of size 2^d, got ", n));
  }
  const int64_t members = cube ? n : n + 1;
  if (members > kMaxClassBits / n) {
    return absl::InvalidArgumentError(absl::StrCat(
        std::string(ClassKindName(kind)), " over ", n, " points exceed the class size cap"));
  }
  std::vector<Hypothesis> out;
  out.reserve(members);
  switch (kind) {
    case ClassKind::kThresholds:
      for (int64_t t = 0; t <= n; ++t) {
        Hypothesis h(n);
        for (int64_t x = 0; x < t; ++x) h.Set(x, true);
        out.push_back(std::move(h));
      }
      break;
    case ClassKind::kPoints:
      out.emplace_back(n);
      for (int64_t p = 0; p < n; ++p) {
        Hypothesis h(n);
        h.Set(p, true);
        out.push_back(std::move(h));
      }
      break;
    case ClassKind::kParities:
      for (int64_t a = 0; a < n; ++a) {
        Hypothesis h(n);
        for (int64_t x = 0; x < n; ++x) {
          if (std::popcount(static_cast<uint64_t>(a & x)) & 1) h.Set(x, true);
        }
        out.push_back(std::move(h));
      }
      break;
    case ClassKind::kConjunctions:
      for (int64_t s = 0; s < n; ++s) {
        USERDP_ASSIGN_OR_RETURN(Hypothesis h,
                                MonotoneConjunction(n, static_cast<uint64_t>(s)));
        out.push_back(std::move(h));
      }
      break;
  }
  return ConceptClass::Create(n, std::move(out));
}

absl::StatusOr<RealizableDistribution> RealizableDistribution::Create(
    std::vector<double> weights, Hypothesis target) {
  const int64_t n = static_cast<int64_t>(weights.size());
  USERDP_RETURN_IF_ERROR(ValidateDomainSize(n));
  if (target.domain_size() != n) {
    return absl::InvalidArgumentError(
        absl::StrCat("target over ", target.domain_size(),
                     " points for a distribution over ", n));
  }
  std::vector<double> cumulative(n);
  double total = 0.0;
  for (int64_t x = 0; x < n; ++x) {
    if (!std::isfinite(weights[x]) || weights[x] < 0.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("weight of point ", x, " is ", weights[x]));
    }
    total += weights[x];
    cumulative[x] = total;
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    return absl::InvalidArgumentError(
        absl::StrCat("weights sum to ", total, ", not 1"));
  }
  return RealizableDistribution(std::move(weights), std::move(cumulative),
                                std::move(target));
}

absl::StatusOr<RealizableDistribution> RealizableDistribution::Uniform(
    int64_t domain_size, Hypothesis target) {
  USERDP_RETURN_IF_ERROR(ValidateDomainSize(domain_size));
  return Create(std::vector<double>(domain_size, 1.0 / domain_size),
                std::move(target));
}

int64_t RealizableDistribution::SamplePoint(RandomStream& stream) const {
  const double u = UniformUnit(stream) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) {
    // Rounding pushed u onto the total; fall back to the last positive point.
    int64_t x = domain_size() - 1;
    while (x > 0 && weights_[x] == 0.0) --x;
    return x;
  }
  return static_cast<int64_t>(it - cumulative_.begin());
}

SampleCounts SampleCounts::FromSamples(
    absl::Span<const LabeledSample> samples) {
  std::vector<std::pair<int64_t, bool>> sorted;
  sorted.reserve(samples.size());
  for (const LabeledSample& s : samples) sorted.emplace_back(s.x, s.y);
  std::sort(sorted.begin(), sorted.end());
  SampleCounts counts;
  counts.total = static_cast<int64_t>(samples.size());
  for (const auto& [x, y] : sorted) {
    if (!counts.entries.empty() && counts.entries.back().x == x &&
        counts.entries.back().y == y) {
      ++counts.entries.back().count;
    } else {
      counts.entries.push_back({x, y, 1});
    }
  }
  return counts;
}

absl::StatusOr<double> DistributionalError(const Hypothesis& h,
                                           const RealizableDistribution& d) {
  if (h.domain_size() != d.domain_size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("hypothesis over ", h.domain_size(),
                     " points, distribution over ", d.domain_size()));
  }
  const auto hw = h.words();
  const auto tw = d.target().words();
  double error = 0.0;
  for (size_t w = 0; w < hw.size(); ++w) {
    uint64_t diff = hw[w] ^ tw[w];
    while (diff != 0) {
      const int lead = std::countl_zero(diff);
      error += d.weights()[64 * w + lead];
      diff &= ~(uint64_t{1} << (63 - lead));
    }
  }
  return error;
}

absl::StatusOr<double> EmpiricalError(
    const Hypothesis& h, absl::Span<const LabeledSample> samples) {
  if (samples.empty()) {
    return absl::InvalidArgumentError("empirical error of an empty sample");
  }
  int64_t mistakes = 0;
  for (const LabeledSample& s : samples) {
    if (s.x < 0 || s.x >= h.domain_size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("sample point ", s.x, " outside the domain"));
    }
    if (h(s.x) != s.y) ++mistakes;
  }
  return static_cast<double>(mistakes) / static_cast<double>(samples.size());
}

absl::StatusOr<double> EmpiricalError(const Hypothesis& h,
                                      const SampleCounts& counts) {
  if (counts.total <= 0) {
    return absl::InvalidArgumentError("empirical error of an empty sample");
  }
  int64_t mistakes = 0;
  for (const SampleCounts::Entry& e : counts.entries) {
    if (e.x < 0 || e.x >= h.domain_size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("sample point ", e.x, " outside the domain"));
    }
    if (h(e.x) != e.y) mistakes += e.count;
  }
  return static_cast<double>(mistakes) / static_cast<double>(counts.total);
}

std::vector<LabeledSample> DrawSamples(const RealizableDistribution& d,
                                       int64_t m, RandomStream& stream) {
  std::vector<LabeledSample> samples;
  samples.reserve(std::max<int64_t>(m, 0));
  for (int64_t i = 0; i < m; ++i) {
    const int64_t x = d.SamplePoint(stream);
    samples.push_back({x, d.target()(x)});
  }
  return samples;
}

SampleCounts DrawSampleCounts(const RealizableDistribution& d, int64_t m,
                              RandomStream& stream) {
  if (m <= 0) return SampleCounts{};
  if (m < d.domain_size()) {
    return SampleCounts::FromSamples(DrawSamples(d, m, stream));
  }
  const std::vector<int64_t> per_point =
      SampleMultinomial(stream, m, d.weights());
  SampleCounts counts;
  counts.total = m;
  for (int64_t x = 0; x < d.domain_size(); ++x) {
    if (per_point[x] > 0) counts.entries.push_back({x, d.target()(x),
                                                    per_point[x]});
  }
  return counts;
}

}  // namespace userdp
