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

#include "userdp/correlated_sampling.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "userdp/sampling.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

constexpr double kMassTolerance = 1e-9;

absl::Status CheckMasses(absl::Span<const double> masses) {
  double total = 0.0;
  for (double m : masses) {
    if (!std::isfinite(m) || m < 0.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("probability mass ", m, " is not a finite nonnegative "
                       "number"));
    }
    total += m;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    return absl::InvalidArgumentError(
        absl::StrCat("probability masses sum to ", total, ", not 1"));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<double>> NormalizeLogWeights(
    absl::Span<const double> log_weights) {
  if (log_weights.empty()) {
    return absl::InvalidArgumentError("no weights to normalize");
  }
  for (double w : log_weights) {
    if (std::isnan(w) || w == std::numeric_limits<double>::infinity()) {
      return absl::InvalidArgumentError(
          absl::StrCat("log weight ", w, " is not usable"));
    }
  }
  const double log_total = LogSumExp(log_weights);
  if (!std::isfinite(log_total)) {
    return absl::InvalidArgumentError("all weights are zero");
  }
  std::vector<double> out(log_weights.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(log_weights[i] - log_total);
  }
  return out;
}

absl::Status IterationCapError(int64_t cap) {
  return absl::ResourceExhaustedError(absl::StrCat(
      "correlated sampling made no acceptance within ", cap,
      " iterations; the outcome space is too large for rejection sampling"));
}

// Top `bits` bits of a single word; matches Hypothesis::Random for N <= 64.
uint64_t HighMask(int64_t bits) {
  return bits == 64 ? ~uint64_t{0} : ~uint64_t{0} << (64 - bits);
}

absl::StatusOr<Hypothesis> FullSpaceRejection(
    const HypothesisDistribution& p, RandomStream& stream,
    const CorrelatedSamplingOptions& options) {
  const int64_t n = p.domain_size();
  if (n <= 64) {
    absl::flat_hash_map<uint64_t, double> mass;
    mass.reserve(p.support().size());
    for (const auto& atom : p.support()) {
      mass[atom.hypothesis.words()[0]] = atom.mass;
    }
    const uint64_t mask = HighMask(n);
    for (int64_t t = 0; t < options.max_iterations; ++t) {
      const uint64_t word = stream.Next() & mask;
      const double u = UniformUnit(stream);
      auto it = mass.find(word);
      if (it != mass.end() && u < it->second) {
        Hypothesis h(n);
        for (int64_t x = 0; x < n; ++x) {
          if ((word >> (63 - x)) & 1) h.Set(x, true);
        }
        return h;
      }
    }
    return IterationCapError(options.max_iterations);
  }
  for (int64_t t = 0; t < options.max_iterations; ++t) {
    Hypothesis proposal = Hypothesis::Random(n, stream);
    const double u = UniformUnit(stream);
    if (u < p.Mass(proposal)) return proposal;
  }
  return IterationCapError(options.max_iterations);
}

// Each hypothesis owns a keyed stream describing a rate-1 Poisson process of
// proposals with uniform marks. Its acceptance time is the first proposal
// with mark below its mass, found by walking successive record-low marks.
// The smallest acceptance time wins.
Hypothesis FullSpaceRace(const HypothesisDistribution& p,
                         RandomStream& stream) {
  const StreamKey race_key = stream.NextKey();
  const Hypothesis* best = nullptr;
  double best_time = std::numeric_limits<double>::infinity();
  for (const auto& atom : p.support()) {
    if (atom.mass <= 0.0) continue;
    const std::vector<uint8_t> bytes = atom.hypothesis.ToBytes();
    RandomStream own = KeyedSubstream(race_key, bytes);
    const double log_mass = std::log(atom.mass);
    double time = SampleStandardExponential(own);
    double log_mark = std::log(UniformOpenUnit(own));
    while (log_mark >= log_mass && time < best_time) {
      time += SampleStandardExponential(own) / std::exp(log_mark);
      log_mark += std::log(UniformOpenUnit(own));
    }
    if (time < best_time) {
      best_time = time;
      best = &atom.hypothesis;
    }
  }
  return *best;
}

}  // namespace

absl::StatusOr<OutcomeSpace> OutcomeSpace::FullHypothesisSpace(
    int64_t domain_size) {
  USERDP_RETURN_IF_ERROR(ValidateDomainSize(domain_size));
  return OutcomeSpace(Kind::kFullHypothesisSpace, domain_size, 0, nullptr);
}

OutcomeSpace OutcomeSpace::HypothesisList(
    std::shared_ptr<const ConceptClass> list) {
  const int64_t n = list->domain_size();
  return OutcomeSpace(Kind::kHypothesisList, n, 0, std::move(list));
}

absl::StatusOr<OutcomeSpace> OutcomeSpace::Grid(int64_t resolution) {
  if (resolution < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("grid resolution must be positive, got ", resolution));
  }
  return OutcomeSpace(Kind::kGrid, 0, resolution, nullptr);
}

double OutcomeSpace::Log2Cardinality() const {
  switch (kind_) {
    case Kind::kFullHypothesisSpace:
      return static_cast<double>(domain_size_);
    case Kind::kHypothesisList:
      return list_->Log2Size();
    case Kind::kGrid:
      return std::log2(static_cast<double>(resolution_ + 1));
  }
  return 0.0;
}

std::optional<uint64_t> OutcomeSpace::Cardinality() const {
  switch (kind_) {
    case Kind::kFullHypothesisSpace:
      if (domain_size_ >= 64) return std::nullopt;
      return uint64_t{1} << domain_size_;
    case Kind::kHypothesisList:
      return static_cast<uint64_t>(list_->size());
    case Kind::kGrid:
      return static_cast<uint64_t>(resolution_ + 1);
  }
  return std::nullopt;
}

absl::StatusOr<uint64_t> OutcomeSpace::Encode(const Hypothesis& h) const {
  if (kind_ == Kind::kGrid) {
    return absl::InvalidArgumentError("grid elements are numbers");
  }
  if (h.domain_size() != domain_size_) {
    return absl::InvalidArgumentError("hypothesis domain does not match space");
  }
  if (kind_ == Kind::kHypothesisList) {
    std::optional<int64_t> index = list_->IndexOf(h);
    if (!index.has_value()) {
      return absl::NotFoundError(
          absl::StrCat("hypothesis ", h.ToHex(), " is not in the list"));
    }
    return static_cast<uint64_t>(*index);
  }
  if (domain_size_ > 64) {
    return absl::UnimplementedError(
        "index encoding of the full space needs at most 64 points");
  }
  return h.words()[0] >> (64 - domain_size_);
}

absl::StatusOr<Hypothesis> OutcomeSpace::DecodeHypothesis(
    uint64_t index) const {
  if (kind_ == Kind::kGrid) {
    return absl::InvalidArgumentError("grid elements are numbers");
  }
  if (kind_ == Kind::kHypothesisList) {
    if (index >= static_cast<uint64_t>(list_->size())) {
      return absl::OutOfRangeError(absl::StrCat("index ", index));
    }
    return (*list_)[static_cast<int64_t>(index)];
  }
  if (domain_size_ > 64) {
    return absl::UnimplementedError(
        "index encoding of the full space needs at most 64 points");
  }
  if (domain_size_ < 64 && (index >> domain_size_) != 0) {
    return absl::OutOfRangeError(absl::StrCat("index ", index));
  }
  Hypothesis h(domain_size_);
  for (int64_t x = 0; x < domain_size_; ++x) {
    if ((index >> (domain_size_ - 1 - x)) & 1) h.Set(x, true);
  }
  return h;
}

absl::StatusOr<uint64_t> OutcomeSpace::EncodeValue(double value) const {
  if (kind_ != Kind::kGrid) {
    return absl::InvalidArgumentError("only grid elements are numbers");
  }
  const double scaled = value * static_cast<double>(resolution_);
  const double index = std::round(scaled);
  if (index < 0 || index > resolution_ ||
      std::abs(index / resolution_ - value) > 1e-12) {
    return absl::InvalidArgumentError(
        absl::StrCat(value, " is not a grid point"));
  }
  return static_cast<uint64_t>(index);
}

absl::StatusOr<double> OutcomeSpace::DecodeValue(uint64_t index) const {
  if (kind_ != Kind::kGrid) {
    return absl::InvalidArgumentError("only grid elements are numbers");
  }
  if (index > static_cast<uint64_t>(resolution_)) {
    return absl::OutOfRangeError(absl::StrCat("index ", index));
  }
  return static_cast<double>(index) / static_cast<double>(resolution_);
}

absl::StatusOr<DiscreteDistribution> DiscreteDistribution::Create(
    std::vector<double> probabilities) {
  if (probabilities.empty()) {
    return absl::InvalidArgumentError("distribution over an empty space");
  }
  USERDP_RETURN_IF_ERROR(CheckMasses(probabilities));
  return DiscreteDistribution(std::move(probabilities));
}

absl::StatusOr<DiscreteDistribution> DiscreteDistribution::FromLogWeights(
    absl::Span<const double> log_weights) {
  USERDP_ASSIGN_OR_RETURN(std::vector<double> p,
                          NormalizeLogWeights(log_weights));
  return Create(std::move(p));
}

DiscreteDistribution DiscreteDistribution::PointMass(int64_t size,
                                                     int64_t index) {
  std::vector<double> p(size, 0.0);
  p[index] = 1.0;
  return DiscreteDistribution(std::move(p));
}

absl::StatusOr<HypothesisDistribution> HypothesisDistribution::Create(
    int64_t domain_size, std::vector<Atom> atoms) {
  USERDP_RETURN_IF_ERROR(ValidateDomainSize(domain_size));
  std::vector<double> masses;
  masses.reserve(atoms.size());
  for (const Atom& atom : atoms) {
    if (atom.hypothesis.domain_size() != domain_size) {
      return absl::InvalidArgumentError(
          "atom hypothesis does not match the domain");
    }
    masses.push_back(atom.mass);
  }
  USERDP_RETURN_IF_ERROR(CheckMasses(masses));
  std::erase_if(atoms, [](const Atom& a) { return a.mass == 0.0; });
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) {
    return a.hypothesis < b.hypothesis;
  });
  for (size_t i = 1; i < atoms.size(); ++i) {
    if (atoms[i].hypothesis == atoms[i - 1].hypothesis) {
      return absl::InvalidArgumentError(absl::StrCat(
          "duplicate atom ", atoms[i].hypothesis.ToHex()));
    }
  }
  return HypothesisDistribution(domain_size, std::move(atoms));
}

absl::StatusOr<HypothesisDistribution> HypothesisDistribution::FromLogWeights(
    int64_t domain_size, std::vector<Hypothesis> hypotheses,
    absl::Span<const double> log_weights) {
  if (hypotheses.size() != log_weights.size()) {
    return absl::InvalidArgumentError("hypotheses and weights differ in size");
  }
  USERDP_ASSIGN_OR_RETURN(std::vector<double> p,
                          NormalizeLogWeights(log_weights));
  std::vector<Atom> atoms;
  atoms.reserve(p.size());
  for (size_t i = 0; i < p.size(); ++i) {
    atoms.push_back({std::move(hypotheses[i]), p[i]});
  }
  return Create(domain_size, std::move(atoms));
}

HypothesisDistribution HypothesisDistribution::PointMass(const Hypothesis& h) {
  return HypothesisDistribution(h.domain_size(), {Atom{h, 1.0}});
}

double HypothesisDistribution::Mass(const Hypothesis& h) const {
  auto it = std::lower_bound(
      support_.begin(), support_.end(), h,
      [](const Atom& a, const Hypothesis& b) { return a.hypothesis < b; });
  if (it == support_.end() || it->hypothesis != h) return 0.0;
  return it->mass;
}

absl::StatusOr<int64_t> CorrelatedSample(
    const DiscreteDistribution& p, RandomStream& stream,
    const CorrelatedSamplingOptions& options) {
  const uint64_t n = static_cast<uint64_t>(p.size());
  for (int64_t t = 0; t < options.max_iterations; ++t) {
    const uint64_t proposal = internal::UniformBelow(stream, n);
    const double u = UniformUnit(stream);
    if (u < p[static_cast<int64_t>(proposal)]) {
      return static_cast<int64_t>(proposal);
    }
  }
  return IterationCapError(options.max_iterations);
}

absl::StatusOr<Hypothesis> CorrelatedSample(
    const HypothesisDistribution& p, RandomStream& stream,
    const CorrelatedSamplingOptions& options) {
  FullSpaceStrategy strategy = options.full_space_strategy;
  if (strategy == FullSpaceStrategy::kAuto) {
    strategy = p.domain_size() <= options.rejection_domain_limit
                   ? FullSpaceStrategy::kRejection
                   : FullSpaceStrategy::kRace;
  }
  if (strategy == FullSpaceStrategy::kRejection) {
    return FullSpaceRejection(p, stream, options);
  }
  return FullSpaceRace(p, stream);
}

absl::StatusOr<double> TotalVariationDistance(const DiscreteDistribution& p,
                                              const DiscreteDistribution& q) {
  if (p.size() != q.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "distributions over spaces of size ", p.size(), " and ", q.size()));
  }
  double sum = 0.0;
  for (int64_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * sum);
}

absl::StatusOr<double> TotalVariationDistance(
    const HypothesisDistribution& p, const HypothesisDistribution& q) {
  if (p.domain_size() != q.domain_size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "distributions over domains of size ", p.domain_size(), " and ",
        q.domain_size()));
  }
  // Merge the two canonically sorted supports.
  const auto& a = p.support();
  const auto& b = q.support();
  size_t i = 0, j = 0;
  double sum = 0.0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].hypothesis < b[j].hypothesis)) {
      sum += a[i++].mass;
    } else if (i == a.size() || b[j].hypothesis < a[i].hypothesis) {
      sum += b[j++].mass;
    } else {
      sum += std::abs(a[i++].mass - b[j++].mass);
    }
  }
  return std::min(1.0, 0.5 * sum);
}

}  // namespace userdp
