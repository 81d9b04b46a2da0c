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

#include "userdp/dp_select.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "userdp/sampling.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

constexpr int64_t kMaxLocalUniverse = int64_t{1} << 20;
constexpr double kMaxLocalEpsilon = 8.0;

absl::Status CheckVote(const OutcomeSpace& universe, const Hypothesis& vote) {
  switch (universe.kind()) {
    case OutcomeSpace::Kind::kGrid:
      return absl::InvalidArgumentError("hypothesis vote in a grid universe");
    case OutcomeSpace::Kind::kFullHypothesisSpace:
      if (vote.domain_size() != universe.domain_size()) {
        return absl::InvalidArgumentError("vote over the wrong domain");
      }
      return absl::OkStatus();
    case OutcomeSpace::Kind::kHypothesisList:
      if (!universe.list()->Contains(vote)) {
        return absl::InvalidArgumentError(
            absl::StrCat("vote ", vote.ToHex(), " is not in the universe"));
      }
      return absl::OkStatus();
  }
  return absl::OkStatus();
}

absl::Status CheckVote(const OutcomeSpace& universe, int64_t vote) {
  const std::optional<uint64_t> size = universe.Cardinality();
  if (!size.has_value()) {
    return absl::InvalidArgumentError("index votes need a countable universe");
  }
  if (vote < 0 || static_cast<uint64_t>(vote) >= *size) {
    return absl::InvalidArgumentError(
        absl::StrCat("vote ", vote, " outside a universe of size ", *size));
  }
  return absl::OkStatus();
}

absl::Status CheckLocalParams(int64_t universe_size, double epsilon) {
  if (universe_size < 1 || universe_size > kMaxLocalUniverse) {
    return absl::InvalidArgumentError(absl::StrCat(
        "local universe size must be in [1, 2^20], got ", universe_size));
  }
  if (!(epsilon > 0.0) || epsilon > kMaxLocalEpsilon) {
    return absl::InvalidArgumentError(
        absl::StrCat("local epsilon must be in (0, 8], got ", epsilon));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<PrivacyParams> PrivacyParams::Create(double epsilon,
                                                    double delta) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError(
        absl::StrCat("epsilon must be positive, got ", epsilon));
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("delta must be in [0, 1), got ", delta));
  }
  return PrivacyParams{epsilon, delta};
}

absl::StatusOr<PrivacyParams> GroupPrivacy(const PrivacyParams& params,
                                           int64_t k) {
  if (k < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("group size must be at least 1, got ", k));
  }
  const double eps = params.epsilon;
  const double kk = static_cast<double>(k);
  return PrivacyParams{kk * eps,
                       params.delta * std::expm1(kk * eps) / std::expm1(eps)};
}

template <typename Element>
absl::StatusOr<VoteSet<Element>> VoteSet<Element>::Create(
    OutcomeSpace universe, std::vector<Element> votes) {
  std::map<Element, int64_t> counts;
  for (const Element& vote : votes) {
    USERDP_RETURN_IF_ERROR(CheckVote(universe, vote));
    ++counts[vote];
  }
  std::vector<VoteTally<Element>> tallies;
  tallies.reserve(counts.size());
  for (auto& [element, count] : counts) tallies.push_back({element, count});
  return VoteSet(std::move(universe), static_cast<int64_t>(votes.size()),
                 std::move(tallies));
}

template <typename Element>
int64_t VoteSet<Element>::CountOf(const Element& e) const {
  auto it = std::lower_bound(
      tallies_.begin(), tallies_.end(), e,
      [](const VoteTally<Element>& t, const Element& x) {
        return t.element < x;
      });
  return it != tallies_.end() && it->element == e ? it->count : 0;
}

template <>
Hypothesis VoteSet<Hypothesis>::FirstElement() const {
  if (universe_.kind() == OutcomeSpace::Kind::kHypothesisList) {
    return (*universe_.list())[0];
  }
  return Hypothesis(universe_.domain_size());
}

template <>
int64_t VoteSet<int64_t>::FirstElement() const {
  return 0;
}

template <typename Element>
Element VoteSet<Element>::Plurality() const {
  if (tallies_.empty()) return FirstElement();
  const VoteTally<Element>* best = &tallies_[0];
  for (const auto& t : tallies_) {
    if (t.count > best->count) best = &t;
  }
  return best->element;
}

template <typename Element>
absl::StatusOr<ApproxSelectTranscript<Element>> ApproxSelect(
    const VoteSet<Element>& votes, const PrivacyParams& params,
    RandomStream& stream, const MechanismOptions& options) {
  if (!(params.delta > 0.0)) {
    return absl::InvalidArgumentError(
        "approximate selection needs delta > 0; use the pure mechanism");
  }
  if (!(params.epsilon > 0.0)) {
    return absl::InvalidArgumentError("epsilon must be positive");
  }
  ApproxSelectTranscript<Element> transcript;
  transcript.threshold =
      1.0 + 2.0 * std::log(1.0 / (2.0 * params.delta)) / params.epsilon;
  transcript.output = votes.FirstElement();
  if (options.disable_noise) {
    transcript.output = votes.Plurality();
    transcript.released = votes.size() > 0;
    for (const auto& t : votes.tallies()) {
      transcript.candidates.push_back(
          {t.element, t.count, 0.0, static_cast<double>(t.count)});
    }
    return transcript;
  }
  const double scale = 2.0 / params.epsilon;
  int best = -1;
  for (const auto& t : votes.tallies()) {
    const double noise = SampleLaplace(stream, scale);
    transcript.candidates.push_back(
        {t.element, t.count, noise, static_cast<double>(t.count) + noise});
    if (best < 0 ||
        transcript.candidates.back().noisy_count >
            transcript.candidates[best].noisy_count) {
      best = static_cast<int>(transcript.candidates.size()) - 1;
    }
  }
  if (best >= 0 &&
      transcript.candidates[best].noisy_count >= transcript.threshold) {
    transcript.released = true;
    transcript.output = transcript.candidates[best].element;
  }
  return transcript;
}

template class VoteSet<Hypothesis>;
template class VoteSet<int64_t>;
template absl::StatusOr<ApproxSelectTranscript<Hypothesis>> ApproxSelect(
    const VoteSet<Hypothesis>&, const PrivacyParams&, RandomStream&,
    const MechanismOptions&);
template absl::StatusOr<ApproxSelectTranscript<int64_t>> ApproxSelect(
    const VoteSet<int64_t>&, const PrivacyParams&, RandomStream&,
    const MechanismOptions&);

double ExponentialMechanismLaw::Probability(int64_t index) const {
  for (const auto& [element, p] : voted) {
    if (element == index) return p;
  }
  return unvoted_probability;
}

absl::StatusOr<ExponentialMechanismLaw> ExponentialLaw(
    const VoteSet<int64_t>& votes, double exponent) {
  const std::optional<uint64_t> size = votes.universe().Cardinality();
  if (!size.has_value() || *size == 0) {
    return absl::InvalidArgumentError("universe must be countable");
  }
  if (!std::isfinite(exponent) || exponent < 0.0) {
    return absl::InvalidArgumentError(
        absl::StrCat("exponent must be finite and nonnegative, got ",
                     exponent));
  }
  const auto& tallies = votes.tallies();
  std::vector<double> log_weights;
  log_weights.reserve(tallies.size() + 1);
  for (const auto& t : tallies) {
    log_weights.push_back(exponent * static_cast<double>(t.count));
  }
  ExponentialMechanismLaw law;
  law.unvoted_count = static_cast<int64_t>(*size - tallies.size());
  if (law.unvoted_count > 0) {
    log_weights.push_back(std::log(static_cast<double>(law.unvoted_count)));
  }
  const double log_total = LogSumExp(log_weights);
  for (size_t i = 0; i < tallies.size(); ++i) {
    law.voted.emplace_back(tallies[i].element,
                           std::exp(log_weights[i] - log_total));
  }
  law.unvoted_probability = std::exp(-log_total);
  return law;
}

absl::StatusOr<int64_t> PureSelect(const VoteSet<int64_t>& votes,
                                   double epsilon, RandomStream& stream,
                                   const MechanismOptions& options) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError(
        absl::StrCat("epsilon must be finite and nonnegative, got ", epsilon));
  }
  if (options.disable_noise) return votes.Plurality();
  const std::optional<uint64_t> size = votes.universe().Cardinality();
  if (!size.has_value() || *size == 0) {
    return absl::InvalidArgumentError("universe must be countable");
  }
  const auto& tallies = votes.tallies();
  std::vector<double> log_weights;
  log_weights.reserve(tallies.size());
  for (const auto& t : tallies) {
    log_weights.push_back(0.5 * epsilon * static_cast<double>(t.count));
  }
  const uint64_t unvoted = *size - tallies.size();
  const double log_in = LogSumExp(log_weights);
  const double log_out =
      unvoted > 0 ? std::log(static_cast<double>(unvoted))
                  : -std::numeric_limits<double>::infinity();
  const std::vector<double> sides = {log_in, log_out};
  const double p_in = std::exp(log_in - LogSumExp(sides));
  if (UniformUnit(stream) < p_in) {
    const double u = UniformUnit(stream);
    double cumulative = 0.0;
    for (size_t i = 0; i < tallies.size(); ++i) {
      cumulative += std::exp(log_weights[i] - log_in);
      if (u < cumulative) return tallies[i].element;
    }
    return tallies.back().element;
  }
  // The rank-th index without votes.
  uint64_t rank = internal::UniformBelow(stream, unvoted);
  int64_t candidate = static_cast<int64_t>(rank);
  for (const auto& t : tallies) {
    if (t.element <= candidate) {
      ++candidate;
    } else {
      break;
    }
  }
  return candidate;
}

double LocalFlipProbability(double epsilon) {
  return 1.0 / (1.0 + std::exp(0.5 * epsilon));
}

absl::StatusOr<LocalMessage> LocalRandomize(int64_t item,
                                            int64_t universe_size,
                                            double epsilon,
                                            RandomStream& stream,
                                            const MechanismOptions& options) {
  USERDP_RETURN_IF_ERROR(CheckLocalParams(universe_size, epsilon));
  if (item < 0 || item >= universe_size) {
    return absl::InvalidArgumentError(absl::StrCat(
        "item ", item, " outside a universe of size ", universe_size));
  }
  LocalMessage message(universe_size, 0);
  message[item] = 1;
  if (options.disable_noise) return message;
  const double q = LocalFlipProbability(epsilon);
  for (uint8_t& bit : message) {
    if (UniformUnit(stream) < q) bit ^= 1;
  }
  return message;
}

absl::StatusOr<double> LocalMessageProbability(const LocalMessage& message,
                                               int64_t item, double epsilon) {
  const int64_t n = static_cast<int64_t>(message.size());
  USERDP_RETURN_IF_ERROR(CheckLocalParams(n, epsilon));
  if (item < 0 || item >= n) {
    return absl::InvalidArgumentError("item outside the universe");
  }
  const double q = LocalFlipProbability(epsilon);
  double log_p = 0.0;
  for (int64_t u = 0; u < n; ++u) {
    const bool flipped = (message[u] != 0) != (u == item);
    log_p += std::log(flipped ? q : 1.0 - q);
  }
  return std::exp(log_p);
}

double HistogramEstimate::Estimate(int64_t element) const {
  auto it = estimates.find(element);
  return it == estimates.end() ? 0.0 : it->second;
}

absl::StatusOr<LocalAggregateResult> LocalAggregate(
    absl::Span<const LocalMessage> messages, int64_t universe_size,
    double epsilon, const MechanismOptions& options) {
  USERDP_RETURN_IF_ERROR(CheckLocalParams(universe_size, epsilon));
  std::vector<int64_t> ones(universe_size, 0);
  for (const LocalMessage& m : messages) {
    if (static_cast<int64_t>(m.size()) != universe_size) {
      return absl::InvalidArgumentError(
          absl::StrCat("message of length ", m.size(), " for a universe of ",
                       universe_size));
    }
    for (int64_t u = 0; u < universe_size; ++u) ones[u] += m[u] != 0;
  }
  const double q = options.disable_noise ? 0.0 : LocalFlipProbability(epsilon);
  const double n = static_cast<double>(messages.size());
  LocalAggregateResult result;
  result.histogram.universe_size = universe_size;
  double best = -std::numeric_limits<double>::infinity();
  for (int64_t u = 0; u < universe_size; ++u) {
    const double estimate =
        (static_cast<double>(ones[u]) - n * q) / (1.0 - 2.0 * q);
    result.histogram.estimates[u] = estimate;
    if (estimate > best) {
      best = estimate;
      result.argmax = u;
    }
  }
  return result;
}

}  // namespace userdp
