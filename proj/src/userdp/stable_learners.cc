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

#include "userdp/stable_learners.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

constexpr double kMaxCount = 4.611686018427387904e18;  // 2^62

int64_t SaturatingMultiply(int64_t a, int64_t b) {
  int64_t out;
  if (__builtin_mul_overflow(a, b, &out)) {
    return std::numeric_limits<int64_t>::max();
  }
  return out;
}

int64_t SaturatingAdd(int64_t a, int64_t b) {
  int64_t out;
  if (__builtin_add_overflow(a, b, &out)) {
    return std::numeric_limits<int64_t>::max();
  }
  return out;
}

absl::Status CheckUnitInterval(const char* name, double v) {
  if (!(v > 0.0 && v < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat(name, " must be in (0, 1), got ", v));
  }
  return absl::OkStatus();
}

absl::StatusOr<int64_t> CeilCount(const char* name, double value) {
  if (!(value <= kMaxCount)) {
    return absl::ResourceExhaustedError(
        absl::StrCat(name, " = ", value, " is too large to run"));
  }
  return static_cast<int64_t>(std::ceil(value));
}

// Words of the sampled positive and negative points.
struct LabelMasks {
  std::vector<uint64_t> positive;
  std::vector<uint64_t> negative;
};

LabelMasks MasksOf(const SampleCounts& counts, int64_t domain_size) {
  const size_t words = static_cast<size_t>((domain_size + 63) / 64);
  LabelMasks masks{std::vector<uint64_t>(words, 0),
                   std::vector<uint64_t>(words, 0)};
  for (const auto& e : counts.entries) {
    auto& target = e.y ? masks.positive : masks.negative;
    target[e.x >> 6] |= uint64_t{1} << (63 - (e.x & 63));
  }
  return masks;
}

bool ConsistentWith(const Hypothesis& h, const LabelMasks& masks) {
  const auto words = h.words();
  for (size_t w = 0; w < words.size(); ++w) {
    if ((words[w] & masks.negative[w]) != 0) return false;
    if ((~words[w] & masks.positive[w]) != 0) return false;
  }
  return true;
}

}  // namespace

absl::StatusOr<ConstantProfile> ParseProfile(std::string_view name) {
  if (name == "paper") return ConstantProfile::kPaper;
  if (name == "desk") return ConstantProfile::kDesk;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown profile '", std::string(name), "'"));
}

std::string_view ProfileName(ConstantProfile profile) {
  return profile == ConstantProfile::kPaper ? "paper" : "desk";
}

double ProfileConstants::BetaPower(double beta) const {
  return profile == ConstantProfile::kPaper ? std::pow(beta, 4)
                                            : beta * beta;
}

absl::StatusOr<std::vector<Hypothesis>> ListStableLearner::Run(
    SampleSource& source) const {
  USERDP_ASSIGN_OR_RETURN(std::vector<Hypothesis> list, fn_(source));
  if (static_cast<int64_t>(list.size()) > list_bound_) {
    return absl::InternalError(
        absl::StrCat("list learner returned ", list.size(),
                     " hypotheses, bound is ", list_bound_));
  }
  return list;
}

ListStableLearner ConsistentListLearner(
    std::shared_ptr<const ConceptClass> concepts, double threshold,
    int64_t list_cap, int64_t sample_size) {
  auto fn = [concepts, threshold, list_cap, sample_size](
                SampleSource& source)
      -> absl::StatusOr<std::vector<Hypothesis>> {
    if (source.domain_size() != concepts->domain_size()) {
      return absl::InvalidArgumentError("sample domain does not match class");
    }
    USERDP_ASSIGN_OR_RETURN(SampleCounts counts,
                            source.DrawCounts(sample_size));
    if (counts.total <= 0) {
      return absl::InvalidArgumentError("list learner needs samples");
    }
    std::vector<Hypothesis> list;
    const double allowed = threshold * static_cast<double>(counts.total);
    if (allowed < 1.0) {
      // No mistakes allowed.
      const LabelMasks masks = MasksOf(counts, concepts->domain_size());
      for (const Hypothesis& h : concepts->members()) {
        if (static_cast<int64_t>(list.size()) >= list_cap) break;
        if (ConsistentWith(h, masks)) list.push_back(h);
      }
      return list;
    }
    for (const Hypothesis& h : concepts->members()) {
      if (static_cast<int64_t>(list.size()) >= list_cap) break;
      USERDP_ASSIGN_OR_RETURN(double err, EmpiricalError(h, counts));
      if (err <= threshold) list.push_back(h);
    }
    return list;
  };
  return ListStableLearner(std::move(fn), sample_size, list_cap, 1.0);
}

int64_t RestrictionSampleSize(int64_t list_bound, double alpha, double zeta) {
  return static_cast<int64_t>(std::ceil(
      100.0 * std::log(static_cast<double>(list_bound) / zeta) /
      (alpha * alpha)));
}

absl::StatusOr<ListStableLearner> RestrictAccuracy(ListStableLearner inner,
                                                   double alpha,
                                                   double zeta) {
  USERDP_RETURN_IF_ERROR(CheckUnitInterval("alpha", alpha));
  USERDP_RETURN_IF_ERROR(CheckUnitInterval("zeta", zeta));
  const int64_t extra = RestrictionSampleSize(inner.list_bound(), alpha, zeta);
  const int64_t total = SaturatingAdd(inner.sample_size(), extra);
  const int64_t bound = inner.list_bound();
  const double eta = inner.eta();
  auto fn = [inner = std::move(inner), alpha, extra](SampleSource& source)
      -> absl::StatusOr<std::vector<Hypothesis>> {
    USERDP_ASSIGN_OR_RETURN(std::vector<Hypothesis> list, inner.Run(source));
    if (list.empty()) return list;
    USERDP_ASSIGN_OR_RETURN(std::vector<int64_t> mistakes,
                            source.DrawMistakeCounts(extra, list));
    std::vector<Hypothesis> kept;
    for (size_t j = 0; j < list.size(); ++j) {
      const double err =
          static_cast<double>(mistakes[j]) / static_cast<double>(extra);
      if (err <= 1.5 * alpha) kept.push_back(std::move(list[j]));
    }
    return kept;
  };
  return ListStableLearner(std::move(fn), total, bound, eta);
}

absl::StatusOr<Hypothesis> PseudoStableLearner::Run(
    SampleSource& source, const SeedRoot& public_root) const {
  if (domain_size_ != kAnyDomain && source.domain_size() != domain_size_) {
    return absl::InvalidArgumentError(
        absl::StrCat("learner over ", domain_size_,
                     " points given samples over ", source.domain_size()));
  }
  return fn_(source, public_root);
}

absl::StatusOr<std::shared_ptr<const ConceptClass>>
PseudoStableLearner::PublicClass(const SeedRoot& public_root) const {
  if (public_class_ == nullptr) {
    return absl::FailedPreconditionError(
        "learner has no publicly determined class");
  }
  return public_class_(public_root);
}

absl::StatusOr<StabilityParams> StabilityParams::Compute(
    double eta, int64_t list_bound, double beta, ProfileConstants constants) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("eta must be in (0, 1], got ", eta));
  }
  if (list_bound < 1) {
    return absl::InvalidArgumentError("list bound must be positive");
  }
  USERDP_RETURN_IF_ERROR(CheckUnitInterval("beta", beta));
  if (!(constants.Leading() > 0.0)) {
    return absl::InvalidArgumentError("c0 must be positive");
  }
  StabilityParams params;
  params.constants = constants;
  params.tau = 0.5 * eta;
  const double c = constants.Leading();
  const double lambda =
      std::log(static_cast<double>(list_bound) / (beta * params.tau));
  params.gamma = c * lambda / params.tau;
  USERDP_ASSIGN_OR_RETURN(params.k1,
                          CeilCount("k1", c * lambda /
                                              (params.tau * params.tau)));
  USERDP_ASSIGN_OR_RETURN(
      params.k2, CeilCount("k2", c * params.gamma * params.gamma * lambda /
                                     constants.BetaPower(beta)));
  return params;
}

absl::StatusOr<std::vector<Hypothesis>> BuildCandidateSet(
    const ListStableLearner& learner, int64_t k1, double tau,
    SampleSource& source) {
  std::map<Hypothesis, int64_t> appearances;
  for (int64_t i = 0; i < k1; ++i) {
    USERDP_ASSIGN_OR_RETURN(std::vector<Hypothesis> list, learner.Run(source));
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    for (Hypothesis& h : list) ++appearances[std::move(h)];
  }
  std::vector<Hypothesis> candidates;
  const double needed = tau * static_cast<double>(k1);
  for (const auto& [h, count] : appearances) {
    if (static_cast<double>(count) >= needed) candidates.push_back(h);
  }
  return candidates;
}

absl::StatusOr<std::vector<double>> EstimateInclusionFrequencies(
    const ListStableLearner& learner, absl::Span<const Hypothesis> candidates,
    int64_t k2, SampleSource& source) {
  absl::flat_hash_map<Hypothesis, size_t> index;
  for (size_t j = 0; j < candidates.size(); ++j) index[candidates[j]] = j;
  std::vector<int64_t> hits(candidates.size(), 0);
  std::vector<int64_t> last_run(candidates.size(), -1);
  for (int64_t i = 0; i < k2; ++i) {
    USERDP_ASSIGN_OR_RETURN(std::vector<Hypothesis> list, learner.Run(source));
    for (const Hypothesis& h : list) {
      auto it = index.find(h);
      if (it == index.end()) continue;
      const size_t j = it->second;
      if (last_run[j] == i) continue;
      last_run[j] = i;
      ++hits[j];
    }
  }
  std::vector<double> frequencies(candidates.size());
  for (size_t j = 0; j < candidates.size(); ++j) {
    frequencies[j] = k2 > 0 ? static_cast<double>(hits[j]) /
                                  static_cast<double>(k2)
                            : 0.0;
  }
  return frequencies;
}

PseudoStableLearner BoostToPseudoStable(ListStableLearner learner,
                                        double alpha, double beta,
                                        const StabilityParams& params,
                                        BoostOptions options) {
  const int64_t runs = SaturatingAdd(params.k1, params.k2);
  const int64_t sample_size = SaturatingMultiply(runs, learner.sample_size());
  PseudoStableGuarantee guarantee{alpha, beta, 1.0 - beta, 1.0 - beta};
  auto fn = [learner = std::move(learner), params, options](
                SampleSource& source,
                const SeedRoot& public_root) -> absl::StatusOr<Hypothesis> {
    USERDP_ASSIGN_OR_RETURN(
        std::vector<Hypothesis> candidates,
        BuildCandidateSet(learner, params.k1, params.tau, source));
    if (candidates.empty()) {
      return absl::FailedPreconditionError(absl::StrCat(
          "no hypothesis appeared in tau * k1 = ", params.tau * params.k1,
          " of the k1 lists; lower tau or raise k1"));
    }
    USERDP_ASSIGN_OR_RETURN(
        std::vector<double> q,
        EstimateInclusionFrequencies(learner, candidates, params.k2, source));
    std::vector<double> log_weights(q.size());
    for (size_t j = 0; j < q.size(); ++j) log_weights[j] = params.gamma * q[j];
    USERDP_ASSIGN_OR_RETURN(
        HypothesisDistribution p,
        HypothesisDistribution::FromLogWeights(source.domain_size(),
                                               std::move(candidates),
                                               log_weights));
    USERDP_ASSIGN_OR_RETURN(RandomStream stream,
                            Derive(public_root, SubstreamLabel("cs")));
    return CorrelatedSample(p, stream, options.sampling);
  };
  return PseudoStableLearner(std::move(fn), PseudoStableLearner::kAnyDomain,
                             sample_size,
                             guarantee, params.constants.profile);
}

absl::StatusOr<std::shared_ptr<const ConceptClass>>
ProbabilisticRepresentation::Sample(RandomStream& stream) const {
  USERDP_ASSIGN_OR_RETURN(std::shared_ptr<const ConceptClass> h,
                          sampler_(stream));
  if (h == nullptr || h->size() == 0) {
    return absl::FailedPreconditionError("representation sampled no class");
  }
  if (h->domain_size() != domain_size_) {
    return absl::InvalidArgumentError(
        "representation sampled a class over another domain");
  }
  return h;
}

ProbabilisticRepresentation TrivialRepresentation(
    std::shared_ptr<const ConceptClass> concepts) {
  const int64_t domain_size = concepts->domain_size();
  const double bits = concepts->Log2Size();
  return ProbabilisticRepresentation(
      [concepts](RandomStream&)
          -> absl::StatusOr<std::shared_ptr<const ConceptClass>> {
        return concepts;
      },
      domain_size, bits, 0.0, 0.0);
}

absl::StatusOr<RepLearnerParams> RepLearnerParams::Compute(
    double size_bits, double alpha, double beta, ProfileConstants constants) {
  USERDP_RETURN_IF_ERROR(CheckUnitInterval("alpha", alpha));
  USERDP_RETURN_IF_ERROR(CheckUnitInterval("beta", beta));
  if (!(size_bits >= 0.0) || !std::isfinite(size_bits)) {
    return absl::InvalidArgumentError("representation size must be finite");
  }
  const double log_inv_beta = std::log(1.0 / beta);
  RepLearnerParams params;
  params.gamma = 2.0 * (size_bits + log_inv_beta + 10.0) / alpha;
  USERDP_ASSIGN_OR_RETURN(
      params.sample_size,
      CeilCount("m", constants.Leading() * params.gamma * params.gamma *
                         size_bits * log_inv_beta /
                         constants.BetaPower(beta)));
  return params;
}

absl::StatusOr<PseudoStableLearner> RepStableLearner(
    const ProbabilisticRepresentation& representation, double alpha,
    double beta, ProfileConstants constants, RepLearnerOptions options) {
  USERDP_ASSIGN_OR_RETURN(
      RepLearnerParams params,
      RepLearnerParams::Compute(representation.size_bits(), alpha, beta,
                                constants));
  const double gamma = options.gamma_override.value_or(params.gamma);
  const int64_t m = params.sample_size;
  auto public_class = [representation](const SeedRoot& root)
      -> absl::StatusOr<std::shared_ptr<const ConceptClass>> {
    USERDP_ASSIGN_OR_RETURN(RandomStream stream,
                            Derive(root, SubstreamLabel("rep-H")));
    return representation.Sample(stream);
  };
  auto fn = [public_class, gamma, m, sampling = options.sampling](
                SampleSource& source,
                const SeedRoot& root) -> absl::StatusOr<Hypothesis> {
    USERDP_ASSIGN_OR_RETURN(std::shared_ptr<const ConceptClass> h,
                            public_class(root));
    if (h->size() == 1) return (*h)[0];
    std::vector<double> log_weights(h->size(), 0.0);
    if (m > 0) {
      USERDP_ASSIGN_OR_RETURN(std::vector<int64_t> mistakes,
                              source.DrawMistakeCounts(m, h->members()));
      for (size_t j = 0; j < mistakes.size(); ++j) {
        log_weights[j] = -gamma * static_cast<double>(mistakes[j]) /
                         static_cast<double>(m);
      }
    }
    USERDP_ASSIGN_OR_RETURN(DiscreteDistribution p,
                            DiscreteDistribution::FromLogWeights(log_weights));
    USERDP_ASSIGN_OR_RETURN(RandomStream stream,
                            Derive(root, SubstreamLabel("cs")));
    USERDP_ASSIGN_OR_RETURN(int64_t index,
                            CorrelatedSample(p, stream, sampling));
    return (*h)[index];
  };
  PseudoStableGuarantee guarantee{alpha, beta, 1.0 - beta, 1.0 - beta};
  return PseudoStableLearner(std::move(fn), representation.domain_size(), m,
                             guarantee, constants.profile,
                             std::move(public_class));
}

absl::StatusOr<StabilityReport> MeasureStability(
    const PseudoStableLearner& learner,
    const RealizableDistribution& distribution, int64_t roots,
    int64_t redraws, const SeedRoot& seed, int threads) {
  if (roots < 1 || redraws < 1) {
    return absl::InvalidArgumentError("roots and redraws must be positive");
  }
  StabilityReport report;
  report.redraws = redraws;
  report.profile = learner.profile();
  report.records.resize(roots);
  USERDP_RETURN_IF_ERROR(ParallelFor(roots, threads, [&](int64_t r)
                                                         -> absl::Status {
    const uint64_t ur = static_cast<uint64_t>(r);
    USERDP_ASSIGN_OR_RETURN(RandomStream root_stream,
                            Derive(seed, SubstreamLabel("stab-root", {ur})));
    const SeedRoot public_root = root_stream.NextSeedRoot();
    std::map<Hypothesis, int64_t> outputs;
    for (int64_t j = 0; j < redraws; ++j) {
      USERDP_ASSIGN_OR_RETURN(
          RandomStream data,
          Derive(seed, SubstreamLabel("stab-data",
                                      {ur, static_cast<uint64_t>(j)})));
      DistributionSampleSource source(&distribution, std::move(data));
      USERDP_ASSIGN_OR_RETURN(Hypothesis h, learner.Run(source, public_root));
      ++outputs[std::move(h)];
    }
    const auto* best = &*outputs.begin();
    for (const auto& entry : outputs) {
      if (entry.second > best->second) best = &entry;
    }
    StabilityRecord& record = report.records[r];
    record.root = public_root;
    record.modal = best->first;
    record.frequency =
        static_cast<double>(best->second) / static_cast<double>(redraws);
    USERDP_ASSIGN_OR_RETURN(record.modal_error,
                            DistributionalError(record.modal, distribution));
    return absl::OkStatus();
  }));
  std::vector<double> frequency, error;
  for (const StabilityRecord& record : report.records) {
    frequency.push_back(record.frequency);
    error.push_back(record.modal_error);
  }
  report.frequency = Summarize(frequency);
  report.modal_error = Summarize(error);
  return report;
}

}  // namespace userdp
