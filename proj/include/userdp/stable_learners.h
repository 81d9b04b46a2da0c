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

// Pseudo-globally stable learners: a learner that, given shared public
// randomness, outputs one canonical hypothesis with high probability over the
// draw of its sample.

#ifndef USERDP_STABLE_LEARNERS_H_
#define USERDP_STABLE_LEARNERS_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "userdp/concepts.h"
#include "userdp/correlated_sampling.h"
#include "userdp/randomness.h"
#include "userdp/sample_source.h"
#include "userdp/stats.h"

namespace userdp {

// "paper" uses the literal 10^6 leading constants and beta^4 denominators.
// "desk" replaces 10^6 with c0 and beta^4 with beta^2.
enum class ConstantProfile { kPaper, kDesk };

absl::StatusOr<ConstantProfile> ParseProfile(std::string_view name);
std::string_view ProfileName(ConstantProfile profile);

struct ProfileConstants {
  ConstantProfile profile = ConstantProfile::kDesk;
  double c0 = 10.0;

  double Leading() const {
    return profile == ConstantProfile::kPaper ? 1e6 : c0;
  }
  // beta^4 (paper) or beta^2 (desk).
  double BetaPower(double beta) const;
};

using ListLearnerFn =
    std::function<absl::StatusOr<std::vector<Hypothesis>>(SampleSource&)>;

// Outputs at most `list_bound` hypotheses per run from `sample_size` samples.
class ListStableLearner {
 public:
  ListStableLearner(ListLearnerFn fn, int64_t sample_size, int64_t list_bound,
                    double eta)
      : fn_(std::move(fn)),
        sample_size_(sample_size),
        list_bound_(list_bound),
        eta_(eta) {}

  // Fails if the wrapped procedure returns more than list_bound hypotheses.
  absl::StatusOr<std::vector<Hypothesis>> Run(SampleSource& source) const;

  int64_t sample_size() const { return sample_size_; }
  int64_t list_bound() const { return list_bound_; }
  double eta() const { return eta_; }

 private:
  ListLearnerFn fn_;
  int64_t sample_size_;
  int64_t list_bound_;
  double eta_;
};

// Members h of `concepts` with err_emp(h, S) <= threshold on `sample_size`
// samples, truncated to the first list_cap in canonical order.
ListStableLearner ConsistentListLearner(
    std::shared_ptr<const ConceptClass> concepts, double threshold,
    int64_t list_cap, int64_t sample_size);

// ceil(100 ln(L / zeta) / alpha^2).
int64_t RestrictionSampleSize(int64_t list_bound, double alpha, double zeta);

// Runs `inner`, then keeps the hypotheses with empirical error <= 1.5 alpha on
// RestrictionSampleSize fresh samples.
absl::StatusOr<ListStableLearner> RestrictAccuracy(ListStableLearner inner,
                                                   double alpha, double zeta);

struct PseudoStableGuarantee {
  double alpha = 0.0;
  double beta = 0.0;
  double eta = 0.0;
  double nu = 0.0;
};

using PseudoLearnerFn = std::function<absl::StatusOr<Hypothesis>(
    SampleSource&, const SeedRoot& public_root)>;
using PublicClassFn =
    std::function<absl::StatusOr<std::shared_ptr<const ConceptClass>>(
        const SeedRoot& public_root)>;

// A learner whose output is determined by (sample, public root).
class PseudoStableLearner {
 public:
  // Domain size of a learner that accepts samples over any domain.
  static constexpr int64_t kAnyDomain = -1;

  PseudoStableLearner(PseudoLearnerFn fn, int64_t domain_size,
                      int64_t sample_size, PseudoStableGuarantee guarantee,
                      ConstantProfile profile,
                      PublicClassFn public_class = nullptr)
      : fn_(std::move(fn)),
        domain_size_(domain_size),
        sample_size_(sample_size),
        guarantee_(guarantee),
        profile_(profile),
        public_class_(std::move(public_class)) {}

  absl::StatusOr<Hypothesis> Run(SampleSource& source,
                                 const SeedRoot& public_root) const;

  // kAnyDomain if the learner is not tied to one domain.
  int64_t domain_size() const { return domain_size_; }
  // Samples consumed per run (saturates at INT64_MAX).
  int64_t sample_size() const { return sample_size_; }
  const PseudoStableGuarantee& guarantee() const { return guarantee_; }
  // Constants the learner was built with; the declared guarantee only holds
  // under kPaper.
  ConstantProfile profile() const { return profile_; }

  // Learners whose outputs are confined to a class fixed by the public
  // randomness report that class.
  bool has_public_class() const { return public_class_ != nullptr; }
  absl::StatusOr<std::shared_ptr<const ConceptClass>> PublicClass(
      const SeedRoot& public_root) const;

 private:
  PseudoLearnerFn fn_;
  int64_t domain_size_;
  int64_t sample_size_;
  PseudoStableGuarantee guarantee_;
  ConstantProfile profile_;
  PublicClassFn public_class_;
};

// tau = eta / 2, lambda = ln(L / (beta tau)), gamma = C lambda / tau,
// k1 = ceil(C lambda / tau^2), k2 = ceil(C gamma^2 lambda / beta^{4|2}),
// with C the profile's leading constant.
struct StabilityParams {
  double tau = 0.0;
  double gamma = 0.0;
  int64_t k1 = 0;
  int64_t k2 = 0;
  ProfileConstants constants;

  // Fails when k1 or k2 does not fit in 62 bits.
  static absl::StatusOr<StabilityParams> Compute(double eta,
                                                 int64_t list_bound,
                                                 double beta,
                                                 ProfileConstants constants);
};

// Hypotheses appearing in at least tau * k1 of k1 lists, canonical order.
absl::StatusOr<std::vector<Hypothesis>> BuildCandidateSet(
    const ListStableLearner& learner, int64_t k1, double tau,
    SampleSource& source);

// Fraction of k2 runs whose list contains each candidate, in input order.
absl::StatusOr<std::vector<double>> EstimateInclusionFrequencies(
    const ListStableLearner& learner, absl::Span<const Hypothesis> candidates,
    int64_t k2, SampleSource& source);

struct BoostOptions {
  CorrelatedSamplingOptions sampling;
};

// k1 runs build the candidate set, k2 runs estimate inclusion frequencies Q,
// and the output is a correlated sample from P(h) ~ exp(gamma Q(h)) over the
// full hypothesis space, using Derive(public_root, "cs"). An empty candidate
// set is an error.
PseudoStableLearner BoostToPseudoStable(ListStableLearner learner,
                                        double alpha, double beta,
                                        const StabilityParams& params,
                                        BoostOptions options = {});

class ProbabilisticRepresentation {
 public:
  using Sampler =
      std::function<absl::StatusOr<std::shared_ptr<const ConceptClass>>(
          RandomStream&)>;

  ProbabilisticRepresentation(Sampler sampler, int64_t domain_size,
                              double size_bits, double alpha, double beta)
      : sampler_(std::move(sampler)),
        domain_size_(domain_size),
        size_bits_(size_bits),
        alpha_(alpha),
        beta_(beta) {}

  // Fails if the sampled class is empty or over another domain.
  absl::StatusOr<std::shared_ptr<const ConceptClass>> Sample(
      RandomStream& stream) const;

  int64_t domain_size() const { return domain_size_; }
  // d: max over the support of log2 |H|.
  double size_bits() const { return size_bits_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  Sampler sampler_;
  int64_t domain_size_;
  double size_bits_;
  double alpha_;
  double beta_;
};

// Point mass on the class itself: a (0, 0) representation with
// d = log2 |C|.
ProbabilisticRepresentation TrivialRepresentation(
    std::shared_ptr<const ConceptClass> concepts);

// gamma = 2 (d + ln(1/beta) + 10) / alpha,
// m = ceil(C gamma^2 d ln(1/beta) / beta^{4|2}).
struct RepLearnerParams {
  double gamma = 0.0;
  int64_t sample_size = 0;

  static absl::StatusOr<RepLearnerParams> Compute(double size_bits,
                                                  double alpha, double beta,
                                                  ProfileConstants constants);
};

struct RepLearnerOptions {
  // Test hook replacing the computed gamma.
  std::optional<double> gamma_override;
  CorrelatedSamplingOptions sampling;
};

// H = R(Derive(public_root, "rep-H")); P(h) ~ exp(-gamma err_emp(h, S)) on H
// from m samples; output CS(P; Derive(public_root, "cs")) over H.
absl::StatusOr<PseudoStableLearner> RepStableLearner(
    const ProbabilisticRepresentation& representation, double alpha,
    double beta, ProfileConstants constants, RepLearnerOptions options = {});

struct StabilityRecord {
  SeedRoot root;
  Hypothesis modal;
  // Fraction of redraws that output the modal hypothesis.
  double frequency = 0.0;
  double modal_error = 0.0;
};

struct StabilityReport {
  std::vector<StabilityRecord> records;
  int64_t redraws = 0;
  QuantileSummary frequency;
  QuantileSummary modal_error;
  ConstantProfile profile = ConstantProfile::kDesk;
};

// Root r uses Derive(seed, ("stab-root", [r])).NextSeedRoot() as public
// randomness; redraw j samples data from Derive(seed, ("stab-data", [r, j])).
absl::StatusOr<StabilityReport> MeasureStability(
    const PseudoStableLearner& learner,
    const RealizableDistribution& distribution, int64_t roots,
    int64_t redraws, const SeedRoot& seed, int threads = 1);

}  // namespace userdp

#endif  // USERDP_STABLE_LEARNERS_H_
