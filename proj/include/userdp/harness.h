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

// Experiment configuration, trial orchestration and report emission for the
// command-line tool and the acceptance runs.
//
// Per-trial randomness: trial t uses the root
// Derive(seed, ("trial", [t])).NextSeedRoot(); its distribution is drawn from
// Derive(trial_root, "dist") and the learner runs under trial_root.

#ifndef USERDP_HARNESS_H_
#define USERDP_HARNESS_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"
#include "userdp/concepts.h"
#include "userdp/randomness.h"
#include "userdp/stable_learners.h"
#include "userdp/stats.h"
#include "userdp/user_level_learners.h"

namespace userdp {

// Configurations whose pseudo-stable learner needs more than this many
// samples (m) or boosting runs (k2) are rejected under the paper profile.
inline constexpr double kPaperProfileSampleCap = 1e9;

enum class LearnerKind { kBoost, kRepresentation, kSqConjunctions };

absl::StatusOr<LearnerKind> ParseLearnerKind(std::string_view name);
std::string_view LearnerKindName(LearnerKind kind);

struct ClassSpec {
  ClassKind kind = ClassKind::kThresholds;
  int64_t domain_size = 2;
  // Set when the class is given member by member.
  std::optional<ConceptClass> members;
};

struct DistributionSpec {
  enum class Weights { kUniform, kDirichlet, kExplicit };
  enum class Target { kRandom, kIndex, kHex };

  Weights weights = Weights::kUniform;
  std::vector<double> explicit_weights;
  Target target = Target::kRandom;
  int64_t target_index = 0;
  std::string target_hex;
};

struct CsTestSpec {
  bool coupling = false;
  int64_t outcomes = 8;
  int64_t distributions = 20;
  int64_t draws = 100000;
  double min_tv = 0.05;
  double max_tv = 0.9;
};

struct ShuffleSumSpec {
  int64_t users = 100;
  int64_t ones = 50;
  bool under = false;
};

struct AuditSpec {
  std::string mechanism = "exponential";
  int64_t universe_size = 4;
  int64_t max_users = 4;
  std::vector<double> epsilons = {0.5, 1.0, 2.0};
};

struct ExperimentConfig {
  ClassSpec class_spec;
  DistributionSpec distribution;
  LearningModel model = LearningModel::kCentralApprox;
  // Defaults to kBoost for approximate models and kRepresentation for pure
  // ones.
  std::optional<LearnerKind> learner;
  // Consistent list learner: 0 picks ceil(2 (ln|C| + ln(10/beta)) / alpha)
  // samples and a cap of |C|.
  int64_t list_sample_size = 0;
  double list_threshold = 0.0;
  int64_t list_cap = 0;
  std::optional<double> restrict_zeta;
  double sq_tau = 0.005;

  double alpha = 0.1;
  double beta = 0.1;
  double epsilon = 1.0;
  double delta = 1e-6;
  double user_constant = kDefaultUserConstant;
  std::optional<int64_t> users;
  ConstantProfile profile = ConstantProfile::kDesk;
  std::optional<double> c0;
  double shuffle_r_constant = 1000.0;
  bool disable_noise = false;

  int64_t trials = 1;
  SeedRoot seed;
  std::string out;
  int threads = 1;

  int64_t stability_roots = 50;
  int64_t stability_redraws = 200;
  CsTestSpec cs_test;
  ShuffleSumSpec shuffle_sum;
  AuditSpec audit;

  ProfileConstants constants() const;
  // Range checks that do not depend on the class.
  absl::Status Validate() const;
};

// Unknown keys are rejected.
absl::StatusOr<ExperimentConfig> ConfigFromJson(const nlohmann::json& doc);

absl::StatusOr<std::shared_ptr<const ConceptClass>> BuildClass(
    const ClassSpec& spec);

// Dirichlet(1, ..., 1) weights are normalized gamma draws.
absl::StatusOr<RealizableDistribution> BuildDistribution(
    const DistributionSpec& spec, const ConceptClass& concepts,
    RandomStream& stream);

// The learner a config describes, ready to run.
struct LearnerSetup {
  std::shared_ptr<const ConceptClass> concepts;
  LearnerKind kind = LearnerKind::kBoost;
  std::optional<PseudoStableLearner> pseudo;
  std::optional<ProbabilisticRepresentation> representation;
  // Boosting parameters when kind is kBoost.
  std::optional<StabilityParams> stability;
};

// Rejects paper-profile configurations above kPaperProfileSampleCap, or
// whose parameters overflow, with FailedPrecondition.
absl::StatusOr<LearnerSetup> BuildLearner(const ExperimentConfig& config);

// Runs the config's model once under `root`.
absl::StatusOr<LearnerReport> RunLearner(const ExperimentConfig& config,
                                         const LearnerSetup& setup,
                                         const RealizableDistribution& d,
                                         const SeedRoot& root,
                                         int threads = 1);

SeedRoot TrialRoot(const SeedRoot& seed, int64_t trial);

struct TrialRecord {
  int64_t trial = 0;
  SeedRoot root;
  int64_t users = 0;
  Hypothesis output;
  double err = 0.0;
  bool success = false;
  double vote_concentration = 0.0;
};

struct TrialSummary {
  int64_t trials = 0;
  double success_rate = 0.0;
  QuantileSummary err;
  QuantileSummary vote_concentration;
  double wall_seconds_total = 0.0;
  double wall_seconds_per_trial = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;
  TrialSummary summary;
};

absl::StatusOr<ExperimentResult> RunExperiment(const ExperimentConfig& config);

// Columns: trial,root,users,output,err,success,vote_concentration. Errors
// and concentrations are printed with 17 significant digits so the summary
// can be recomputed exactly.
std::string TrialsCsv(absl::Span<const TrialRecord> records);
// Recomputes everything but the wall-clock fields from TrialsCsv output.
absl::StatusOr<TrialSummary> SummaryFromCsv(std::string_view csv);
nlohmann::json SummaryToJson(const TrialSummary& summary);

// stability subcommand: the configured learner on one distribution drawn
// from Derive(seed, "dist").
absl::StatusOr<StabilityReport> RunStability(const ExperimentConfig& config);
// Columns: root_index,root,modal,frequency,modal_error.
std::string StabilityCsv(const StabilityReport& report);

struct CsTestRecord {
  int64_t index = 0;
  // Marginal mode: TV between P and the empirical law. Coupling mode:
  // d_TV(P, Q), the observed disagreement rate and its exact value.
  double tv = 0.0;
  double disagreement = 0.0;
  double exact_disagreement = 0.0;
};

// Distribution k and its partner come from Derive(seed, ("cs-test", [k]));
// draw j uses Derive(seed, ("cs", [k, j])), shared by P and Q.
absl::StatusOr<std::vector<CsTestRecord>> RunCsTest(
    const ExperimentConfig& config);
// Columns: index,tv,disagreement,exact_disagreement.
std::string CsTestCsv(absl::Span<const CsTestRecord> records);

// Pr[two parties sharing the rejection sampler's stream disagree]:
// sum_i [(P_i - Q_i)^+ (1 - Q_i) + (Q_i - P_i)^+ (1 - P_i)] / sum_i max(P_i, Q_i).
double ExactDisagreement(absl::Span<const double> p,
                         absl::Span<const double> q);

struct ShuffleSumRecord {
  int64_t trial = 0;
  int64_t true_sum = 0;
  int64_t estimate = 0;
  bool violation = false;  // estimate on the wrong side of true_sum
};

absl::StatusOr<std::vector<ShuffleSumRecord>> RunShuffleSum(
    const ExperimentConfig& config);
// Columns: trial,true_sum,estimate,error,violation.
std::string ShuffleSumCsv(absl::Span<const ShuffleSumRecord> records);

struct AuditReport {
  std::string mechanism;
  double epsilon = 0.0;
  double bound = 0.0;  // e^eps
  double max_ratio = 0.0;
  int64_t comparisons = 0;
  bool pass = false;
  std::string worst_case;
};

// Mechanisms: "exponential" (exponent eps/2), "exponential-broken"
// (exponent eps), "uniform" (exponent 0) and "local-rr". Vote-set
// mechanisms compare every pair of vote multisets over universe_size
// elements that differ in one user's vote, for 1..max_users users;
// local-rr compares every message under every pair of items.
absl::StatusOr<AuditReport> AuditMechanism(std::string_view mechanism,
                                           int64_t universe_size,
                                           int64_t max_users, double epsilon);

struct BuildRepRecord {
  int64_t trial = 0;
  Hypothesis target;
  double best_err = 0.0;
  bool covered = false;
};

struct BuildRepResult {
  std::shared_ptr<const ConceptClass> representation;
  int64_t runs = 0;
  std::vector<BuildRepRecord> coverage;
};

// Builds H from config.users runs of the central pure learner on the empty
// dataset (stream Derive(seed, "rep-build")), then checks `trials` targets
// and distributions, drawn from Derive(seed, ("dist", [t])), for a member
// within alpha.
absl::StatusOr<BuildRepResult> RunBuildRep(const ExperimentConfig& config);
// Columns: trial,target,best_err,covered.
std::string BuildRepCsv(absl::Span<const BuildRepRecord> records);

}  // namespace userdp

#endif  // USERDP_HARNESS_H_
