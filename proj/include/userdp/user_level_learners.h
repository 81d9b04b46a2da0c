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

// User-level private learners. Every simulated user runs the same
// pseudo-stable learner on its own samples with a shared public root, and a
// private selection mechanism picks among the users' votes.
//
// Stream layout under a learner root:
//   Derive(root, "public").NextSeedRoot()   public root shared by all users
//   Derive(root, ("user-data", [i]))         user i's samples (simulation)
//   Derive(root, "noise")                    central mechanism noise
//   Derive(root, ("rr", [i]))                user i's local randomizer
//   Derive(root, "shuffle").NextSeedRoot()   root of the shuffle protocol

#ifndef USERDP_USER_LEVEL_LEARNERS_H_
#define USERDP_USER_LEVEL_LEARNERS_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "userdp/concepts.h"
#include "userdp/dp_select.h"
#include "userdp/randomness.h"
#include "userdp/shuffle.h"
#include "userdp/stable_learners.h"

namespace userdp {

inline constexpr double kDefaultUserConstant = 20.0;
// Reports whose top vote share is below this are flagged.
inline constexpr double kConcentrationFloor = 0.8;

enum class LearningModel { kCentralApprox, kCentralPure, kLocal, kShuffle };

absl::StatusOr<LearningModel> ParseLearningModel(std::string_view name);
std::string_view LearningModelName(LearningModel model);

struct UserDataset {
  RealizableDistribution source;
  std::vector<std::vector<LabeledSample>> users;

  // Checks n >= 1, m >= 1, equal batch sizes and points inside the domain.
  absl::Status Validate() const;
};

// Each user's samples are drawn from `source` with the stream
// Derive(root, ("user-data", [i])).
absl::StatusOr<UserDataset> SimulateDataset(
    const RealizableDistribution& source, int64_t users,
    int64_t samples_per_user, const SeedRoot& root);

struct LearnerOptions {
  double user_constant = kDefaultUserConstant;  // K
  // Replaces the computed user count. Zero is allowed and means no votes.
  std::optional<int64_t> users;
  // Replays these batches instead of simulating users; the user count is
  // the number of batches.
  const UserDataset* dataset = nullptr;
  int threads = 1;
  MechanismOptions mechanism;
  SummationConfig summation;
};

struct LearnerReport {
  LearningModel model = LearningModel::kCentralApprox;
  Hypothesis output;
  double err = 0.0;
  std::vector<Hypothesis> per_user_votes;
  // Largest vote share; 0 with no users.
  double vote_concentration = 0.0;
  bool low_concentration = false;

  int64_t users = 0;
  int64_t users_formula = 0;
  int64_t samples_per_user = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  double user_constant = kDefaultUserConstant;
  ConstantProfile profile = ConstantProfile::kDesk;
};

// ceil(K ln(1/(delta beta)) / eps). Reads nothing about the class.
absl::StatusOr<int64_t> CentralApproxUserCount(double epsilon, double delta,
                                               double beta, double k);
// ceil(K (d + ln(1/beta)) / eps).
absl::StatusOr<int64_t> CentralPureUserCount(double size_bits, double epsilon,
                                             double beta, double k);
// ceil(K (d + ln(1/beta)) / eps^2).
absl::StatusOr<int64_t> LocalUserCount(double size_bits, double epsilon,
                                       double beta, double k);
// ceil(K ln(1/(beta delta)) / eps).
absl::StatusOr<int64_t> ShuffleUserCount(double epsilon, double delta,
                                         double beta, double k);

// Approximate-DP selection over the votes of a pseudo-stable learner. The
// universe is the learner's public class if it has one, otherwise every
// labeling of the domain.
absl::StatusOr<LearnerReport> LearnCentralApprox(
    const PseudoStableLearner& learner,
    const RealizableDistribution& distribution, double epsilon, double delta,
    double beta, const SeedRoot& root, const LearnerOptions& options = {});

// Exponential-mechanism selection over the public class H_r of the
// representation learner built at (alpha, beta / 3).
absl::StatusOr<LearnerReport> LearnCentralPure(
    const ProbabilisticRepresentation& representation,
    const RealizableDistribution& distribution, double alpha, double beta,
    double epsilon, const SeedRoot& root, ProfileConstants constants,
    const LearnerOptions& options = {});

// As LearnCentralPure, with each vote sent through the local randomizer.
absl::StatusOr<LearnerReport> LearnLocal(
    const ProbabilisticRepresentation& representation,
    const RealizableDistribution& distribution, double alpha, double beta,
    double epsilon, const SeedRoot& root, ProfileConstants constants,
    const LearnerOptions& options = {});

// Shuffle-model selection; votes are indices into `universe` (at most 2^16
// members) and a vote outside it is an error.
absl::StatusOr<LearnerReport> LearnShuffle(
    const PseudoStableLearner& learner,
    std::shared_ptr<const ConceptClass> universe,
    const RealizableDistribution& distribution, double epsilon, double delta,
    double beta, const SeedRoot& root, const LearnerOptions& options = {});

// A learner run on the empty dataset with the given root.
using EmptyDatasetLearner =
    std::function<absl::StatusOr<Hypothesis>(const SeedRoot& root)>;

// 100 * ceil(e^{eps n}); fails above 10^7.
absl::StatusOr<int64_t> RepresentationRunCount(double epsilon, int64_t users);

// Runs `learner` RepresentationRunCount(eps, n) times, run roots taken from
// `stream`, and returns the distinct outputs.
absl::StatusOr<ConceptClass> RepresentationFromLearner(
    const EmptyDatasetLearner& learner, int64_t domain_size, double epsilon,
    int64_t users, RandomStream& stream);

}  // namespace userdp

#endif  // USERDP_USER_LEVEL_LEARNERS_H_
