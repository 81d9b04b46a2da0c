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

#include "userdp/user_level_learners.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "absl/container/flat_hash_map.h"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "userdp/correlated_sampling.h"
#include "userdp/sample_source.h"
#include "userdp/stats.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

absl::StatusOr<int64_t> CeilCount(double value) {
  if (!(value >= 0.0) || value > 4.0e18) {
    return absl::InvalidArgumentError(
        absl::StrCat("user count ", value, " is out of range"));
  }
  return static_cast<int64_t>(std::ceil(value));
}

absl::Status CheckCommon(double epsilon, double beta, double k) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError(
        absl::StrCat("epsilon must be positive, got ", epsilon));
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("beta must be in (0, 1), got ", beta));
  }
  if (!(k > 0.0) || !std::isfinite(k)) {
    return absl::InvalidArgumentError(
        absl::StrCat("user constant must be positive, got ", k));
  }
  return absl::OkStatus();
}

absl::Status CheckDelta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("delta must be in (0, 1), got ", delta));
  }
  return absl::OkStatus();
}

absl::StatusOr<int64_t> ResolveUserCount(int64_t formula,
                                         const LearnerOptions& options,
                                         const RealizableDistribution& d) {
  if (options.dataset != nullptr) {
    USERDP_RETURN_IF_ERROR(options.dataset->Validate());
    if (options.dataset->source.domain_size() != d.domain_size()) {
      return absl::InvalidArgumentError(
          "dataset and distribution have different domains");
    }
    return static_cast<int64_t>(options.dataset->users.size());
  }
  if (options.users.has_value()) {
    if (*options.users < 0) {
      return absl::InvalidArgumentError("user count must be nonnegative");
    }
    return *options.users;
  }
  return formula;
}

// Runs `learner` once per user with the shared public root.
absl::StatusOr<std::vector<Hypothesis>> CollectVotes(
    const PseudoStableLearner& learner, const RealizableDistribution& d,
    int64_t users, const SeedRoot& root, const SeedRoot& public_root,
    const LearnerOptions& options) {
  std::vector<Hypothesis> votes(users);
  USERDP_RETURN_IF_ERROR(ParallelFor(
      users, options.threads, [&](int64_t i) -> absl::Status {
        std::unique_ptr<SampleSource> source;
        if (options.dataset != nullptr) {
          source = std::make_unique<RecordedSampleSource>(
              d.domain_size(), options.dataset->users[i]);
        } else {
          USERDP_ASSIGN_OR_RETURN(
              RandomStream stream,
              Derive(root, SubstreamLabel("user-data",
                                          {static_cast<uint64_t>(i)})));
          source =
              std::make_unique<DistributionSampleSource>(&d, std::move(stream));
        }
        USERDP_ASSIGN_OR_RETURN(votes[i], learner.Run(*source, public_root));
        return absl::OkStatus();
      }));
  return votes;
}

absl::StatusOr<SeedRoot> PublicRoot(const SeedRoot& root) {
  USERDP_ASSIGN_OR_RETURN(RandomStream stream,
                          Derive(root, SubstreamLabel("public")));
  return stream.NextSeedRoot();
}

double VoteConcentration(const std::vector<Hypothesis>& votes) {
  if (votes.empty()) return 0.0;
  absl::flat_hash_map<Hypothesis, int64_t> counts;
  int64_t best = 0;
  for (const Hypothesis& v : votes) best = std::max(best, ++counts[v]);
  return static_cast<double>(best) / static_cast<double>(votes.size());
}

absl::Status Finish(const RealizableDistribution& d, LearnerReport& report) {
  USERDP_ASSIGN_OR_RETURN(report.err, DistributionalError(report.output, d));
  report.vote_concentration = VoteConcentration(report.per_user_votes);
  report.low_concentration = report.vote_concentration < kConcentrationFloor;
  return absl::OkStatus();
}

// Shared body of the pure central and local learners; `select` maps the
// votes (indices into H_r) to an output index.
absl::StatusOr<LearnerReport> LearnFromRepresentation(
    LearningModel model, const ProbabilisticRepresentation& representation,
    const RealizableDistribution& d, double alpha, double beta,
    double epsilon, const SeedRoot& root, ProfileConstants constants,
    const LearnerOptions& options, int64_t formula,
    const std::function<absl::StatusOr<int64_t>(
        const std::vector<int64_t>& votes,
        std::shared_ptr<const ConceptClass> class_r)>& select) {
  USERDP_ASSIGN_OR_RETURN(
      PseudoStableLearner learner,
      RepStableLearner(representation, alpha, beta / 3.0, constants));
  USERDP_ASSIGN_OR_RETURN(int64_t users,
                          ResolveUserCount(formula, options, d));
  USERDP_ASSIGN_OR_RETURN(SeedRoot public_root, PublicRoot(root));
  USERDP_ASSIGN_OR_RETURN(std::shared_ptr<const ConceptClass> class_r,
                          learner.PublicClass(public_root));

  LearnerReport report;
  report.model = model;
  report.users = users;
  report.users_formula = formula;
  report.samples_per_user = learner.sample_size();
  report.alpha = alpha;
  report.beta = beta;
  report.epsilon = epsilon;
  report.user_constant = options.user_constant;
  report.profile = constants.profile;
  USERDP_ASSIGN_OR_RETURN(
      report.per_user_votes,
      CollectVotes(learner, d, users, root, public_root, options));

  std::vector<int64_t> indices;
  indices.reserve(users);
  for (const Hypothesis& vote : report.per_user_votes) {
    std::optional<int64_t> index = class_r->IndexOf(vote);
    if (!index.has_value()) {
      return absl::InternalError("vote outside the public class");
    }
    indices.push_back(*index);
  }
  USERDP_ASSIGN_OR_RETURN(int64_t chosen, select(indices, class_r));
  report.output = (*class_r)[chosen];
  USERDP_RETURN_IF_ERROR(Finish(d, report));
  return report;
}

}  // namespace

absl::StatusOr<LearningModel> ParseLearningModel(std::string_view name) {
  if (name == "central-approx") return LearningModel::kCentralApprox;
  if (name == "central-pure") return LearningModel::kCentralPure;
  if (name == "local") return LearningModel::kLocal;
  if (name == "shuffle") return LearningModel::kShuffle;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown model '", std::string(name), "'"));
}

std::string_view LearningModelName(LearningModel model) {
  switch (model) {
    case LearningModel::kCentralApprox:
      return "central-approx";
    case LearningModel::kCentralPure:
      return "central-pure";
    case LearningModel::kLocal:
      return "local";
    case LearningModel::kShuffle:
      return "shuffle";
  }
  return "unknown";
}

absl::Status UserDataset::Validate() const {
  if (users.empty()) return absl::InvalidArgumentError("dataset has no users");
  const size_t m = users.front().size();
  if (m == 0) return absl::InvalidArgumentError("users hold no samples");
  for (size_t i = 0; i < users.size(); ++i) {
    if (users[i].size() != m) {
      return absl::InvalidArgumentError(absl::StrCat(
          "user ", i, " holds ", users[i].size(), " samples, expected ", m));
    }
    for (const LabeledSample& s : users[i]) {
      if (s.x < 0 || s.x >= source.domain_size()) {
        return absl::InvalidArgumentError(
            absl::StrCat("user ", i, " has point ", s.x, " outside domain"));
      }
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<UserDataset> SimulateDataset(
    const RealizableDistribution& source, int64_t users,
    int64_t samples_per_user, const SeedRoot& root) {
  if (users < 1 || samples_per_user < 1) {
    return absl::InvalidArgumentError("need n >= 1 users and m >= 1 samples");
  }
  UserDataset dataset{source, {}};
  dataset.users.reserve(users);
  for (int64_t i = 0; i < users; ++i) {
    USERDP_ASSIGN_OR_RETURN(
        RandomStream stream,
        Derive(root,
               SubstreamLabel("user-data", {static_cast<uint64_t>(i)})));
    dataset.users.push_back(DrawSamples(source, samples_per_user, stream));
  }
  return dataset;
}

absl::StatusOr<int64_t> CentralApproxUserCount(double epsilon, double delta,
                                               double beta, double k) {
  USERDP_RETURN_IF_ERROR(CheckCommon(epsilon, beta, k));
  USERDP_RETURN_IF_ERROR(CheckDelta(delta));
  return CeilCount(k * std::log(1.0 / (delta * beta)) / epsilon);
}

absl::StatusOr<int64_t> CentralPureUserCount(double size_bits, double epsilon,
                                             double beta, double k) {
  USERDP_RETURN_IF_ERROR(CheckCommon(epsilon, beta, k));
  if (!(size_bits >= 0.0)) {
    return absl::InvalidArgumentError("size must be nonnegative");
  }
  return CeilCount(k * (size_bits + std::log(1.0 / beta)) / epsilon);
}

absl::StatusOr<int64_t> LocalUserCount(double size_bits, double epsilon,
                                       double beta, double k) {
  USERDP_RETURN_IF_ERROR(CheckCommon(epsilon, beta, k));
  if (!(size_bits >= 0.0)) {
    return absl::InvalidArgumentError("size must be nonnegative");
  }
  return CeilCount(k * (size_bits + std::log(1.0 / beta)) /
                   (epsilon * epsilon));
}

absl::StatusOr<int64_t> ShuffleUserCount(double epsilon, double delta,
                                         double beta, double k) {
  USERDP_RETURN_IF_ERROR(CheckCommon(epsilon, beta, k));
  USERDP_RETURN_IF_ERROR(CheckDelta(delta));
  return CeilCount(k * std::log(1.0 / (beta * delta)) / epsilon);
}

absl::StatusOr<LearnerReport> LearnCentralApprox(
    const PseudoStableLearner& learner, const RealizableDistribution& d,
    double epsilon, double delta, double beta, const SeedRoot& root,
    const LearnerOptions& options) {
  USERDP_ASSIGN_OR_RETURN(
      int64_t formula,
      CentralApproxUserCount(epsilon, delta, beta, options.user_constant));
  USERDP_ASSIGN_OR_RETURN(int64_t users,
                          ResolveUserCount(formula, options, d));
  USERDP_ASSIGN_OR_RETURN(PrivacyParams privacy,
                          PrivacyParams::Create(epsilon, delta));
  USERDP_ASSIGN_OR_RETURN(SeedRoot public_root, PublicRoot(root));

  std::optional<OutcomeSpace> universe;
  if (learner.has_public_class()) {
    USERDP_ASSIGN_OR_RETURN(std::shared_ptr<const ConceptClass> class_r,
                            learner.PublicClass(public_root));
    universe = OutcomeSpace::HypothesisList(std::move(class_r));
  } else {
    USERDP_ASSIGN_OR_RETURN(universe,
                            OutcomeSpace::FullHypothesisSpace(d.domain_size()));
  }

  LearnerReport report;
  report.model = LearningModel::kCentralApprox;
  report.users = users;
  report.users_formula = formula;
  report.samples_per_user = learner.sample_size();
  report.alpha = learner.guarantee().alpha;
  report.beta = beta;
  report.epsilon = epsilon;
  report.delta = delta;
  report.user_constant = options.user_constant;
  report.profile = learner.profile();
  USERDP_ASSIGN_OR_RETURN(
      report.per_user_votes,
      CollectVotes(learner, d, users, root, public_root, options));

  USERDP_ASSIGN_OR_RETURN(
      VoteSet<Hypothesis> votes,
      VoteSet<Hypothesis>::Create(*universe, report.per_user_votes));
  USERDP_ASSIGN_OR_RETURN(RandomStream noise,
                          Derive(root, SubstreamLabel("noise")));
  USERDP_ASSIGN_OR_RETURN(
      ApproxSelectTranscript<Hypothesis> transcript,
      ApproxSelect(votes, privacy, noise, options.mechanism));
  report.output = std::move(transcript.output);
  USERDP_RETURN_IF_ERROR(Finish(d, report));
  return report;
}

absl::StatusOr<LearnerReport> LearnCentralPure(
    const ProbabilisticRepresentation& representation,
    const RealizableDistribution& d, double alpha, double beta,
    double epsilon, const SeedRoot& root, ProfileConstants constants,
    const LearnerOptions& options) {
  USERDP_ASSIGN_OR_RETURN(
      int64_t formula,
      CentralPureUserCount(representation.size_bits(), epsilon, beta,
                           options.user_constant));
  return LearnFromRepresentation(
      LearningModel::kCentralPure, representation, d, alpha, beta, epsilon,
      root, constants, options, formula,
      [&](const std::vector<int64_t>& indices,
          std::shared_ptr<const ConceptClass> class_r)
          -> absl::StatusOr<int64_t> {
        USERDP_ASSIGN_OR_RETURN(
            VoteSet<int64_t> votes,
            VoteSet<int64_t>::Create(
                OutcomeSpace::HypothesisList(std::move(class_r)), indices));
        USERDP_ASSIGN_OR_RETURN(RandomStream noise,
                                Derive(root, SubstreamLabel("noise")));
        return PureSelect(votes, epsilon, noise, options.mechanism);
      });
}

absl::StatusOr<LearnerReport> LearnLocal(
    const ProbabilisticRepresentation& representation,
    const RealizableDistribution& d, double alpha, double beta,
    double epsilon, const SeedRoot& root, ProfileConstants constants,
    const LearnerOptions& options) {
  USERDP_ASSIGN_OR_RETURN(
      int64_t formula, LocalUserCount(representation.size_bits(), epsilon,
                                      beta, options.user_constant));
  return LearnFromRepresentation(
      LearningModel::kLocal, representation, d, alpha, beta, epsilon, root,
      constants, options, formula,
      [&](const std::vector<int64_t>& indices,
          std::shared_ptr<const ConceptClass> class_r)
          -> absl::StatusOr<int64_t> {
        const int64_t universe_size = class_r->size();
        std::vector<LocalMessage> messages(indices.size());
        for (size_t i = 0; i < indices.size(); ++i) {
          USERDP_ASSIGN_OR_RETURN(
              RandomStream stream,
              Derive(root, SubstreamLabel("rr", {static_cast<uint64_t>(i)})));
          USERDP_ASSIGN_OR_RETURN(
              messages[i], LocalRandomize(indices[i], universe_size, epsilon,
                                          stream, options.mechanism));
        }
        USERDP_ASSIGN_OR_RETURN(
            LocalAggregateResult result,
            LocalAggregate(messages, universe_size, epsilon,
                           options.mechanism));
        return result.argmax;
      });
}

absl::StatusOr<LearnerReport> LearnShuffle(
    const PseudoStableLearner& learner,
    std::shared_ptr<const ConceptClass> universe,
    const RealizableDistribution& d, double epsilon, double delta,
    double beta, const SeedRoot& root, const LearnerOptions& options) {
  if (universe == nullptr || universe->domain_size() != d.domain_size()) {
    return absl::InvalidArgumentError(
        "shuffle universe must be a class over the distribution's domain");
  }
  USERDP_ASSIGN_OR_RETURN(
      int64_t formula,
      ShuffleUserCount(epsilon, delta, beta, options.user_constant));
  USERDP_ASSIGN_OR_RETURN(int64_t users,
                          ResolveUserCount(formula, options, d));
  USERDP_ASSIGN_OR_RETURN(SeedRoot public_root, PublicRoot(root));

  LearnerReport report;
  report.model = LearningModel::kShuffle;
  report.users = users;
  report.users_formula = formula;
  report.samples_per_user = learner.sample_size();
  report.alpha = learner.guarantee().alpha;
  report.beta = beta;
  report.epsilon = epsilon;
  report.delta = delta;
  report.user_constant = options.user_constant;
  report.profile = learner.profile();
  USERDP_ASSIGN_OR_RETURN(
      report.per_user_votes,
      CollectVotes(learner, d, users, root, public_root, options));

  std::vector<int64_t> items;
  items.reserve(users);
  for (const Hypothesis& vote : report.per_user_votes) {
    std::optional<int64_t> index = universe->IndexOf(vote);
    if (!index.has_value()) {
      return absl::InvalidArgumentError(
          absl::StrCat("vote ", vote.ToHex(), " is outside the universe"));
    }
    items.push_back(*index);
  }
  if (users == 0) {
    report.output = (*universe)[0];
  } else {
    USERDP_ASSIGN_OR_RETURN(RandomStream stream,
                            Derive(root, SubstreamLabel("shuffle")));
    SummationConfig summation = options.summation;
    summation.disable_noise =
        summation.disable_noise || options.mechanism.disable_noise;
    USERDP_ASSIGN_OR_RETURN(
        ShuffleSelectResult result,
        ShuffleSelect(items, universe->size(), epsilon, delta,
                      stream.NextSeedRoot(), summation));
    report.output = (*universe)[result.output];
  }
  USERDP_RETURN_IF_ERROR(Finish(d, report));
  return report;
}

absl::StatusOr<int64_t> RepresentationRunCount(double epsilon,
                                               int64_t users) {
  if (!(epsilon >= 0.0) || users < 0) {
    return absl::InvalidArgumentError("need epsilon >= 0 and n >= 0");
  }
  const double runs = 100.0 * std::ceil(std::exp(epsilon * users));
  if (!(runs <= 1e7)) {
    return absl::ResourceExhaustedError(absl::StrCat(
        "eps n = ", epsilon * users, " needs ", runs, " runs, above 10^7"));
  }
  return static_cast<int64_t>(runs);
}

absl::StatusOr<ConceptClass> RepresentationFromLearner(
    const EmptyDatasetLearner& learner, int64_t domain_size, double epsilon,
    int64_t users, RandomStream& stream) {
  USERDP_ASSIGN_OR_RETURN(int64_t runs,
                          RepresentationRunCount(epsilon, users));
  std::vector<Hypothesis> outputs;
  outputs.reserve(runs);
  for (int64_t t = 0; t < runs; ++t) {
    USERDP_ASSIGN_OR_RETURN(Hypothesis h, learner(stream.NextSeedRoot()));
    outputs.push_back(std::move(h));
  }
  std::sort(outputs.begin(), outputs.end());
  outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
  return ConceptClass::Create(domain_size, std::move(outputs));
}

}  // namespace userdp
