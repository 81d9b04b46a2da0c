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

#include "userdp/sq.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

absl::StatusOr<double> CheckedPhi(const StatisticalQuery& query, int64_t x,
                                  bool y) {
  const double v = query.phi(x, y);
  if (!(v >= -1.0 && v <= 1.0)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "query '", query.description, "' returned ", v, " outside [-1, 1]"));
  }
  return v;
}

using MeanFn = std::function<absl::StatusOr<double>(const StatisticalQuery&)>;

// Answers queries by correlated rounding of a mean supplied by `mean`.
class RoundingOracle : public SqOracle {
 public:
  RoundingOracle(MeanFn mean, AnswerGrid grid, const SeedRoot& root,
                 int64_t budget)
      : mean_(std::move(mean)), grid_(grid), root_(root), budget_(budget) {}

  absl::StatusOr<double> Answer(const StatisticalQuery& query) override {
    const int64_t i = static_cast<int64_t>(transcript_.size());
    if (i >= budget_) {
      return absl::FailedPreconditionError(absl::StrCat(
          "learner exceeded its budget of ", budget_, " queries"));
    }
    USERDP_ASSIGN_OR_RETURN(double mean, mean_(query));
    const DiscreteDistribution rounding = grid_.Rounding(mean);
    USERDP_ASSIGN_OR_RETURN(
        RandomStream stream,
        Derive(root_,
               SubstreamLabel("sq-query", {static_cast<uint64_t>(i)})));
    USERDP_ASSIGN_OR_RETURN(int64_t index, CorrelatedSample(rounding, stream));
    const double answer = grid_.Answer(index);
    transcript_.push_back({query.description, mean, index, answer});
    return answer;
  }

  std::vector<SqTranscriptEntry> TakeTranscript() {
    return std::move(transcript_);
  }

 private:
  MeanFn mean_;
  AnswerGrid grid_;
  SeedRoot root_;
  int64_t budget_;
  std::vector<SqTranscriptEntry> transcript_;
};

absl::StatusOr<SqRun> RunWithMeans(const SqLearner& learner, double tau,
                                   MeanFn mean, const SeedRoot& root) {
  USERDP_ASSIGN_OR_RETURN(AnswerGrid grid, AnswerGrid::ForTolerance(tau));
  RoundingOracle oracle(std::move(mean), grid, root, learner.query_budget);
  std::optional<RandomStream> coins;
  if (learner.randomized) {
    USERDP_ASSIGN_OR_RETURN(coins, Derive(root, SubstreamLabel("sq-coins")));
  }
  SqRun run;
  USERDP_ASSIGN_OR_RETURN(
      run.output, learner.fn(oracle, coins.has_value() ? &*coins : nullptr));
  run.transcript = oracle.TakeTranscript();
  return run;
}

}  // namespace

absl::StatusOr<double> ExactOracle::Answer(const StatisticalQuery& query) {
  const Hypothesis& target = distribution_->target();
  double total = 0.0;
  for (int64_t x = 0; x < distribution_->domain_size(); ++x) {
    const double w = distribution_->weights()[x];
    if (w == 0.0) continue;
    USERDP_ASSIGN_OR_RETURN(double v, CheckedPhi(query, x, target(x)));
    total += w * v;
  }
  return total;
}

absl::StatusOr<double> BudgetedOracle::Answer(const StatisticalQuery& query) {
  if (used_ >= budget_) {
    return absl::FailedPreconditionError(absl::StrCat(
        "learner exceeded its budget of ", budget_, " queries"));
  }
  ++used_;
  return inner_->Answer(query);
}

absl::StatusOr<SqLearner> ConjunctionSqLearner(int d, double tau) {
  if (d < 1 || d > 24) {
    return absl::InvalidArgumentError(
        absl::StrCat("conjunction learner needs 1 <= d <= 24, got ", d));
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("tau must be in (0, 1), got ", tau));
  }
  const int64_t n = int64_t{1} << d;
  SqLearner learner;
  learner.domain_size = n;
  learner.query_budget = d;
  learner.tolerance = tau;
  learner.hypothesis_bits = d;
  learner.fn = [d, tau, n](SqOracle& oracle,
                           RandomStream*) -> absl::StatusOr<Hypothesis> {
    uint64_t mask = 0;
    for (int j = 0; j < d; ++j) {
      StatisticalQuery query{
          [j](int64_t x, bool y) {
            return ((x >> j) & 1) == 0 && y ? 1.0 : 0.0;
          },
          absl::StrCat("Pr[x_", j, " = 0 and y = 1]")};
      USERDP_ASSIGN_OR_RETURN(double answer, oracle.Answer(query));
      if (answer <= 2.0 * tau) mask |= uint64_t{1} << j;
    }
    return MonotoneConjunction(n, mask);
  };
  return learner;
}

absl::StatusOr<AnswerGrid> AnswerGrid::ForTolerance(double tau) {
  if (!(tau > 0.0 && tau <= 2.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("tau must be in (0, 2], got ", tau));
  }
  return AnswerGrid(static_cast<int64_t>(std::ceil(6.0 / tau)));
}

DiscreteDistribution AnswerGrid::Rounding(double mean) const {
  const double v = std::clamp((mean + 1.0) / 2.0, 0.0, 1.0);
  const double scaled = v * static_cast<double>(resolution_);
  const int64_t low =
      std::min(static_cast<int64_t>(std::floor(scaled)), resolution_);
  const double frac = scaled - static_cast<double>(low);
  std::vector<double> p(resolution_ + 1, 0.0);
  if (low == resolution_ || frac == 0.0) {
    p[low] = 1.0;
  } else {
    p[low] = 1.0 - frac;
    p[low + 1] = frac;
  }
  // Two nonnegative masses summing to 1.
  return *DiscreteDistribution::Create(std::move(p));
}

absl::StatusOr<int64_t> SqSampleSize(int64_t queries, double tau, double beta,
                                     ProfileConstants constants) {
  if (queries < 1) return absl::InvalidArgumentError("need at least a query");
  if (!(tau > 0.0) || !(beta > 0.0 && beta < 1.0)) {
    return absl::InvalidArgumentError("tau and beta must be positive");
  }
  const double q2 = static_cast<double>(queries) * queries;
  const double value = constants.Leading() * q2 / (beta * beta * tau * tau) *
                       std::log(q2 / (std::pow(beta, 4) * tau * tau));
  if (!(value <= 4.6e18)) {
    return absl::ResourceExhaustedError(
        absl::StrCat("m' = ", value, " is too large to run"));
  }
  return std::max<int64_t>(1, static_cast<int64_t>(std::ceil(value)));
}

absl::StatusOr<SqRun> RunSqReduction(const SqLearner& learner, double tau,
                                     int64_t samples_per_query,
                                     SampleSource& source,
                                     const SeedRoot& public_root) {
  if (samples_per_query < 1) {
    return absl::InvalidArgumentError("need at least one sample per query");
  }
  auto mean = [&source, samples_per_query](
                  const StatisticalQuery& query) -> absl::StatusOr<double> {
    USERDP_ASSIGN_OR_RETURN(SampleCounts counts,
                            source.DrawCounts(samples_per_query));
    double total = 0.0;
    for (const auto& e : counts.entries) {
      USERDP_ASSIGN_OR_RETURN(double v, CheckedPhi(query, e.x, e.y));
      total += v * static_cast<double>(e.count);
    }
    return total / static_cast<double>(counts.total);
  };
  return RunWithMeans(learner, tau, std::move(mean), public_root);
}

absl::StatusOr<SqRun> RunSqDistributional(
    const SqLearner& learner, double tau,
    const RealizableDistribution& distribution, const SeedRoot& public_root) {
  auto oracle = std::make_shared<ExactOracle>(&distribution);
  return RunWithMeans(
      learner, tau,
      [oracle](const StatisticalQuery& query) {
        return oracle->Answer(query);
      },
      public_root);
}

absl::StatusOr<PseudoStableLearner> SqToPseudoStable(
    SqLearner learner, double tau, double beta, ProfileConstants constants) {
  USERDP_ASSIGN_OR_RETURN(
      int64_t per_query,
      SqSampleSize(learner.query_budget, tau, beta, constants));
  USERDP_RETURN_IF_ERROR(AnswerGrid::ForTolerance(tau).status());
  int64_t total;
  if (__builtin_mul_overflow(per_query, learner.query_budget, &total)) {
    total = std::numeric_limits<int64_t>::max();
  }
  const int64_t domain_size = learner.domain_size;
  auto fn = [learner = std::move(learner), tau, per_query](
                SampleSource& source,
                const SeedRoot& root) -> absl::StatusOr<Hypothesis> {
    USERDP_ASSIGN_OR_RETURN(
        SqRun run, RunSqReduction(learner, tau, per_query, source, root));
    return std::move(run.output);
  };
  PseudoStableGuarantee guarantee{0.0, beta, 1.0 - beta, 1.0 - beta};
  return PseudoStableLearner(std::move(fn), domain_size, total, guarantee,
                             constants.profile);
}

}  // namespace userdp
