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

// Statistical queries and the reduction that turns an SQ learner into a
// pseudo-globally stable learner by answering each query through correlated
// rounding of its empirical mean.

#ifndef USERDP_SQ_H_
#define USERDP_SQ_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "userdp/concepts.h"
#include "userdp/correlated_sampling.h"
#include "userdp/randomness.h"
#include "userdp/sample_source.h"
#include "userdp/stable_learners.h"

namespace userdp {

struct StatisticalQuery {
  // Must take values in [-1, 1].
  std::function<double(int64_t x, bool y)> phi;
  std::string description;
};

class SqOracle {
 public:
  virtual ~SqOracle() = default;
  virtual absl::StatusOr<double> Answer(const StatisticalQuery& query) = 0;
};

// Answers E_D[phi(x, target(x))] exactly.
class ExactOracle : public SqOracle {
 public:
  // `distribution` must outlive the oracle.
  explicit ExactOracle(const RealizableDistribution* distribution)
      : distribution_(distribution) {}

  absl::StatusOr<double> Answer(const StatisticalQuery& query) override;

 private:
  const RealizableDistribution* distribution_;
};

// Forwards at most `budget` queries to `inner`; further queries fail.
class BudgetedOracle : public SqOracle {
 public:
  BudgetedOracle(SqOracle* inner, int64_t budget)
      : inner_(inner), budget_(budget) {}

  absl::StatusOr<double> Answer(const StatisticalQuery& query) override;
  int64_t queries_used() const { return used_; }

 private:
  SqOracle* inner_;
  int64_t budget_;
  int64_t used_ = 0;
};

// `coins` is null for deterministic learners.
using SqLearnerFn =
    std::function<absl::StatusOr<Hypothesis>(SqOracle&, RandomStream* coins)>;

struct SqLearner {
  SqLearnerFn fn;
  int64_t domain_size = 0;
  int64_t query_budget = 0;
  double tolerance = 0.0;
  double hypothesis_bits = 0.0;
  bool randomized = false;
};

// Learns monotone conjunctions over {0,1}^d (points 0..2^d-1, bit j of x is
// variable j). Query j asks for Pr[x_j = 0 and y = 1]; variable j joins the
// conjunction iff the answer is at most 2 tau.
absl::StatusOr<SqLearner> ConjunctionSqLearner(int d, double tau);

// Grid {0, 1/I, ..., 1} with I = ceil(6 / tau). A query mean u in [-1, 1] is
// rescaled to v = (u + 1) / 2 and rounded to one of its two neighbouring grid
// points; grid index l maps back to the answer 2 l / I - 1.
class AnswerGrid {
 public:
  static absl::StatusOr<AnswerGrid> ForTolerance(double tau);

  int64_t resolution() const { return resolution_; }
  // Mass 1 - f on floor(v I) and f on floor(v I) + 1, f the fractional part.
  DiscreteDistribution Rounding(double mean) const;
  double Answer(int64_t index) const {
    return 2.0 * static_cast<double>(index) /
               static_cast<double>(resolution_) -
           1.0;
  }

 private:
  explicit AnswerGrid(int64_t resolution) : resolution_(resolution) {}

  int64_t resolution_;
};

// m' = C q^2 / (beta^2 tau^2) * ln(q^2 / (beta^4 tau^2)).
absl::StatusOr<int64_t> SqSampleSize(int64_t queries, double tau, double beta,
                                     ProfileConstants constants);

struct SqTranscriptEntry {
  std::string description;
  double mean = 0.0;  // empirical or exact mean of phi
  int64_t grid_index = 0;
  double answer = 0.0;
};

struct SqRun {
  Hypothesis output;
  std::vector<SqTranscriptEntry> transcript;
};

// Runs the learner with query i answered by
// CS(rounding of its mean; Derive(public_root, ("sq-query", [i]))), where the
// mean is estimated from `samples_per_query` fresh samples. Coins of a
// randomized learner come from Derive(public_root, "sq-coins").
absl::StatusOr<SqRun> RunSqReduction(const SqLearner& learner, double tau,
                                     int64_t samples_per_query,
                                     SampleSource& source,
                                     const SeedRoot& public_root);

// The same run with exact means: the reference output h_r.
absl::StatusOr<SqRun> RunSqDistributional(
    const SqLearner& learner, double tau,
    const RealizableDistribution& distribution, const SeedRoot& public_root);

// The reduction as a PseudoStableLearner with q * m' samples per run.
absl::StatusOr<PseudoStableLearner> SqToPseudoStable(
    SqLearner learner, double tau, double beta, ProfileConstants constants);

}  // namespace userdp

#endif  // USERDP_SQ_H_
