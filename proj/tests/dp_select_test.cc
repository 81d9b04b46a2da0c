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

#include <cmath>
#include <cstdint>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "testing/oracles.h"
#include "testing/status_matchers.h"
#include "userdp/correlated_sampling.h"
#include "userdp/randomness.h"

namespace userdp {
namespace {

using ::userdp::testing::IsOkAndHolds;
using ::userdp::testing::StatusIs;

RandomStream NoiseStream(uint64_t seed, uint64_t k = 0) {
  return Derive(SeedRoot::FromUint64(seed), SubstreamLabel("noise", {k}))
      .value();
}

// Index universe {0, ..., n-1}.
OutcomeSpace Indices(int64_t n) { return OutcomeSpace::Grid(n - 1).value(); }

VoteSet<int64_t> Votes(int64_t universe_size, std::vector<int64_t> votes) {
  return VoteSet<int64_t>::Create(Indices(universe_size), std::move(votes))
      .value();
}

// Votes with the given count per element.
VoteSet<int64_t> FromCounts(const std::vector<int64_t>& counts) {
  std::vector<int64_t> votes;
  for (int64_t u = 0; u < static_cast<int64_t>(counts.size()); ++u) {
    for (int64_t i = 0; i < counts[u]; ++i) votes.push_back(u);
  }
  return Votes(static_cast<int64_t>(counts.size()), votes);
}

const PrivacyParams kApprox = PrivacyParams::Create(1.0, 1e-6).value();

TEST(PrivacyParamsTest, Validation) {
  EXPECT_FALSE(PrivacyParams::Create(0.0, 0.1).ok());
  EXPECT_FALSE(PrivacyParams::Create(1.0, 1.0).ok());
  EXPECT_FALSE(PrivacyParams::Create(1.0, -0.1).ok());
  EXPECT_OK(PrivacyParams::Create(1.0, 0.0));
}

TEST(GroupPrivacyTest, SingleUserUnchanged) {
  ASSERT_OK_AND_ASSIGN(PrivacyParams g, GroupPrivacy(kApprox, 1));
  EXPECT_DOUBLE_EQ(g.epsilon, 1.0);
  EXPECT_DOUBLE_EQ(g.delta, 1e-6);
}

TEST(GroupPrivacyTest, PureStaysPure) {
  ASSERT_OK_AND_ASSIGN(PrivacyParams g,
                       GroupPrivacy(PrivacyParams::Create(1.0, 0.0).value(), 5));
  EXPECT_DOUBLE_EQ(g.epsilon, 5.0);
  EXPECT_EQ(g.delta, 0.0);
}

TEST(GroupPrivacyTest, EvaluatesFormula) {
  ASSERT_OK_AND_ASSIGN(
      PrivacyParams g,
      GroupPrivacy(PrivacyParams::Create(0.1, 1e-6).value(), 10));
  EXPECT_NEAR(g.epsilon, 1.0, 1e-15);
  // Geometric series sum_{j<10} e^{0.1 j} times delta.
  double series = 0.0;
  for (int j = 0; j < 10; ++j) series += std::exp(0.1 * j);
  EXPECT_NEAR(g.delta, 1e-6 * series, 1e-18);
  EXPECT_NEAR(g.delta, 1e-6 * (std::exp(1.0) - 1) / (std::exp(0.1) - 1),
              1e-18);
  EXPECT_FALSE(GroupPrivacy(kApprox, 0).ok());
}

TEST(VoteSetTest, TalliesAndPlurality) {
  VoteSet<int64_t> v = Votes(5, {3, 1, 3, 4, 1});
  EXPECT_EQ(v.size(), 5);
  ASSERT_EQ(v.tallies().size(), 3u);
  EXPECT_EQ(v.tallies()[0].element, 1);
  EXPECT_EQ(v.CountOf(3), 2);
  EXPECT_EQ(v.CountOf(0), 0);
  // Tie between 1 and 3: lowest index wins.
  EXPECT_EQ(v.Plurality(), 1);
  EXPECT_EQ(Votes(5, {}).Plurality(), 0);
  EXPECT_FALSE(VoteSet<int64_t>::Create(Indices(5), {5}).ok());
}

TEST(VoteSetTest, HypothesisVotes) {
  ASSERT_OK_AND_ASSIGN(OutcomeSpace full, OutcomeSpace::FullHypothesisSpace(3));
  Hypothesis a = Hypothesis::FromBitString("101").value();
  Hypothesis b = Hypothesis::FromBitString("011").value();
  ASSERT_OK_AND_ASSIGN(auto v, VoteSet<Hypothesis>::Create(full, {a, b, a}));
  EXPECT_EQ(v.Plurality(), a);
  EXPECT_EQ(v.FirstElement(), Hypothesis(3));
  EXPECT_EQ(v.tallies()[0].element, b);
  EXPECT_FALSE(
      VoteSet<Hypothesis>::Create(full, {Hypothesis::FromBitString("1").value()})
          .ok());
}

TEST(ApproxSelectTest, NoVotesReturnsFallback) {
  RandomStream s = NoiseStream(1);
  ASSERT_OK_AND_ASSIGN(auto t, ApproxSelect(Votes(7, {}), kApprox, s));
  EXPECT_EQ(t.output, 0);
  EXPECT_FALSE(t.released);
  EXPECT_TRUE(t.candidates.empty());
}

TEST(ApproxSelectTest, RequiresPositiveDelta) {
  RandomStream s = NoiseStream(1);
  EXPECT_THAT(ApproxSelect(Votes(3, {1}),
                           PrivacyParams::Create(1.0, 0.0).value(), s),
              StatusIs(absl::StatusCode::kInvalidArgument));
}

TEST(ApproxSelectTest, TranscriptIsConsistent) {
  RandomStream s = NoiseStream(2);
  ASSERT_OK_AND_ASSIGN(auto t,
                       ApproxSelect(FromCounts({0, 40, 3, 0, 12}), kApprox, s));
  EXPECT_NEAR(t.threshold, 1 + 2 * std::log(1 / 2e-6), 1e-12);
  ASSERT_EQ(t.candidates.size(), 3u);
  for (const auto& c : t.candidates) {
    EXPECT_DOUBLE_EQ(c.noisy_count, c.count + c.noise);
  }
  EXPECT_TRUE(t.released);
  EXPECT_EQ(t.output, 1);
}

TEST(ApproxSelectTest, UnanimousVotesReleased) {
  // 200 + Laplace(2) falls below the threshold of about 27.2 with
  // probability e^{-86}/2.
  int hits = 0;
  for (uint64_t k = 0; k < 1000; ++k) {
    RandomStream s = NoiseStream(3, k);
    ASSERT_OK_AND_ASSIGN(auto t,
                         ApproxSelect(FromCounts({0, 0, 200}), kApprox, s));
    hits += t.output == 2;
  }
  EXPECT_GE(hits, 990);
}

TEST(ApproxSelectTest, SelectsBelowMaxAtLaplaceDifferenceRate) {
  // With counts (100, 100 - g) both clear the threshold almost surely, so the
  // lower element wins exactly when its noise beats the other's by more than
  // g.
  for (int g : {0, 1, 2, 5, 10, 20}) {
    constexpr int kTrials = 1000;
    int lower = 0;
    for (uint64_t k = 0; k < kTrials; ++k) {
      RandomStream s = NoiseStream(100 + g, k);
      ASSERT_OK_AND_ASSIGN(auto t,
                           ApproxSelect(FromCounts({100, 100 - g}), kApprox, s));
      ASSERT_TRUE(t.released);
      lower += t.output == 1;
      EXPECT_LE(100 - t.candidates[t.output].count, g);
    }
    const double p = ::userdp::testing::LaplaceDifferenceTail(g, 2.0);
    EXPECT_NEAR(lower / static_cast<double>(kTrials), p,
                4 * std::sqrt(p * (1 - p) / kTrials) + 1e-3)
        << "g = " << g;
  }
}

TEST(ApproxSelectTest, DisabledNoiseIsPlurality) {
  RandomStream s = NoiseStream(4);
  MechanismOptions off{.disable_noise = true};
  ASSERT_OK_AND_ASSIGN(auto t,
                       ApproxSelect(FromCounts({3, 9, 9}), kApprox, s, off));
  EXPECT_EQ(t.output, 1);
}

// Exponential mechanism probabilities computed directly from the counts.
std::vector<double> ExpMechOracle(const std::vector<int64_t>& counts,
                                  double epsilon) {
  std::vector<double> w;
  double z = 0.0;
  for (int64_t c : counts) {
    w.push_back(std::exp(epsilon * c / 2));
    z += w.back();
  }
  for (double& x : w) x /= z;
  return w;
}

TEST(ExponentialLawTest, MatchesOracleAndClosedForm) {
  ASSERT_OK_AND_ASSIGN(ExponentialMechanismLaw law,
                       ExponentialLaw(FromCounts({5, 0}), 0.5));
  const double e = std::exp(2.5);
  EXPECT_NEAR(law.Probability(0), e / (e + 1), 1e-15);
  EXPECT_NEAR(law.Probability(1), 1 / (e + 1), 1e-15);

  const std::vector<int64_t> counts = {0, 4, 1, 0, 0, 2};
  std::vector<double> oracle = ExpMechOracle(counts, 1.3);
  ASSERT_OK_AND_ASSIGN(law, ExponentialLaw(FromCounts(counts), 0.65));
  for (int u = 0; u < 6; ++u) EXPECT_NEAR(law.Probability(u), oracle[u], 1e-14);
  EXPECT_EQ(law.unvoted_count, 3);
}

TEST(PureSelectTest, ClosedFormTwoElements) {
  constexpr int kTrials = 100000;
  int a = 0;
  for (uint64_t k = 0; k < kTrials; ++k) {
    RandomStream s = NoiseStream(5, k);
    ASSERT_OK_AND_ASSIGN(int64_t out, PureSelect(FromCounts({5, 0}), 1.0, s));
    a += out == 0;
  }
  const double p = std::exp(2.5) / (std::exp(2.5) + 1);
  EXPECT_NEAR(a / static_cast<double>(kTrials), p,
              4 * std::sqrt(p * (1 - p) / kTrials));
}

TEST(PureSelectTest, EqualCountsAreUniform) {
  constexpr int kTrials = 40000;
  std::vector<int> hits(4, 0);
  for (uint64_t k = 0; k < kTrials; ++k) {
    RandomStream s = NoiseStream(6, k);
    ASSERT_OK_AND_ASSIGN(int64_t out,
                         PureSelect(FromCounts({2, 2, 2, 2}), 1.0, s));
    ++hits[out];
  }
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(kTrials), 0.25, 0.01);
}

TEST(PureSelectTest, LargeUniverseMatchesOracle) {
  // 10^6 elements, three voted; cost must not scale with |U|.
  const int64_t n = 1000000;
  VoteSet<int64_t> v = Votes(n, {7, 7, 7, 7, 7, 7, 7, 7, 999999, 999999, 3});
  constexpr int kTrials = 20000;
  int seven = 0;
  for (uint64_t k = 0; k < kTrials; ++k) {
    RandomStream s = NoiseStream(7, k);
    ASSERT_OK_AND_ASSIGN(int64_t out, PureSelect(v, 2.0, s));
    ASSERT_GE(out, 0);
    ASSERT_LT(out, n);
    seven += out == 7;
  }
  const double z = std::exp(8.0) + std::exp(2.0) + std::exp(1.0) + (n - 3);
  const double p = std::exp(8.0) / z;
  EXPECT_NEAR(seven / static_cast<double>(kTrials), p,
              4 * std::sqrt(p * (1 - p) / kTrials));
}

TEST(PureSelectTest, NeighborAuditOnFourElements) {
  // Every vote multiset of size n <= 4 over 4 elements, against every
  // replace-one and add/remove neighbor, using the oracle probabilities.
  const double epsilon = 1.0;
  std::vector<std::vector<int64_t>> count_vectors;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      for (int c = 0; a + b + c <= 4; ++c)
        for (int d = 0; a + b + c + d <= 4; ++d)
          count_vectors.push_back({a, b, c, d});
  double worst = 0.0;
  for (const auto& x : count_vectors) {
    for (const auto& y : count_vectors) {
      int64_t l1 = 0;
      for (int u = 0; u < 4; ++u) l1 += std::abs(x[u] - y[u]);
      const int64_t nx = x[0] + x[1] + x[2] + x[3];
      const int64_t ny = y[0] + y[1] + y[2] + y[3];
      const bool replace = nx == ny && l1 == 2;
      const bool add_remove = std::abs(nx - ny) == 1 && l1 == 1;
      if (!replace && !add_remove) continue;
      ASSERT_OK_AND_ASSIGN(auto px, ExponentialLaw(FromCounts(x), epsilon / 2));
      ASSERT_OK_AND_ASSIGN(auto py, ExponentialLaw(FromCounts(y), epsilon / 2));
      std::vector<double> ox = ExpMechOracle(x, epsilon);
      for (int u = 0; u < 4; ++u) {
        EXPECT_NEAR(px.Probability(u), ox[u], 1e-14);
        worst = std::max(worst, std::log(px.Probability(u) / py.Probability(u)));
      }
    }
  }
  EXPECT_LE(worst, epsilon + 1e-12);
  EXPECT_GT(worst, 0.5 * epsilon);
}

TEST(PureSelectTest, DisabledNoiseIsPlurality) {
  RandomStream s = NoiseStream(8);
  EXPECT_THAT(PureSelect(FromCounts({1, 0, 4, 4}), 1.0, s, {.disable_noise = true}),
              IsOkAndHolds(2));
}

TEST(LocalRandomizeTest, FlipProbability) {
  EXPECT_NEAR(LocalFlipProbability(2.0), 1 / (1 + std::exp(1.0)), 1e-15);
}

TEST(LocalRandomizeTest, Validation) {
  RandomStream s = NoiseStream(9);
  EXPECT_FALSE(LocalRandomize(3, 3, 1.0, s).ok());
  EXPECT_FALSE(LocalRandomize(0, 3, 9.0, s).ok());
  EXPECT_FALSE(LocalRandomize(0, (int64_t{1} << 20) + 1, 1.0, s).ok());
  EXPECT_FALSE(LocalAggregate({LocalMessage(3, 0), LocalMessage(4, 0)}, 3, 1.0)
                   .ok());
}

// Probability of a message given the item, from the flip model directly.
double MessageOracle(const LocalMessage& m, int64_t item, double epsilon) {
  const double q = 1 / (1 + std::exp(epsilon / 2));
  double p = 1.0;
  for (int64_t u = 0; u < static_cast<int64_t>(m.size()); ++u) {
    const bool truth = u == item;
    p *= (m[u] != truth) ? q : 1 - q;
  }
  return p;
}

TEST(LocalRandomizeTest, ExhaustiveRatioAudit) {
  for (int64_t size = 1; size <= 4; ++size) {
    for (double epsilon : {0.5, 1.0, 3.0}) {
      for (uint64_t bits = 0; bits < (uint64_t{1} << size); ++bits) {
        LocalMessage m(size);
        for (int64_t u = 0; u < size; ++u) m[u] = (bits >> u) & 1;
        for (int64_t a = 0; a < size; ++a) {
          ASSERT_OK_AND_ASSIGN(double pa,
                               LocalMessageProbability(m, a, epsilon));
          EXPECT_NEAR(pa, MessageOracle(m, a, epsilon), 1e-15);
          for (int64_t b = 0; b < size; ++b) {
            const double ratio = pa / MessageOracle(m, b, epsilon);
            EXPECT_LE(ratio, std::exp(epsilon) * (1 + 1e-12));
          }
        }
      }
    }
  }
}

TEST(LocalRandomizeTest, EmpiricalMessageLaw) {
  constexpr int kTrials = 40000;
  std::vector<int> hits(8, 0);
  for (uint64_t k = 0; k < kTrials; ++k) {
    RandomStream s = NoiseStream(10, k);
    ASSERT_OK_AND_ASSIGN(LocalMessage m, LocalRandomize(1, 3, 1.0, s));
    ++hits[m[0] | (m[1] << 1) | (m[2] << 2)];
  }
  for (int bits = 0; bits < 8; ++bits) {
    LocalMessage m = {static_cast<uint8_t>(bits & 1),
                      static_cast<uint8_t>((bits >> 1) & 1),
                      static_cast<uint8_t>((bits >> 2) & 1)};
    const double p = MessageOracle(m, 1, 1.0);
    EXPECT_NEAR(hits[bits] / static_cast<double>(kTrials), p,
                4 * std::sqrt(p * (1 - p) / kTrials));
  }
}

TEST(LocalAggregateTest, SingleUserAtLargeEpsilon) {
  constexpr int kTrials = 1000;
  std::vector<double> mean(5, 0.0);
  for (uint64_t k = 0; k < kTrials; ++k) {
    RandomStream s = NoiseStream(11, k);
    ASSERT_OK_AND_ASSIGN(LocalMessage m, LocalRandomize(2, 5, 8.0, s));
    ASSERT_OK_AND_ASSIGN(LocalAggregateResult r, LocalAggregate({m}, 5, 8.0));
    for (int u = 0; u < 5; ++u) mean[u] += r.histogram.Estimate(u) / kTrials;
  }
  for (int u = 0; u < 5; ++u) EXPECT_NEAR(mean[u], u == 2 ? 1.0 : 0.0, 0.1);
}

TEST(LocalAggregateTest, ManyUsersDebiased) {
  constexpr int64_t kUsers = 10000;
  std::vector<LocalMessage> messages;
  for (uint64_t i = 0; i < kUsers; ++i) {
    RandomStream s = NoiseStream(12, i);
    ASSERT_OK_AND_ASSIGN(LocalMessage m, LocalRandomize(0, 4, 1.0, s));
    messages.push_back(std::move(m));
  }
  ASSERT_OK_AND_ASSIGN(LocalAggregateResult r,
                       LocalAggregate(messages, 4, 1.0));
  const double ratio = r.histogram.Estimate(0) / kUsers;
  EXPECT_GE(ratio, 0.95);
  EXPECT_LE(ratio, 1.05);
  EXPECT_EQ(r.argmax, 0);
}

TEST(LocalAggregateTest, DisabledNoiseCountsExactly) {
  std::vector<LocalMessage> messages;
  MechanismOptions off{.disable_noise = true};
  for (int64_t item : {2, 1, 2, 0, 2}) {
    RandomStream s = NoiseStream(13, item);
    ASSERT_OK_AND_ASSIGN(LocalMessage m, LocalRandomize(item, 3, 1.0, s, off));
    messages.push_back(m);
  }
  ASSERT_OK_AND_ASSIGN(LocalAggregateResult r,
                       LocalAggregate(messages, 3, 1.0, off));
  EXPECT_DOUBLE_EQ(r.histogram.Estimate(2), 3.0);
  EXPECT_DOUBLE_EQ(r.histogram.Estimate(1), 1.0);
  EXPECT_EQ(r.argmax, 2);
}

TEST(DpSelectTest, DeterministicGivenStreams) {
  VoteSet<int64_t> v = FromCounts({3, 5, 4});
  for (uint64_t k = 0; k < 20; ++k) {
    RandomStream a = NoiseStream(14, k);
    RandomStream b = NoiseStream(14, k);
    EXPECT_EQ(ApproxSelect(v, kApprox, a)->output,
              ApproxSelect(v, kApprox, b)->output);
    EXPECT_EQ(PureSelect(v, 1.0, a).value(), PureSelect(v, 1.0, b).value());
    EXPECT_EQ(LocalRandomize(1, 3, 1.0, a).value(),
              LocalRandomize(1, 3, 1.0, b).value());
  }
}

}  // namespace
}  // namespace userdp
