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

#include "userdp/shuffle.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "testing/oracles.h"
#include "testing/status_matchers.h"
#include "userdp/randomness.h"

namespace userdp {
namespace {

using ::userdp::testing::NegativeBinomialDifferenceBelow;
using ::userdp::testing::NegativeBinomialQuantile;
using ::userdp::testing::StatusIs;

RandomStream TestStream(uint64_t seed) {
  return Derive(SeedRoot::FromUint64(seed), SubstreamLabel("nb", {seed}))
      .value();
}

SeedRoot TrialRoot(uint64_t experiment, uint64_t trial) {
  return Derive(SeedRoot::FromUint64(experiment), SubstreamLabel("trial", {trial}))
      ->NextSeedRoot();
}

// Parameters of the total noise, computed from the formula directly.
struct NoiseOracle {
  double r;
  double p;
};
NoiseOracle TotalNoise(double epsilon, double delta, double beta, double c) {
  return {std::ceil(c * (1.0 + std::log(1.0 / (beta * delta)))),
          std::exp(-0.2 * epsilon)};
}

double Frac(int64_t hits, int64_t trials) {
  return static_cast<double>(hits) / static_cast<double>(trials);
}

double McSlack(double p, int64_t trials) {
  return 4.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials)) + 1e-3;
}

TEST(NBParamsTest, Validation) {
  EXPECT_FALSE(NBParams::Create(0.0, 0.5).ok());
  EXPECT_FALSE(NBParams::Create(1.0, 1.0).ok());
  EXPECT_FALSE(NBParams::Create(1.0, 0.0).ok());
  ASSERT_OK_AND_ASSIGN(NBParams nb, NBParams::Create(5.0, 0.5));
  EXPECT_DOUBLE_EQ(nb.Mean(), 5.0);
  EXPECT_DOUBLE_EQ(nb.Variance(), 10.0);
}

TEST(NegativeBinomialTest, TinyPIsZero) {
  RandomStream s = TestStream(1);
  const NBParams nb = NBParams::Create(5.0, 1e-12).value();
  for (int i = 0; i < 10000; ++i) EXPECT_EQ(SampleNegativeBinomial(nb, s), 0);
}

TEST(NegativeBinomialTest, MeanOfNB5Half) {
  RandomStream s = TestStream(2);
  const NBParams nb = NBParams::Create(5.0, 0.5).value();
  double total = 0.0;
  for (int i = 0; i < 100000; ++i) total += SampleNegativeBinomial(nb, s);
  // sd of the mean is sqrt(10 / 1e5) = 0.01.
  EXPECT_NEAR(total / 1e5, 5.0, 0.15);
}

TEST(NegativeBinomialTest, MatchesPmfOracle) {
  RandomStream s = TestStream(3);
  const double r = 2.7, p = 0.6;
  const NBParams nb = NBParams::Create(r, p).value();
  constexpr int kDraws = 200000;
  std::map<int64_t, int64_t> hist;
  for (int i = 0; i < kDraws; ++i) ++hist[SampleNegativeBinomial(nb, s)];
  for (int64_t k = 0; k <= 10; ++k) {
    const double pk = std::exp(::userdp::testing::NegativeBinomialLogPmf(k, r, p));
    EXPECT_NEAR(Frac(hist[k], kDraws), pk, McSlack(pk, kDraws)) << k;
  }
}

TEST(NegativeBinomialTest, PmfOracleAgreesWithIncompleteBeta) {
  for (double r : {0.3, 5.0, 120.0}) {
    for (int64_t k : {0, 3, 40, 400}) {
      EXPECT_NEAR(::userdp::testing::NegativeBinomialCdf(k, r, 0.8),
                  ::userdp::testing::NegativeBinomialCdfViaBeta(k, r, 0.8),
                  1e-10);
    }
  }
}

TEST(NegativeBinomialTest, Additivity) {
  // Sum of 10 NB(0.5, 0.5) draws against NB(5, 0.5): mean 5, variance 10.
  RandomStream s = TestStream(4);
  const NBParams share = NBParams::Create(0.5, 0.5).value();
  const NBParams whole = NBParams::Create(5.0, 0.5).value();
  constexpr int kDraws = 100000;
  double s1 = 0, s2 = 0, t1 = 0, t2 = 0;
  for (int i = 0; i < kDraws; ++i) {
    int64_t sum = 0;
    for (int j = 0; j < 10; ++j) sum += SampleNegativeBinomial(share, s);
    const int64_t one = SampleNegativeBinomial(whole, s);
    s1 += sum;
    s2 += static_cast<double>(sum) * sum;
    t1 += one;
    t2 += static_cast<double>(one) * one;
  }
  const double p = 0.5, r = 5.0;
  const double k2 = r * p / ((1 - p) * (1 - p));
  const double k4 = r * p * (1 + 4 * p + p * p) / std::pow(1 - p, 4);
  const double mu4 = k4 + 3 * k2 * k2;
  const double mean_sd = std::sqrt(k2 / kDraws);
  const double var_sd =
      std::sqrt(::userdp::testing::SampleVarianceVariance(k2, mu4, kDraws));
  for (auto [a, b] : {std::pair{s1, s2}, std::pair{t1, t2}}) {
    const double mean = a / kDraws;
    const double var = (b - kDraws * mean * mean) / (kDraws - 1);
    EXPECT_NEAR(mean, 5.0, 3 * mean_sd);
    EXPECT_NEAR(var, k2, 3 * var_sd);
  }
}

TEST(SummationNoiseTest, Formula) {
  ASSERT_OK_AND_ASSIGN(NBParams nb, SummationNoise(1.0, 1e-6, {}));
  NoiseOracle o = TotalNoise(1.0, 1e-6, 0.1, 1000.0);
  EXPECT_EQ(nb.r, o.r);
  EXPECT_DOUBLE_EQ(nb.p, o.p);
  EXPECT_FALSE(SummationNoise(1.0, 1e-6, {.r_constant = 0.0}).ok());
}

TEST(ShuffleSumTest, ValidatesInputs) {
  const std::vector<uint8_t> bits = {1, 0};
  EXPECT_THAT(ShuffleSumOver({}, 1.0, 1e-6, SeedRoot()),
              StatusIs(absl::StatusCode::kInvalidArgument));
  EXPECT_FALSE(ShuffleSumOver(bits, 0.0, 1e-6, SeedRoot()).ok());
  EXPECT_FALSE(ShuffleSumOver(bits, 1.5, 1e-6, SeedRoot()).ok());
  EXPECT_FALSE(ShuffleSumOver(bits, 1.0, 0.0, SeedRoot()).ok());
  EXPECT_FALSE(ShuffleSumOver(bits, 1.0, 1.0, SeedRoot()).ok());
  EXPECT_FALSE(ShuffleSumOver(std::vector<uint8_t>{2}, 1.0, 1e-6, SeedRoot())
                   .ok());
}

TEST(ShuffleSumTest, AllZerosOverestimate) {
  std::vector<uint8_t> bits(50, 0);
  for (uint64_t t = 0; t < 20; ++t) {
    ASSERT_OK_AND_ASSIGN(SummationResult r,
                         ShuffleSumOver(bits, 1.0, 1e-6, TrialRoot(1, t)));
    EXPECT_GE(r.estimate, 0);
  }
}

TEST(ShuffleSumTest, NoiseFreeIsExact) {
  std::vector<uint8_t> bits = {1, 0, 1, 1, 0, 1};
  SummationConfig off{.disable_noise = true};
  ASSERT_OK_AND_ASSIGN(SummationResult over,
                       ShuffleSumOver(bits, 1.0, 1e-6, SeedRoot(), off));
  ASSERT_OK_AND_ASSIGN(SummationResult under,
                       ShuffleSumUnder(bits, 1.0, 1e-6, SeedRoot(), off));
  EXPECT_EQ(over.estimate, 4);
  EXPECT_EQ(under.estimate, 4);
}

TEST(ShuffleSumTest, UnderEstimateBounds) {
  std::vector<uint8_t> ones(30, 1);
  std::vector<uint8_t> zeros(30, 0);
  for (uint64_t t = 0; t < 20; ++t) {
    ASSERT_OK_AND_ASSIGN(SummationResult a,
                         ShuffleSumUnder(ones, 1.0, 1e-6, TrialRoot(2, t)));
    ASSERT_OK_AND_ASSIGN(SummationResult b,
                         ShuffleSumUnder(zeros, 1.0, 1e-6, TrialRoot(3, t)));
    EXPECT_LE(a.estimate, 30);
    EXPECT_LE(b.estimate, 0);
  }
}

TEST(ShuffleSumTest, TranscriptAccounting) {
  std::vector<uint8_t> bits = {1, 1, 0, 1};
  ASSERT_OK_AND_ASSIGN(SummationResult r,
                       ShuffleSumOver(bits, 0.5, 1e-3, TrialRoot(4, 0)));
  ASSERT_EQ(r.transcript.user_message_counts.size(), 4u);
  int64_t total = 0;
  for (size_t i = 0; i < bits.size(); ++i) {
    int64_t user_total = 0;
    for (int64_t c : r.transcript.user_message_counts[i]) user_total += c;
    EXPECT_GE(user_total, bits[i]);
    total += user_total;
  }
  EXPECT_EQ(total, r.estimate);
  NoiseOracle o = TotalNoise(0.5, 1e-3, 0.1, 1000.0);
  EXPECT_EQ(r.transcript.noise.r, o.r);
}

TEST(ShuffleSumTest, ShuffleInvariance) {
  std::vector<int64_t> items = {0, 2, 2, 1, 2, 0, 3};
  SummationConfig config{.r_constant = 3.0};
  ASSERT_OK_AND_ASSIGN(ShuffleSelectResult r,
                       ShuffleSelect(items, 4, 1.0, 1e-6, TrialRoot(5, 0),
                                     config));
  std::vector<ShuffleMessage> messages = MaterializeMessages(r.transcript);
  EXPECT_EQ(AnalyzeMessages(messages), r.transcript.message_count_per_bucket);
  RandomStream s = TestStream(5);
  for (int round = 0; round < 20; ++round) {
    std::shuffle(messages.begin(), messages.end(), s);
    EXPECT_EQ(AnalyzeMessages(messages), r.transcript.message_count_per_bucket);
  }
  std::reverse(messages.begin(), messages.end());
  EXPECT_EQ(AnalyzeMessages(messages), r.transcript.message_count_per_bucket);
}

// estimate - sum exceeds the beta-quantile of NB(r, p) with frequency at most
// beta plus Monte Carlo slack.
TEST(ShuffleSumTest, OverestimateTailMatchesNBQuantile) {
  std::vector<uint8_t> bits(100, 0);
  std::fill(bits.begin(), bits.begin() + 40, 1);
  NoiseOracle o = TotalNoise(1.0, 1e-6, 0.1, 1000.0);
  const int64_t q = NegativeBinomialQuantile(0.9, o.r, o.p);
  constexpr int kTrials = 1000;
  int exceed = 0;
  for (uint64_t t = 0; t < kTrials; ++t) {
    ASSERT_OK_AND_ASSIGN(SummationResult r,
                         ShuffleSumOver(bits, 1.0, 1e-6, TrialRoot(6, t)));
    ASSERT_GE(r.estimate, 40);
    exceed += r.estimate - 40 > q;
  }
  EXPECT_LE(Frac(exceed, kTrials), 0.12);
}

TEST(ShuffleSumTest, UnderestimateTailMatchesNBQuantile) {
  std::vector<uint8_t> bits(100, 0);
  std::fill(bits.begin(), bits.begin() + 40, 1);
  NoiseOracle o = TotalNoise(1.0, 1e-6, 0.1, 1000.0);
  const int64_t q = NegativeBinomialQuantile(0.9, o.r, o.p);
  constexpr int kTrials = 1000;
  int exceed = 0;
  for (uint64_t t = 0; t < kTrials; ++t) {
    ASSERT_OK_AND_ASSIGN(SummationResult r,
                         ShuffleSumUnder(bits, 1.0, 1e-6, TrialRoot(7, t)));
    ASSERT_LE(r.estimate, 40);
    exceed += 40 - r.estimate > q;
  }
  EXPECT_LE(Frac(exceed, kTrials), 0.12);
}

TEST(ShuffleSumTest, BoundsHoldOnEveryTrial) {
  int violations = 0;
  for (uint64_t t = 0; t < 10000; ++t) {
    RandomStream s = TestStream(1000 + t);
    const int64_t n = 1 + static_cast<int64_t>(UniformIndex(s, 20).value());
    std::vector<uint8_t> bits(n);
    int64_t sum = 0;
    for (uint8_t& b : bits) sum += (b = s.Next() & 1);
    SummationConfig config{.r_constant = 3.0};
    ASSERT_OK_AND_ASSIGN(SummationResult over,
                         ShuffleSumOver(bits, 1.0, 1e-3, TrialRoot(8, t), config));
    ASSERT_OK_AND_ASSIGN(SummationResult under,
                         ShuffleSumUnder(bits, 1.0, 1e-3, TrialRoot(9, t), config));
    violations += over.estimate < sum;
    violations += under.estimate > sum;
  }
  EXPECT_EQ(violations, 0);
}

TEST(ShuffleSumTest, PrivacySmokeTest) {
  // Two users, x = (0, 1) against (1, 1). The hockey-stick divergence of the
  // empirical message-count laws stays within delta.
  const double epsilon = 1.0, delta = 0.1;
  SummationConfig config{.beta = 0.5, .r_constant = 3.0};
  constexpr int kSims = 1000000;
  std::map<int64_t, double> a, b;
  for (uint64_t t = 0; t < kSims; ++t) {
    const SeedRoot root = SeedRoot::FromUint64(t);
    ASSERT_OK_AND_ASSIGN(
        SummationResult ra,
        ShuffleSumOver(std::vector<uint8_t>{0, 1}, epsilon, delta, root, config));
    ASSERT_OK_AND_ASSIGN(
        SummationResult rb,
        ShuffleSumOver(std::vector<uint8_t>{1, 1}, epsilon, delta,
                       SeedRoot::FromUint64(t + kSims), config));
    a[ra.estimate] += 1.0 / kSims;
    b[rb.estimate] += 1.0 / kSims;
  }
  double ab = 0.0, ba = 0.0;
  for (const auto& [k, pa] : a) {
    ab += std::max(0.0, pa - std::exp(epsilon) * b[k]);
  }
  for (const auto& [k, pb] : b) {
    ba += std::max(0.0, pb - std::exp(epsilon) * a[k]);
  }
  EXPECT_LE(ab, delta + 0.005);
  EXPECT_LE(ba, delta + 0.005);
}

std::vector<int64_t> Unanimous(int64_t n, int64_t element) {
  return std::vector<int64_t>(n, element);
}

// Two buckets, everyone votes bucket 0. Bucket estimates are n - Z_0 and
// -Z_1, so bucket 0 wins (ties included) iff Z_0 - Z_1 < n + 1.
double UnanimousOracle(int64_t n, double epsilon, double delta, double c) {
  NoiseOracle o = TotalNoise(epsilon / 2, delta / 2, 0.1, c);
  return NegativeBinomialDifferenceBelow(n + 1, o.r, o.p);
}

void CheckUnanimous(int64_t n, double c, int trials, uint64_t experiment) {
  SummationConfig config{.r_constant = c};
  int hits = 0;
  for (uint64_t t = 0; t < static_cast<uint64_t>(trials); ++t) {
    ASSERT_OK_AND_ASSIGN(ShuffleSelectResult r,
                         ShuffleSelect(Unanimous(n, 0), 2, 1.0, 1e-6,
                                       TrialRoot(experiment, t), config));
    hits += r.output == 0;
  }
  const double p = UnanimousOracle(n, 1.0, 1e-6, c);
  EXPECT_NEAR(Frac(hits, trials), p, McSlack(p, trials))
      << "n = " << n << ", c = " << c;
}

TEST(ShuffleSelectTest, UnanimousMatchesNBDifferenceOracle) {
  // At n = 200 the success probability is about 0.97 even at the smallest
  // admissible constant, and close to a coin flip at c = 1000.
  EXPECT_LT(UnanimousOracle(200, 1.0, 1e-6, 3.0), 0.99);
  CheckUnanimous(200, 3.0, 2000, 10);
  CheckUnanimous(200, 1000.0, 2000, 11);
}

TEST(ShuffleSelectTest, UnanimousReachesHighAccuracyWithEnoughUsers) {
  ASSERT_GE(UnanimousOracle(400, 1.0, 1e-6, 3.0), 0.995);
  SummationConfig config{.r_constant = 3.0};
  int hits = 0;
  constexpr int kTrials = 1000;
  for (uint64_t t = 0; t < kTrials; ++t) {
    ASSERT_OK_AND_ASSIGN(ShuffleSelectResult r,
                         ShuffleSelect(Unanimous(400, 0), 2, 1.0, 1e-6,
                                       TrialRoot(12, t), config));
    hits += r.output == 0;
  }
  EXPECT_GE(Frac(hits, kTrials), 0.99);
}

TEST(ShuffleSelectTest, SingletonUniverse) {
  for (uint64_t t = 0; t < 20; ++t) {
    ASSERT_OK_AND_ASSIGN(ShuffleSelectResult r,
                         ShuffleSelect(Unanimous(5, 0), 1, 1.0, 1e-6,
                                       TrialRoot(13, t)));
    EXPECT_EQ(r.output, 0);
  }
}

TEST(ShuffleSelectTest, MarginSweepMatchesOracle) {
  // Counts (n0, n1) = (m, m - g) out of n = 2m - g users; bucket 1 wins iff
  // Z_1 - Z_0 < -g, so Pr[bucket 0] = Pr[Z_0 - Z_1 < g + 1].
  SummationConfig config{.r_constant = 3.0};
  NoiseOracle o = TotalNoise(0.5, 0.5e-6, 0.1, 3.0);
  for (int64_t g : {0, 20, 60, 150}) {
    std::vector<int64_t> items(300, 0);
    std::fill(items.begin() + 150, items.end() - g, 1);
    items.resize(300 - g);
    constexpr int kTrials = 1000;
    int hits = 0;
    for (uint64_t t = 0; t < kTrials; ++t) {
      ASSERT_OK_AND_ASSIGN(ShuffleSelectResult r,
                           ShuffleSelect(items, 2, 1.0, 1e-6,
                                         TrialRoot(100 + g, t), config));
      hits += r.output == 0;
    }
    const double p = NegativeBinomialDifferenceBelow(g + 1, o.r, o.p);
    EXPECT_NEAR(Frac(hits, kTrials), p, McSlack(p, kTrials)) << "g = " << g;
  }
}

TEST(ShuffleSelectTest, EstimatesNeverExceedCounts) {
  std::vector<int64_t> items = {0, 1, 1, 3, 3, 3};
  for (uint64_t t = 0; t < 200; ++t) {
    ASSERT_OK_AND_ASSIGN(ShuffleSelectResult r,
                         ShuffleSelect(items, 4, 1.0, 1e-6, TrialRoot(14, t),
                                       {.r_constant = 3.0}));
    ASSERT_EQ(r.estimates.size(), 4u);
    EXPECT_LE(r.estimates[0], 1);
    EXPECT_LE(r.estimates[1], 2);
    EXPECT_LE(r.estimates[2], 0);
    EXPECT_LE(r.estimates[3], 3);
  }
}

TEST(ShuffleHistogramTest, EmptyBucketsAreZeroAndOccupiedWithinTail) {
  constexpr int64_t kUsers = 3000;
  std::vector<int64_t> items = Unanimous(kUsers, 2);
  SummationConfig config{.r_constant = 3.0};
  // Per-bucket summation at (eps/2, delta/2) with failure probability
  // beta / n.
  NoiseOracle o = TotalNoise(0.5, 0.5e-6, 0.1 / kUsers, 3.0);
  const int64_t tail = NegativeBinomialQuantile(1.0 - 0.1 / kUsers, o.r, o.p);
  ASSERT_LT(tail, kUsers);
  constexpr int kTrials = 200;
  int outside = 0;
  for (uint64_t t = 0; t < kTrials; ++t) {
    ASSERT_OK_AND_ASSIGN(ShuffleHistogramResult r,
                         ShuffleHistogram(items, 4, 1.0, 1e-6, TrialRoot(15, t),
                                          config));
    for (int64_t u : {0, 1, 3}) EXPECT_EQ(r.histogram.Estimate(u), 0.0);
    const double est = r.histogram.Estimate(2);
    EXPECT_LE(est, kUsers);
    outside += est < kUsers - tail;
  }
  EXPECT_LE(Frac(outside, kTrials), 0.1 / kUsers + McSlack(0.1 / kUsers, kTrials));
}

TEST(ShuffleTest, DeterministicGivenRoot) {
  std::vector<int64_t> items = {0, 1, 1, 2};
  ASSERT_OK_AND_ASSIGN(auto a, ShuffleSelect(items, 3, 1.0, 1e-6, TrialRoot(16, 0)));
  ASSERT_OK_AND_ASSIGN(auto b, ShuffleSelect(items, 3, 1.0, 1e-6, TrialRoot(16, 0)));
  EXPECT_EQ(a.estimates, b.estimates);
  EXPECT_EQ(a.transcript.user_message_counts, b.transcript.user_message_counts);
}

}  // namespace
}  // namespace userdp
