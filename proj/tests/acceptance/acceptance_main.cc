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

// Acceptance runs. Prints one PASS/FAIL line per criterion and writes each
// run's CSV to the output directory (first argument, default
// "acceptance_out"). Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "testing/oracles.h"
#include "userdp/concepts.h"
#include "userdp/harness.h"
#include "userdp/randomness.h"
#include "userdp/sample_source.h"
#include "userdp/serialization.h"
#include "userdp/shuffle.h"
#include "userdp/sq.h"
#include "userdp/stable_learners.h"
#include "userdp/status_macros.h"
#include "userdp/user_level_learners.h"

namespace userdp {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string csv;
};

using Criterion = std::function<absl::StatusOr<Outcome>()>;

std::string Fmt(double v) { return absl::StrFormat("%.17g", v); }

double Fraction(int64_t hits, int64_t total) {
  return static_cast<double>(hits) / static_cast<double>(total);
}

ExperimentConfig BaseConfig(uint64_t seed) {
  ExperimentConfig c;
  c.seed = SeedRoot::FromUint64(seed);
  c.threads = 1;
  return c;
}

absl::StatusOr<Outcome> CorrelatedSamplingMarginals() {
  ExperimentConfig c = BaseConfig(101);
  c.cs_test = {.coupling = false,
               .outcomes = 8,
               .distributions = 20,
               .draws = 100000};
  USERDP_ASSIGN_OR_RETURN(std::vector<CsTestRecord> records, RunCsTest(c));
  double worst = 0.0;
  for (const CsTestRecord& r : records) worst = std::max(worst, r.tv);
  return Outcome{worst <= 0.02,
                 absl::StrFormat("max empirical TV %.4f over %d distributions "
                                 "(bound 0.02)",
                                 worst, records.size()),
                 CsTestCsv(records)};
}

absl::StatusOr<Outcome> CorrelatedSamplingCoupling() {
  ExperimentConfig c = BaseConfig(102);
  c.cs_test = {.coupling = true,
               .outcomes = 8,
               .distributions = 20,
               .draws = 10000,
               .min_tv = 0.05,
               .max_tv = 0.9};
  USERDP_ASSIGN_OR_RETURN(std::vector<CsTestRecord> records, RunCsTest(c));
  double worst_slack = -1.0;
  int64_t bad = 0;
  for (const CsTestRecord& r : records) {
    const double slack = r.disagreement - (2.0 * r.tv + 0.03);
    worst_slack = std::max(worst_slack, slack);
    bad += slack > 0.0;
  }
  return Outcome{bad == 0,
                 absl::StrFormat("%d of %d pairs exceed 2 tv + 0.03; worst "
                                 "margin %.4f",
                                 bad, records.size(), worst_slack),
                 CsTestCsv(records)};
}

absl::StatusOr<Outcome> AuditAll(const char* mechanism, int64_t min_universe,
                                 int64_t max_users) {
  std::string csv = "mechanism,universe_size,max_users,epsilon,max_ratio,"
                    "bound,comparisons,pass\n";
  bool pass = true;
  double worst = 0.0;
  for (int64_t u = min_universe; u <= 4; ++u) {
    for (double eps : {0.5, 1.0, 2.0}) {
      USERDP_ASSIGN_OR_RETURN(AuditReport r,
                              AuditMechanism(mechanism, u, max_users, eps));
      const bool ok = r.pass && r.max_ratio <= std::exp(eps) + 1e-12;
      pass = pass && ok;
      worst = std::max(worst, r.max_ratio / std::exp(eps));
      absl::StrAppend(&csv, mechanism, ",", u, ",", max_users, ",", Fmt(eps),
                      ",", Fmt(r.max_ratio), ",", Fmt(r.bound), ",",
                      r.comparisons, ",", ok ? 1 : 0, "\n");
    }
  }
  return Outcome{pass,
                 absl::StrFormat("%s: max ratio / e^eps = %.12f", mechanism,
                                 worst),
                 csv};
}

absl::StatusOr<Outcome> ShuffleSummationSigns() {
  std::string csv =
      "epsilon,users,direction,trials,violations,r,p,quantile,tail_hits\n";
  int64_t violations = 0, tail_hits = 0, trials = 0;
  const double beta = 0.1, delta = 1e-6;
  uint64_t seed = 500;
  for (double eps : {0.5, 1.0}) {
    for (int64_t n : {10, 100}) {
      for (bool under : {false, true}) {
        ExperimentConfig c = BaseConfig(++seed);
        c.epsilon = eps;
        c.delta = delta;
        c.beta = beta;
        c.trials = 1250;
        c.shuffle_sum = {.users = n, .ones = n / 2, .under = under};
        USERDP_ASSIGN_OR_RETURN(std::vector<ShuffleSumRecord> records,
                                RunShuffleSum(c));
        USERDP_ASSIGN_OR_RETURN(
            NBParams nb,
            SummationNoise(eps, delta,
                           {.beta = beta, .r_constant = c.shuffle_r_constant}));
        const int64_t q =
            ::userdp::testing::NegativeBinomialQuantile(1.0 - beta, nb.r, nb.p);
        int64_t v = 0, hits = 0;
        for (const ShuffleSumRecord& r : records) {
          v += r.violation;
          hits += std::abs(r.estimate - r.true_sum) > q;
        }
        violations += v;
        tail_hits += hits;
        trials += c.trials;
        absl::StrAppend(&csv, Fmt(eps), ",", n, ",", under ? "under" : "over",
                        ",", c.trials, ",", v, ",", Fmt(nb.r), ",", Fmt(nb.p),
                        ",", q, ",", hits, "\n");
      }
    }
  }
  const double tail = Fraction(tail_hits, trials);
  return Outcome{violations == 0 && tail <= beta + 0.03,
                 absl::StrFormat("%d violations in %d trials; tail frequency "
                                 "%.4f (bound %.2f)",
                                 violations, trials, tail, beta + 0.03),
                 csv};
}

absl::StatusOr<Outcome> NegativeBinomialAdditivity() {
  struct Case {
    double r, p;
    int64_t n;
  };
  const std::vector<Case> cases = {{5.0, std::exp(-0.2), 10},
                                   {100.0, std::exp(-0.1), 50}};
  constexpr int64_t kDraws = 100000;
  std::string csv =
      "r,p,n,mean,expected_mean,mean_sigma,variance,expected_variance,"
      "variance_sigma\n";
  bool pass = true;
  double worst = 0.0;
  for (size_t k = 0; k < cases.size(); ++k) {
    const Case& c = cases[k];
    USERDP_ASSIGN_OR_RETURN(NBParams share, NBParams::Create(c.r / c.n, c.p));
    USERDP_ASSIGN_OR_RETURN(
        RandomStream stream,
        Derive(SeedRoot::FromUint64(600), SubstreamLabel("nb", {k})));
    double sum = 0.0, sum_sq = 0.0;
    for (int64_t i = 0; i < kDraws; ++i) {
      int64_t total = 0;
      for (int64_t j = 0; j < c.n; ++j) {
        total += SampleNegativeBinomial(share, stream);
      }
      const double x = static_cast<double>(total);
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / kDraws;
    const double var = (sum_sq - kDraws * mean * mean) / (kDraws - 1);
    // Cumulants of NB(r, p) counting failures before r successes, where
    // each trial fails with probability p.
    const double q = 1.0 - c.p;
    const double k2 = c.r * c.p / (q * q);
    const double k4 = c.r * c.p * (1.0 + 4.0 * c.p + c.p * c.p) / std::pow(q, 4);
    const double expected_mean = c.r * c.p / q;
    const double mean_sigma = std::sqrt(k2 / kDraws);
    const double var_sigma = std::sqrt(::userdp::testing::SampleVarianceVariance(
        k2, k4 + 3.0 * k2 * k2, kDraws));
    const double zm = std::abs(mean - expected_mean) / mean_sigma;
    const double zv = std::abs(var - k2) / var_sigma;
    worst = std::max({worst, zm, zv});
    pass = pass && zm <= 3.0 && zv <= 3.0;
    absl::StrAppend(&csv, Fmt(c.r), ",", Fmt(c.p), ",", c.n, ",", Fmt(mean),
                    ",", Fmt(expected_mean), ",", Fmt(mean_sigma), ",",
                    Fmt(var), ",", Fmt(k2), ",", Fmt(var_sigma), "\n");
  }
  return Outcome{pass,
                 absl::StrFormat("largest deviation %.2f sigma (bound 3)",
                                 worst),
                 csv};
}

absl::StatusOr<Outcome> RepresentationStability() {
  ExperimentConfig c = BaseConfig(700);
  c.class_spec.kind = ClassKind::kPoints;
  c.class_spec.domain_size = 32;
  c.distribution.weights = DistributionSpec::Weights::kDirichlet;
  c.model = LearningModel::kCentralPure;
  c.learner = LearnerKind::kRepresentation;
  c.alpha = 0.1;
  c.beta = 0.1;
  c.c0 = 10.0;
  c.stability_roots = 50;
  c.stability_redraws = 200;
  USERDP_ASSIGN_OR_RETURN(StabilityReport report, RunStability(c));
  int64_t stable = 0, accurate = 0;
  for (const StabilityRecord& r : report.records) {
    stable += r.frequency >= 0.9;
    accurate += r.modal_error <= 0.1;
  }
  const int64_t roots = static_cast<int64_t>(report.records.size());
  const double fs = Fraction(stable, roots), fa = Fraction(accurate, roots);
  return Outcome{fs >= 0.9 && fa >= 0.9,
                 absl::StrFormat("%.2f of roots with frequency >= 0.9, %.2f "
                                 "with modal error <= 0.1 (bounds 0.9)",
                                 fs, fa),
                 StabilityCsv(report)};
}

absl::StatusOr<Outcome> CentralApproxThresholds() {
  ExperimentConfig c = BaseConfig(800);
  c.class_spec.kind = ClassKind::kThresholds;
  c.class_spec.domain_size = 64;
  c.distribution.weights = DistributionSpec::Weights::kDirichlet;
  c.model = LearningModel::kCentralApprox;
  c.learner = LearnerKind::kBoost;
  c.alpha = 0.1;
  c.beta = 0.1;
  c.epsilon = 1.0;
  c.delta = 1e-6;
  c.user_constant = 20.0;
  c.c0 = 0.1;
  c.trials = 50;
  USERDP_ASSIGN_OR_RETURN(ExperimentResult result, RunExperiment(c));
  USERDP_ASSIGN_OR_RETURN(
      int64_t formula,
      CentralApproxUserCount(c.epsilon, c.delta, c.beta, c.user_constant));
  bool counts_ok = true;
  for (const TrialRecord& r : result.records) {
    counts_ok = counts_ok && r.users == formula;
  }
  ExperimentConfig doubled = c;
  doubled.class_spec.domain_size = 128;
  doubled.trials = 1;
  USERDP_ASSIGN_OR_RETURN(ExperimentResult wide, RunExperiment(doubled));
  const int64_t wide_users = wide.records[0].users;
  const double rate = result.summary.success_rate;
  std::string csv = TrialsCsv(result.records);
  absl::StrAppend(&csv, TrialsCsv(wide.records));
  return Outcome{rate >= 0.9 && counts_ok && wide_users == formula,
                 absl::StrFormat("success %.2f (bound 0.9); n = %d at |X| = "
                                 "64 and n = %d at |X| = 128",
                                 rate, result.records[0].users, wide_users),
                 csv};
}

absl::StatusOr<Outcome> PureLearners() {
  std::string csv;
  std::string detail;
  bool pass = true;
  const double bits = std::log2(33.0);
  uint64_t seed = 900;
  for (LearningModel model :
       {LearningModel::kCentralPure, LearningModel::kLocal}) {
    ExperimentConfig c = BaseConfig(++seed);
    c.class_spec.kind = ClassKind::kPoints;
    c.class_spec.domain_size = 32;
    c.distribution.weights = DistributionSpec::Weights::kDirichlet;
    c.model = model;
    c.learner = LearnerKind::kRepresentation;
    c.alpha = 0.1;
    c.beta = 0.1;
    c.epsilon = 1.0;
    c.c0 = 10.0;
    c.trials = 50;
    USERDP_ASSIGN_OR_RETURN(ExperimentResult result, RunExperiment(c));
    const double denom =
        model == LearningModel::kLocal ? c.epsilon * c.epsilon : c.epsilon;
    const int64_t n = static_cast<int64_t>(
        std::ceil(20.0 * (bits + std::log(1.0 / c.beta)) / denom));
    bool counts_ok = true;
    for (const TrialRecord& r : result.records) {
      counts_ok = counts_ok && r.users == n;
    }
    pass = pass && counts_ok && result.summary.success_rate >= 0.9;
    absl::StrAppend(&detail, detail.empty() ? "" : "; ",
                    std::string(LearningModelName(model)), " success ",
                    absl::StrFormat("%.2f", result.summary.success_rate),
                    " with n = ", result.records[0].users,
                    counts_ok ? "" : " (expected n differs)");
    absl::StrAppend(&csv, TrialsCsv(result.records));
  }
  return Outcome{pass, detail, csv};
}

absl::StatusOr<Outcome> SqAgreement() {
  constexpr int kDims = 8;
  constexpr double kTau = 0.005, kBeta = 0.1;
  USERDP_ASSIGN_OR_RETURN(SqLearner sq, ConjunctionSqLearner(kDims, kTau));
  USERDP_ASSIGN_OR_RETURN(
      PseudoStableLearner learner,
      SqToPseudoStable(std::move(sq), kTau, kBeta,
                       {.profile = ConstantProfile::kDesk, .c0 = 10.0}));
  USERDP_ASSIGN_OR_RETURN(
      std::shared_ptr<const ConceptClass> concepts,
      BuildClass(ClassSpec{ClassKind::kConjunctions, 256, std::nullopt}));
  DistributionSpec spec;
  spec.weights = DistributionSpec::Weights::kDirichlet;
  const SeedRoot seed = SeedRoot::FromUint64(1000);
  constexpr int kRoots = 30;
  std::string csv = "root_index,root,output_a,output_b,agree,err\n";
  int64_t agree = 0, agree_accurate = 0;
  for (int k = 0; k < kRoots; ++k) {
    const SeedRoot root = TrialRoot(seed, k);
    USERDP_ASSIGN_OR_RETURN(RandomStream dist_stream,
                            Derive(root, SubstreamLabel("dist")));
    USERDP_ASSIGN_OR_RETURN(RealizableDistribution d,
                            BuildDistribution(spec, *concepts, dist_stream));
    USERDP_ASSIGN_OR_RETURN(RandomStream public_stream,
                            Derive(root, SubstreamLabel("public")));
    const SeedRoot public_root = public_stream.NextSeedRoot();
    std::vector<Hypothesis> outputs;
    for (uint64_t user : {0, 1}) {
      USERDP_ASSIGN_OR_RETURN(RandomStream data,
                              Derive(root, SubstreamLabel("user-data", {user})));
      DistributionSampleSource source(&d, std::move(data));
      USERDP_ASSIGN_OR_RETURN(Hypothesis h, learner.Run(source, public_root));
      outputs.push_back(std::move(h));
    }
    const bool same = outputs[0] == outputs[1];
    USERDP_ASSIGN_OR_RETURN(double err, DistributionalError(outputs[0], d));
    agree += same;
    agree_accurate += same && err <= 0.1;
    absl::StrAppend(&csv, k, ",", root.ToHex(), ",", outputs[0].ToHex(), ",",
                    outputs[1].ToHex(), ",", same ? 1 : 0, ",", Fmt(err),
                    "\n");
  }
  const double rate = Fraction(agree, kRoots);
  return Outcome{rate >= 0.9 && agree_accurate == agree,
                 absl::StrFormat("agreement %.2f (bound 0.9); %d of %d common "
                                 "outputs have err <= 0.1",
                                 rate, agree_accurate, agree),
                 csv};
}

absl::StatusOr<Outcome> RepresentationFromPureLearner() {
  ExperimentConfig c = BaseConfig(1100);
  c.class_spec.kind = ClassKind::kPoints;
  c.class_spec.domain_size = 16;
  c.distribution.weights = DistributionSpec::Weights::kDirichlet;
  c.epsilon = 0.5;
  c.users = 10;
  c.alpha = 0.25;
  c.beta = 0.1;
  c.c0 = 10.0;
  c.trials = 100;
  USERDP_ASSIGN_OR_RETURN(BuildRepResult result, RunBuildRep(c));
  int64_t covered = 0;
  for (const BuildRepRecord& r : result.coverage) covered += r.covered;
  const double rate = Fraction(covered, c.trials);
  const int64_t size = result.representation->size();
  const int64_t bound = 100 * static_cast<int64_t>(std::ceil(std::exp(5.0)));
  std::string csv = BuildRepCsv(result.coverage);
  absl::StrAppend(&csv, "# members,", size, ",runs,", result.runs, "\n");
  return Outcome{rate >= 0.75 && size <= bound && result.runs == bound,
                 absl::StrFormat("coverage %.2f (bound 0.75); |H| = %d from "
                                 "T = %d runs",
                                 rate, size, result.runs),
                 csv};
}

struct Entry {
  std::string name;
  double budget_seconds;
  Criterion run;
};

struct RunResult {
  Outcome outcome;
  double seconds = 0.0;
  absl::Status status;
};

RunResult Execute(const Entry& e) {
  const auto start = std::chrono::steady_clock::now();
  absl::StatusOr<Outcome> outcome = e.run();
  RunResult r;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count();
  if (outcome.ok()) {
    r.outcome = *std::move(outcome);
  } else {
    r.status = outcome.status();
  }
  return r;
}

int Main(int argc, char** argv) {
  const std::filesystem::path out_dir =
      argc > 1 ? argv[1] : "acceptance_out";
  std::filesystem::create_directories(out_dir);

  const std::vector<Entry> entries = {
      {"AC1", 10, CorrelatedSamplingMarginals},
      {"AC2", 10, CorrelatedSamplingCoupling},
      {"AC3", 5, [] { return AuditAll("exponential", 1, 4); }},
      {"AC4", 5, [] { return AuditAll("local-rr", 2, 1); }},
      {"AC5", 60, ShuffleSummationSigns},
      {"AC6", 30, NegativeBinomialAdditivity},
      {"AC7", 300, RepresentationStability},
      {"AC8", 600, CentralApproxThresholds},
      {"AC9", 1200, PureLearners},
      {"AC10", 300, SqAgreement},
      {"AC11", 300, RepresentationFromPureLearner},
  };

  bool all_pass = true;
  std::vector<std::string> first_csvs;
  for (const Entry& e : entries) {
    RunResult r = Execute(e);
    bool pass = r.status.ok() && r.outcome.pass && r.seconds < e.budget_seconds;
    std::string detail = r.status.ok() ? r.outcome.detail
                                       : std::string(r.status.ToString());
    std::printf("%s %s: %s [%.1f s, budget %.0f s]\n", e.name.c_str(),
                pass ? "PASS" : "FAIL", detail.c_str(), r.seconds,
                e.budget_seconds);
    std::fflush(stdout);
    all_pass = all_pass && pass;
    first_csvs.push_back(r.outcome.csv);
    const absl::Status written = WriteTextFile(
        (out_dir / absl::StrCat(e.name, ".csv")).string(), r.outcome.csv);
    if (!written.ok()) {
      std::printf("cannot write CSV for %s: %s\n", e.name.c_str(),
                  std::string(written.message()).c_str());
      all_pass = false;
    }
  }

  // Rerun everything with the same seeds and compare the CSVs byte for byte.
  std::vector<std::string> differing;
  for (size_t i = 0; i < entries.size(); ++i) {
    RunResult r = Execute(entries[i]);
    if (!r.status.ok() || r.outcome.csv != first_csvs[i] ||
        first_csvs[i].empty()) {
      differing.push_back(entries[i].name);
    }
  }
  const bool deterministic = differing.empty();
  std::string detail =
      deterministic
          ? absl::StrCat("CSV outputs of ", entries.size(),
                         " reruns are byte-identical")
          : absl::StrCat("CSV outputs differ for ", differing.size(),
                         " criteria, first ", differing.front());
  std::printf("AC12 %s: %s\n", deterministic ? "PASS" : "FAIL",
              detail.c_str());
  all_pass = all_pass && deterministic;
  return all_pass ? 0 : 1;
}

}  // namespace
}  // namespace userdp

int main(int argc, char** argv) { return userdp::Main(argc, argv); }
