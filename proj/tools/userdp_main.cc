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

// userdp: runs learning experiments, stability measurements, correlated
// sampling checks, mechanism audits, shuffle summations and representation
// builds from a JSON config.
//
// Exit codes: 0 success, 1 runtime failure, 2 rejected config, 3 failed audit.

#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "json.hpp"
#include "userdp/harness.h"
#include "userdp/serialization.h"
#include "userdp/status_macros.h"

namespace {

using nlohmann::json;
using userdp::ExperimentConfig;

constexpr int kRuntimeFailure = 1;
constexpr int kConfigRejected = 2;
constexpr int kAuditFailed = 3;

struct Flags {
  std::string config;
  std::optional<std::string> seed;
  std::optional<int64_t> trials;
  std::optional<std::string> out;
  std::optional<std::string> profile;
  std::optional<int> threads;
};

int ExitCodeFor(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kFailedPrecondition:
    case absl::StatusCode::kResourceExhausted:
    case absl::StatusCode::kNotFound:
      return kConfigRejected;
    default:
      return kRuntimeFailure;
  }
}

absl::StatusOr<ExperimentConfig> LoadConfig(const Flags& flags) {
  json doc = json::object();
  if (!flags.config.empty()) {
    USERDP_ASSIGN_OR_RETURN(doc, userdp::ReadJsonFile(flags.config));
  }
  USERDP_ASSIGN_OR_RETURN(ExperimentConfig config,
                          userdp::ConfigFromJson(doc));
  if (flags.seed) {
    USERDP_ASSIGN_OR_RETURN(config.seed, userdp::SeedRoot::FromHex(*flags.seed));
  }
  if (flags.trials) config.trials = *flags.trials;
  if (flags.out) config.out = *flags.out;
  if (flags.profile) {
    USERDP_ASSIGN_OR_RETURN(config.profile, userdp::ParseProfile(*flags.profile));
  }
  if (flags.threads) config.threads = *flags.threads;
  if (config.out.empty()) config.out = "userdp_out";
  USERDP_RETURN_IF_ERROR(config.Validate());
  std::error_code ec;
  std::filesystem::create_directories(config.out, ec);
  if (ec) {
    return absl::UnavailableError(
        absl::StrFormat("cannot create %s: %s", config.out, ec.message()));
  }
  return config;
}

std::string OutPath(const ExperimentConfig& config, const char* name) {
  return (std::filesystem::path(config.out) / name).string();
}

absl::Status Learn(const ExperimentConfig& config) {
  USERDP_ASSIGN_OR_RETURN(userdp::ExperimentResult result,
                          userdp::RunExperiment(config));
  USERDP_RETURN_IF_ERROR(userdp::WriteTextFile(
      OutPath(config, "trials.csv"), userdp::TrialsCsv(result.records)));
  USERDP_RETURN_IF_ERROR(userdp::WriteTextFile(
      OutPath(config, "summary.json"),
      userdp::SummaryToJson(result.summary).dump(2) + "\n"));
  std::cout << absl::StrFormat(
      "%d trials, success rate %.4f, median err %.4g, median vote share %.4g\n",
      result.summary.trials, result.summary.success_rate,
      result.summary.err.p50, result.summary.vote_concentration.p50);
  return absl::OkStatus();
}

absl::Status Stability(const ExperimentConfig& config) {
  USERDP_ASSIGN_OR_RETURN(userdp::StabilityReport report,
                          userdp::RunStability(config));
  USERDP_RETURN_IF_ERROR(userdp::WriteTextFile(
      OutPath(config, "stability.csv"), userdp::StabilityCsv(report)));
  int64_t stable = 0, accurate = 0;
  for (const auto& r : report.records) {
    stable += r.frequency >= 0.9;
    accurate += r.modal_error <= config.alpha;
  }
  const double n = static_cast<double>(report.records.size());
  json summary{{"roots", report.records.size()},
               {"redraws", report.redraws},
               {"profile", std::string(userdp::ProfileName(report.profile))},
               {"fraction_frequency_at_least_0.9", stable / n},
               {"fraction_modal_error_at_most_alpha", accurate / n},
               {"frequency_median", report.frequency.p50},
               {"modal_error_median", report.modal_error.p50}};
  USERDP_RETURN_IF_ERROR(userdp::WriteTextFile(
      OutPath(config, "stability.json"), summary.dump(2) + "\n"));
  std::cout << summary.dump(2) << "\n";
  return absl::OkStatus();
}

absl::Status CsTest(const ExperimentConfig& config) {
  USERDP_ASSIGN_OR_RETURN(std::vector<userdp::CsTestRecord> records,
                          userdp::RunCsTest(config));
  USERDP_RETURN_IF_ERROR(userdp::WriteTextFile(OutPath(config, "cs_test.csv"),
                                               userdp::CsTestCsv(records)));
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    worst = std::max(worst, config.cs_test.coupling
                                ? r.disagreement - 2.0 * r.tv
                                : r.tv);
  }
  std::cout << absl::StrFormat(
      config.cs_test.coupling ? "max disagreement - 2 tv: %.4g\n"
                              : "max empirical tv: %.4g\n",
      worst);
  return absl::OkStatus();
}

absl::StatusOr<bool> Audit(const ExperimentConfig& config) {
  json reports = json::array();
  bool all_pass = true;
  for (double eps : config.audit.epsilons) {
    USERDP_ASSIGN_OR_RETURN(
        userdp::AuditReport r,
        userdp::AuditMechanism(config.audit.mechanism,
                               config.audit.universe_size,
                               config.audit.max_users, eps));
    all_pass = all_pass && r.pass;
    reports.push_back({{"mechanism", r.mechanism},
                       {"epsilon", r.epsilon},
                       {"bound", r.bound},
                       {"max_ratio", r.max_ratio},
                       {"comparisons", r.comparisons},
                       {"pass", r.pass},
                       {"worst_case", r.worst_case}});
    std::cout << absl::StrFormat("%s eps=%g max ratio %.17g bound %.17g %s\n",
                                 r.mechanism, eps, r.max_ratio, r.bound,
                                 r.pass ? "pass" : "FAIL");
  }
  USERDP_RETURN_IF_ERROR(userdp::WriteTextFile(OutPath(config, "audit.json"),
                                               reports.dump(2) + "\n"));
  return all_pass;
}

absl::Status ShuffleSum(const ExperimentConfig& config) {
  USERDP_ASSIGN_OR_RETURN(std::vector<userdp::ShuffleSumRecord> records,
                          userdp::RunShuffleSum(config));
  USERDP_RETURN_IF_ERROR(userdp::WriteTextFile(
      OutPath(config, "shuffle_sum.csv"), userdp::ShuffleSumCsv(records)));
  int64_t violations = 0;
  for (const auto& r : records) violations += r.violation;
  std::cout << absl::StrFormat("%d trials, %d sign violations\n",
                               records.size(), violations);
  return absl::OkStatus();
}

absl::Status BuildRep(const ExperimentConfig& config) {
  USERDP_ASSIGN_OR_RETURN(userdp::BuildRepResult result,
                          userdp::RunBuildRep(config));
  USERDP_RETURN_IF_ERROR(userdp::WriteTextFile(
      OutPath(config, "representation.json"),
      userdp::ClassToJson(*result.representation).dump(2) + "\n"));
  USERDP_RETURN_IF_ERROR(userdp::WriteTextFile(
      OutPath(config, "coverage.csv"), userdp::BuildRepCsv(result.coverage)));
  int64_t covered = 0;
  for (const auto& r : result.coverage) covered += r.covered;
  std::cout << absl::StrFormat("%d runs, |H| = %d, coverage %d/%d\n",
                               result.runs, result.representation->size(),
                               covered, result.coverage.size());
  return absl::OkStatus();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"User-level private learning experiments"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&flags](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON config file");
    sub->add_option("--seed", flags.seed, "root seed, hex");
    sub->add_option("--trials", flags.trials, "number of trials");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--profile", flags.profile, "constant profile")
        ->check(CLI::IsMember({"paper", "desk"}));
    sub->add_option("--threads", flags.threads, "worker threads")
        ->check(CLI::Range(1, 1024));
  };
  CLI::App* learn = app.add_subcommand("learn", "run learner trials");
  CLI::App* stability =
      app.add_subcommand("stability", "measure pseudo-global stability");
  CLI::App* cs_test =
      app.add_subcommand("cs-test", "check correlated sampling");
  CLI::App* audit = app.add_subcommand("audit", "exact DP audit");
  CLI::App* shuffle_sum =
      app.add_subcommand("shuffle-sum", "shuffle-model summation trials");
  CLI::App* build_rep = app.add_subcommand(
      "build-rep", "build a representation from a pure learner");
  for (CLI::App* sub : {learn, stability, cs_test, audit, shuffle_sum,
                        build_rep}) {
    add_common(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigRejected;
  }

  absl::StatusOr<ExperimentConfig> config = LoadConfig(flags);
  if (!config.ok()) {
    std::cerr << "config rejected: " << config.status() << "\n";
    return kConfigRejected;
  }
  absl::Status status;
  if (*learn) {
    status = Learn(*config);
  } else if (*stability) {
    status = Stability(*config);
  } else if (*cs_test) {
    status = CsTest(*config);
  } else if (*audit) {
    absl::StatusOr<bool> pass = Audit(*config);
    if (pass.ok() && !*pass) return kAuditFailed;
    status = pass.status();
  } else if (*shuffle_sum) {
    status = ShuffleSum(*config);
  } else {
    status = BuildRep(*config);
  }
  if (!status.ok()) {
    std::cerr << status << "\n";
    return ExitCodeFor(status);
  }
  return 0;
}
