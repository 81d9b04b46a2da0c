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

#include "userdp/harness.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "userdp/correlated_sampling.h"
#include "userdp/dp_select.h"
#include "userdp/sampling.h"
#include "userdp/serialization.h"
#include "userdp/shuffle.h"
#include "userdp/sq.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

using nlohmann::json;

absl::Status Unknown(const json& doc, const std::set<std::string>& keys,
                     std::string_view where) {
  for (const auto& [key, value] : doc.items()) {
    if (!keys.contains(key)) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown key '", key, "' in ", std::string(where)));
    }
  }
  return absl::OkStatus();
}

absl::Status ReadDouble(const json& doc, const char* key, double& out) {
  if (!doc.contains(key)) return absl::OkStatus();
  if (!doc[key].is_number()) {
    return absl::InvalidArgumentError(absl::StrCat(key, " must be a number"));
  }
  out = doc[key].get<double>();
  return absl::OkStatus();
}

absl::Status ReadInt(const json& doc, const char* key, int64_t& out) {
  if (!doc.contains(key)) return absl::OkStatus();
  if (!doc[key].is_number_integer()) {
    return absl::InvalidArgumentError(
        absl::StrCat(key, " must be an integer"));
  }
  out = doc[key].get<int64_t>();
  return absl::OkStatus();
}

absl::Status ReadString(const json& doc, const char* key, std::string& out) {
  if (!doc.contains(key)) return absl::OkStatus();
  if (!doc[key].is_string()) {
    return absl::InvalidArgumentError(absl::StrCat(key, " must be a string"));
  }
  out = doc[key].get<std::string>();
  return absl::OkStatus();
}

absl::Status ReadBool(const json& doc, const char* key, bool& out) {
  if (!doc.contains(key)) return absl::OkStatus();
  if (!doc[key].is_boolean()) {
    return absl::InvalidArgumentError(absl::StrCat(key, " must be a boolean"));
  }
  out = doc[key].get<bool>();
  return absl::OkStatus();
}

absl::Status ReadClass(const json& doc, ClassSpec& spec) {
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("class must be an object");
  }
  USERDP_RETURN_IF_ERROR(Unknown(doc, {"kind", "domain_size", "members"},
                                 "class"));
  if (doc.contains("members")) {
    USERDP_ASSIGN_OR_RETURN(spec.members, ClassFromJson(doc));
    spec.domain_size = spec.members->domain_size();
    return absl::OkStatus();
  }
  std::string kind = "thresholds";
  USERDP_RETURN_IF_ERROR(ReadString(doc, "kind", kind));
  USERDP_ASSIGN_OR_RETURN(spec.kind, ParseClassKind(kind));
  USERDP_RETURN_IF_ERROR(ReadInt(doc, "domain_size", spec.domain_size));
  return absl::OkStatus();
}

absl::Status ReadDistribution(const json& doc, DistributionSpec& spec) {
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("distribution must be an object");
  }
  USERDP_RETURN_IF_ERROR(Unknown(doc, {"weights", "target"}, "distribution"));
  if (doc.contains("weights")) {
    const json& w = doc["weights"];
    if (w.is_array()) {
      spec.weights = DistributionSpec::Weights::kExplicit;
      for (const json& v : w) {
        if (!v.is_number()) {
          return absl::InvalidArgumentError("weights must be numbers");
        }
        spec.explicit_weights.push_back(v.get<double>());
      }
    } else if (w == "uniform") {
      spec.weights = DistributionSpec::Weights::kUniform;
    } else if (w == "dirichlet") {
      spec.weights = DistributionSpec::Weights::kDirichlet;
    } else {
      return absl::InvalidArgumentError(
          "weights must be \"uniform\", \"dirichlet\" or an array");
    }
  }
  if (doc.contains("target")) {
    const json& t = doc["target"];
    if (t.is_number_integer()) {
      spec.target = DistributionSpec::Target::kIndex;
      spec.target_index = t.get<int64_t>();
    } else if (t == "random") {
      spec.target = DistributionSpec::Target::kRandom;
    } else if (t.is_string()) {
      spec.target = DistributionSpec::Target::kHex;
      spec.target_hex = t.get<std::string>();
    } else {
      return absl::InvalidArgumentError(
          "target must be \"random\", a member index or a hex string");
    }
  }
  return absl::OkStatus();
}

absl::Status CheckOpenUnit(const char* name, double v) {
  if (!(v > 0.0 && v < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat(name, " must be in (0, 1), got ", v));
  }
  return absl::OkStatus();
}

absl::Status CheckSampleCap(const ExperimentConfig& config, const char* what,
                            double value) {
  if (config.profile == ConstantProfile::kPaper &&
      value > kPaperProfileSampleCap) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "paper profile needs %s = %.4g, above the %.0g cap", what, value,
        kPaperProfileSampleCap));
  }
  return absl::OkStatus();
}

// Parameter overflow under the paper profile is the same rejection as the
// sample cap.
template <typename T>
absl::StatusOr<T> CapOverflow(const ExperimentConfig& config,
                              absl::StatusOr<T> value) {
  if (config.profile == ConstantProfile::kPaper && !value.ok() &&
      absl::IsResourceExhausted(value.status())) {
    return absl::FailedPreconditionError(absl::StrCat(
        "paper profile is infeasible: ", value.status().message()));
  }
  return value;
}

std::vector<double> DirichletWeights(int64_t n, RandomStream& stream) {
  std::vector<double> w(n);
  double total = 0.0;
  for (double& v : w) {
    v = SampleGamma(stream, 1.0, 1.0);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

std::string FormatDouble(double v) { return absl::StrFormat("%.17g", v); }

template <typename Record, typename Row>
std::string Csv(std::string_view header, absl::Span<const Record> records,
                Row row) {
  std::string out = absl::StrCat(std::string(header), "\n");
  for (const Record& r : records) absl::StrAppend(&out, row(r), "\n");
  return out;
}

}  // namespace

absl::StatusOr<LearnerKind> ParseLearnerKind(std::string_view name) {
  if (name == "boost") return LearnerKind::kBoost;
  if (name == "representation") return LearnerKind::kRepresentation;
  if (name == "sq-conjunctions") return LearnerKind::kSqConjunctions;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown learner '", std::string(name), "'"));
}

std::string_view LearnerKindName(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kBoost:
      return "boost";
    case LearnerKind::kRepresentation:
      return "representation";
    case LearnerKind::kSqConjunctions:
      return "sq-conjunctions";
  }
  return "unknown";
}

ProfileConstants ExperimentConfig::constants() const {
  ProfileConstants c;
  c.profile = profile;
  if (c0.has_value()) c.c0 = *c0;
  return c;
}

absl::Status ExperimentConfig::Validate() const {
  USERDP_RETURN_IF_ERROR(CheckOpenUnit("alpha", alpha));
  USERDP_RETURN_IF_ERROR(CheckOpenUnit("beta", beta));
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError("epsilon must be positive");
  }
  if (model == LearningModel::kCentralApprox ||
      model == LearningModel::kShuffle) {
    USERDP_RETURN_IF_ERROR(CheckOpenUnit("delta", delta));
  }
  if (!(user_constant > 0.0)) {
    return absl::InvalidArgumentError("K must be positive");
  }
  if (users.has_value() && *users < 0) {
    return absl::InvalidArgumentError("users must be nonnegative");
  }
  if (c0.has_value() && !(*c0 > 0.0)) {
    return absl::InvalidArgumentError("c0 must be positive");
  }
  if (!(shuffle_r_constant >= 3.0)) {
    return absl::InvalidArgumentError("shuffle_r_constant must be at least 3");
  }
  if (trials < 1) return absl::InvalidArgumentError("trials must be >= 1");
  if (threads < 1) return absl::InvalidArgumentError("threads must be >= 1");
  if (list_sample_size < 0 || list_cap < 0 || list_threshold < 0.0) {
    return absl::InvalidArgumentError("list parameters must be nonnegative");
  }
  if (restrict_zeta.has_value()) {
    USERDP_RETURN_IF_ERROR(CheckOpenUnit("restrict_zeta", *restrict_zeta));
  }
  USERDP_RETURN_IF_ERROR(CheckOpenUnit("sq_tau", sq_tau));
  if (stability_roots < 1 || stability_redraws < 1) {
    return absl::InvalidArgumentError("stability counts must be positive");
  }
  if (learner.has_value() && *learner != LearnerKind::kRepresentation &&
      (model == LearningModel::kCentralPure ||
       model == LearningModel::kLocal)) {
    return absl::InvalidArgumentError(
        "pure and local models need the representation learner");
  }
  return absl::OkStatus();
}

absl::StatusOr<ExperimentConfig> ConfigFromJson(const json& doc) {
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("config must be a JSON object");
  }
  USERDP_RETURN_IF_ERROR(Unknown(
      doc,
      {"class", "distribution", "model", "learner", "list_sample_size",
       "list_threshold", "list_cap", "restrict_zeta", "sq_tau", "alpha",
       "beta", "epsilon", "delta", "K", "users", "profile", "c0",
       "shuffle_r_constant", "disable_noise", "trials", "seed", "out",
       "threads", "stability", "cs_test", "shuffle_sum", "audit"},
      "config"));
  ExperimentConfig c;
  if (doc.contains("class")) {
    USERDP_RETURN_IF_ERROR(ReadClass(doc["class"], c.class_spec));
  }
  if (doc.contains("distribution")) {
    USERDP_RETURN_IF_ERROR(ReadDistribution(doc["distribution"],
                                            c.distribution));
  }
  std::string text;
  if (doc.contains("model")) {
    USERDP_RETURN_IF_ERROR(ReadString(doc, "model", text));
    USERDP_ASSIGN_OR_RETURN(c.model, ParseLearningModel(text));
  }
  if (doc.contains("learner")) {
    USERDP_RETURN_IF_ERROR(ReadString(doc, "learner", text));
    USERDP_ASSIGN_OR_RETURN(c.learner, ParseLearnerKind(text));
  }
  if (doc.contains("profile")) {
    USERDP_RETURN_IF_ERROR(ReadString(doc, "profile", text));
    USERDP_ASSIGN_OR_RETURN(c.profile, ParseProfile(text));
  }
  if (doc.contains("seed")) {
    USERDP_RETURN_IF_ERROR(ReadString(doc, "seed", text));
    USERDP_ASSIGN_OR_RETURN(c.seed, SeedRoot::FromHex(text));
  }
  USERDP_RETURN_IF_ERROR(ReadInt(doc, "list_sample_size", c.list_sample_size));
  USERDP_RETURN_IF_ERROR(ReadDouble(doc, "list_threshold", c.list_threshold));
  USERDP_RETURN_IF_ERROR(ReadInt(doc, "list_cap", c.list_cap));
  if (doc.contains("restrict_zeta")) {
    double z = 0.0;
    USERDP_RETURN_IF_ERROR(ReadDouble(doc, "restrict_zeta", z));
    c.restrict_zeta = z;
  }
  USERDP_RETURN_IF_ERROR(ReadDouble(doc, "sq_tau", c.sq_tau));
  USERDP_RETURN_IF_ERROR(ReadDouble(doc, "alpha", c.alpha));
  USERDP_RETURN_IF_ERROR(ReadDouble(doc, "beta", c.beta));
  USERDP_RETURN_IF_ERROR(ReadDouble(doc, "epsilon", c.epsilon));
  USERDP_RETURN_IF_ERROR(ReadDouble(doc, "delta", c.delta));
  USERDP_RETURN_IF_ERROR(ReadDouble(doc, "K", c.user_constant));
  if (doc.contains("users")) {
    int64_t n = 0;
    USERDP_RETURN_IF_ERROR(ReadInt(doc, "users", n));
    c.users = n;
  }
  if (doc.contains("c0")) {
    double v = 0.0;
    USERDP_RETURN_IF_ERROR(ReadDouble(doc, "c0", v));
    c.c0 = v;
  }
  USERDP_RETURN_IF_ERROR(
      ReadDouble(doc, "shuffle_r_constant", c.shuffle_r_constant));
  USERDP_RETURN_IF_ERROR(ReadBool(doc, "disable_noise", c.disable_noise));
  USERDP_RETURN_IF_ERROR(ReadInt(doc, "trials", c.trials));
  USERDP_RETURN_IF_ERROR(ReadString(doc, "out", c.out));
  int64_t threads = c.threads;
  USERDP_RETURN_IF_ERROR(ReadInt(doc, "threads", threads));
  if (threads < 1 || threads > 1024) {
    return absl::InvalidArgumentError("threads must be in [1, 1024]");
  }
  c.threads = static_cast<int>(threads);

  if (doc.contains("stability")) {
    const json& s = doc["stability"];
    USERDP_RETURN_IF_ERROR(Unknown(s, {"roots", "redraws"}, "stability"));
    USERDP_RETURN_IF_ERROR(ReadInt(s, "roots", c.stability_roots));
    USERDP_RETURN_IF_ERROR(ReadInt(s, "redraws", c.stability_redraws));
  }
  if (doc.contains("cs_test")) {
    const json& s = doc["cs_test"];
    USERDP_RETURN_IF_ERROR(Unknown(
        s, {"mode", "outcomes", "distributions", "draws", "min_tv", "max_tv"},
        "cs_test"));
    std::string mode = "marginal";
    USERDP_RETURN_IF_ERROR(ReadString(s, "mode", mode));
    if (mode != "marginal" && mode != "coupling") {
      return absl::InvalidArgumentError(
          "cs_test mode must be marginal or coupling");
    }
    c.cs_test.coupling = mode == "coupling";
    USERDP_RETURN_IF_ERROR(ReadInt(s, "outcomes", c.cs_test.outcomes));
    USERDP_RETURN_IF_ERROR(
        ReadInt(s, "distributions", c.cs_test.distributions));
    USERDP_RETURN_IF_ERROR(ReadInt(s, "draws", c.cs_test.draws));
    USERDP_RETURN_IF_ERROR(ReadDouble(s, "min_tv", c.cs_test.min_tv));
    USERDP_RETURN_IF_ERROR(ReadDouble(s, "max_tv", c.cs_test.max_tv));
  }
  if (doc.contains("shuffle_sum")) {
    const json& s = doc["shuffle_sum"];
    USERDP_RETURN_IF_ERROR(
        Unknown(s, {"users", "ones", "direction"}, "shuffle_sum"));
    USERDP_RETURN_IF_ERROR(ReadInt(s, "users", c.shuffle_sum.users));
    USERDP_RETURN_IF_ERROR(ReadInt(s, "ones", c.shuffle_sum.ones));
    std::string direction = "over";
    USERDP_RETURN_IF_ERROR(ReadString(s, "direction", direction));
    if (direction != "over" && direction != "under") {
      return absl::InvalidArgumentError("direction must be over or under");
    }
    c.shuffle_sum.under = direction == "under";
  }
  if (doc.contains("audit")) {
    const json& s = doc["audit"];
    USERDP_RETURN_IF_ERROR(Unknown(
        s, {"mechanism", "universe_size", "max_users", "epsilons"}, "audit"));
    USERDP_RETURN_IF_ERROR(ReadString(s, "mechanism", c.audit.mechanism));
    USERDP_RETURN_IF_ERROR(
        ReadInt(s, "universe_size", c.audit.universe_size));
    USERDP_RETURN_IF_ERROR(ReadInt(s, "max_users", c.audit.max_users));
    if (s.contains("epsilons")) {
      if (!s["epsilons"].is_array()) {
        return absl::InvalidArgumentError("epsilons must be an array");
      }
      c.audit.epsilons.clear();
      for (const json& e : s["epsilons"]) {
        if (!e.is_number()) {
          return absl::InvalidArgumentError("epsilons must be numbers");
        }
        c.audit.epsilons.push_back(e.get<double>());
      }
    }
  }
  return c;
}

absl::StatusOr<std::shared_ptr<const ConceptClass>> BuildClass(
    const ClassSpec& spec) {
  if (spec.members.has_value()) {
    return std::make_shared<const ConceptClass>(*spec.members);
  }
  USERDP_ASSIGN_OR_RETURN(ConceptClass c,
                          StandardClass(spec.kind, spec.domain_size));
  return std::make_shared<const ConceptClass>(std::move(c));
}

absl::StatusOr<RealizableDistribution> BuildDistribution(
    const DistributionSpec& spec, const ConceptClass& concepts,
    RandomStream& stream) {
  const int64_t n = concepts.domain_size();
  Hypothesis target;
  switch (spec.target) {
    case DistributionSpec::Target::kRandom: {
      USERDP_ASSIGN_OR_RETURN(int64_t i, UniformIndex(stream, concepts.size()));
      target = concepts[i];
      break;
    }
    case DistributionSpec::Target::kIndex:
      if (spec.target_index < 0 || spec.target_index >= concepts.size()) {
        return absl::InvalidArgumentError(absl::StrCat(
            "target index ", spec.target_index, " is not a class member"));
      }
      target = concepts[spec.target_index];
      break;
    case DistributionSpec::Target::kHex: {
      USERDP_ASSIGN_OR_RETURN(target, Hypothesis::FromHex(spec.target_hex, n));
      if (!concepts.Contains(target)) {
        return absl::InvalidArgumentError("target is not a class member");
      }
      break;
    }
  }
  switch (spec.weights) {
    case DistributionSpec::Weights::kUniform:
      return RealizableDistribution::Uniform(n, std::move(target));
    case DistributionSpec::Weights::kDirichlet:
      return RealizableDistribution::Create(DirichletWeights(n, stream),
                                            std::move(target));
    case DistributionSpec::Weights::kExplicit:
      return RealizableDistribution::Create(spec.explicit_weights,
                                            std::move(target));
  }
  return absl::InternalError("unreachable");
}

namespace {

absl::StatusOr<LearnerSetup> BuildLearnerAt(const ExperimentConfig& config,
                                            double learner_beta) {
  USERDP_RETURN_IF_ERROR(config.Validate());
  LearnerSetup setup;
  USERDP_ASSIGN_OR_RETURN(setup.concepts, BuildClass(config.class_spec));
  const ConceptClass& c = *setup.concepts;
  const bool pure = config.model == LearningModel::kCentralPure ||
                    config.model == LearningModel::kLocal;
  setup.kind = config.learner.value_or(pure ? LearnerKind::kRepresentation
                                            : LearnerKind::kBoost);
  const ProfileConstants constants = config.constants();

  switch (setup.kind) {
    case LearnerKind::kBoost: {
      const int64_t m =
          config.list_sample_size > 0
              ? config.list_sample_size
              : static_cast<int64_t>(std::ceil(
                    2.0 *
                    (std::log(static_cast<double>(c.size())) +
                     std::log(10.0 / config.beta)) /
                    config.alpha));
      const int64_t cap = config.list_cap > 0 ? config.list_cap : c.size();
      USERDP_RETURN_IF_ERROR(
          CheckSampleCap(config, "m", static_cast<double>(m)));
      ListStableLearner list =
          ConsistentListLearner(setup.concepts, config.list_threshold, cap, m);
      if (config.restrict_zeta.has_value()) {
        USERDP_ASSIGN_OR_RETURN(list, RestrictAccuracy(std::move(list),
                                                       config.alpha,
                                                       *config.restrict_zeta));
        USERDP_RETURN_IF_ERROR(CheckSampleCap(
            config, "m", static_cast<double>(list.sample_size())));
      }
      USERDP_ASSIGN_OR_RETURN(
          StabilityParams params,
          CapOverflow(config, StabilityParams::Compute(
                                  list.eta(), list.list_bound(), learner_beta,
                                  constants)));
      USERDP_RETURN_IF_ERROR(
          CheckSampleCap(config, "k2", static_cast<double>(params.k2)));
      setup.pseudo = BoostToPseudoStable(std::move(list), config.alpha,
                                         learner_beta, params);
      setup.stability = params;
      break;
    }
    case LearnerKind::kRepresentation: {
      ProbabilisticRepresentation rep = TrivialRepresentation(setup.concepts);
      USERDP_ASSIGN_OR_RETURN(
          RepLearnerParams params,
          CapOverflow(config,
                      RepLearnerParams::Compute(rep.size_bits(), config.alpha,
                                                learner_beta, constants)));
      USERDP_RETURN_IF_ERROR(CheckSampleCap(
          config, "m", static_cast<double>(params.sample_size)));
      USERDP_ASSIGN_OR_RETURN(
          setup.pseudo,
          RepStableLearner(rep, config.alpha, learner_beta, constants));
      setup.representation = std::move(rep);
      break;
    }
    case LearnerKind::kSqConjunctions: {
      const int64_t n = c.domain_size();
      if (n < 2 || (n & (n - 1)) != 0) {
        return absl::InvalidArgumentError(
            "sq-conjunctions needs a power-of-two domain");
      }
      const int d = std::countr_zero(static_cast<uint64_t>(n));
      USERDP_ASSIGN_OR_RETURN(SqLearner sq,
                              ConjunctionSqLearner(d, config.sq_tau));
      USERDP_ASSIGN_OR_RETURN(
          int64_t per_query,
          CapOverflow(config, SqSampleSize(sq.query_budget, config.sq_tau,
                                           learner_beta, constants)));
      USERDP_RETURN_IF_ERROR(
          CheckSampleCap(config, "m", static_cast<double>(per_query)));
      USERDP_ASSIGN_OR_RETURN(
          setup.pseudo,
          SqToPseudoStable(std::move(sq), config.sq_tau, learner_beta,
                           constants));
      break;
    }
  }
  return setup;
}

}  // namespace

absl::StatusOr<LearnerSetup> BuildLearner(const ExperimentConfig& config) {
  // Selection-based learners need the pseudo-stable learner at beta / 3.
  return BuildLearnerAt(config, config.beta / 3.0);
}

absl::StatusOr<LearnerReport> RunLearner(const ExperimentConfig& config,
                                         const LearnerSetup& setup,
                                         const RealizableDistribution& d,
                                         const SeedRoot& root, int threads) {
  LearnerOptions options;
  options.user_constant = config.user_constant;
  options.users = config.users;
  options.threads = threads;
  options.mechanism.disable_noise = config.disable_noise;
  options.summation.r_constant = config.shuffle_r_constant;
  options.summation.beta = config.beta;
  switch (config.model) {
    case LearningModel::kCentralApprox:
      return LearnCentralApprox(*setup.pseudo, d, config.epsilon,
                                config.delta, config.beta, root, options);
    case LearningModel::kCentralPure:
      return LearnCentralPure(*setup.representation, d, config.alpha,
                              config.beta, config.epsilon, root,
                              config.constants(), options);
    case LearningModel::kLocal:
      return LearnLocal(*setup.representation, d, config.alpha, config.beta,
                        config.epsilon, root, config.constants(), options);
    case LearningModel::kShuffle:
      return LearnShuffle(*setup.pseudo, setup.concepts, d, config.epsilon,
                          config.delta, config.beta, root, options);
  }
  return absl::InternalError("unreachable");
}

SeedRoot TrialRoot(const SeedRoot& seed, int64_t trial) {
  // "trial" is registered, so derivation cannot fail.
  return Derive(seed,
                SubstreamLabel("trial", {static_cast<uint64_t>(trial)}))
      ->NextSeedRoot();
}

absl::StatusOr<ExperimentResult> RunExperiment(
    const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  USERDP_ASSIGN_OR_RETURN(LearnerSetup setup, BuildLearner(config));
  ExperimentResult result;
  result.records.resize(config.trials);
  USERDP_RETURN_IF_ERROR(ParallelFor(
      config.trials, config.threads, [&](int64_t t) -> absl::Status {
        TrialRecord& record = result.records[t];
        record.trial = t;
        record.root = TrialRoot(config.seed, t);
        USERDP_ASSIGN_OR_RETURN(RandomStream stream,
                                Derive(record.root, SubstreamLabel("dist")));
        USERDP_ASSIGN_OR_RETURN(
            RealizableDistribution d,
            BuildDistribution(config.distribution, *setup.concepts, stream));
        USERDP_ASSIGN_OR_RETURN(LearnerReport report,
                                RunLearner(config, setup, d, record.root));
        record.users = report.users;
        record.output = std::move(report.output);
        record.err = report.err;
        record.success = report.err <= config.alpha;
        record.vote_concentration = report.vote_concentration;
        return absl::OkStatus();
      }));
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  USERDP_ASSIGN_OR_RETURN(result.summary,
                          SummaryFromCsv(TrialsCsv(result.records)));
  result.summary.wall_seconds_total = seconds;
  result.summary.wall_seconds_per_trial =
      seconds / static_cast<double>(config.trials);
  return result;
}

std::string TrialsCsv(absl::Span<const TrialRecord> records) {
  return Csv("trial,root,users,output,err,success,vote_concentration",
             records, [](const TrialRecord& r) {
               return absl::StrCat(r.trial, ",", r.root.ToHex(), ",", r.users,
                                   ",", r.output.ToHex(), ",",
                                   FormatDouble(r.err), ",",
                                   r.success ? 1 : 0, ",",
                                   FormatDouble(r.vote_concentration));
             });
}

absl::StatusOr<TrialSummary> SummaryFromCsv(std::string_view csv) {
  std::vector<absl::string_view> lines =
      absl::StrSplit(absl::string_view(csv.data(), csv.size()), '\n',
                     absl::SkipEmpty());
  if (lines.empty()) return absl::InvalidArgumentError("empty CSV");
  std::vector<double> errs, concentrations;
  int64_t successes = 0;
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<absl::string_view> cells = absl::StrSplit(lines[i], ',');
    if (cells.size() != 7) {
      return absl::InvalidArgumentError(
          absl::StrCat("CSV line ", i + 1, " has ", cells.size(), " cells"));
    }
    double err = 0.0, vc = 0.0;
    int success = 0;
    if (!absl::SimpleAtod(cells[4], &err) ||
        !absl::SimpleAtoi(cells[5], &success) ||
        !absl::SimpleAtod(cells[6], &vc)) {
      return absl::InvalidArgumentError(
          absl::StrCat("CSV line ", i + 1, " is malformed"));
    }
    errs.push_back(err);
    concentrations.push_back(vc);
    successes += success;
  }
  if (errs.empty()) return absl::InvalidArgumentError("CSV has no trials");
  TrialSummary summary;
  summary.trials = static_cast<int64_t>(errs.size());
  summary.success_rate =
      static_cast<double>(successes) / static_cast<double>(summary.trials);
  summary.err = Summarize(errs);
  summary.vote_concentration = Summarize(concentrations);
  return summary;
}

json SummaryToJson(const TrialSummary& summary) {
  auto quantiles = [](const QuantileSummary& q) {
    return json{{"min", q.min}, {"p10", q.p10}, {"p50", q.p50},
                {"p90", q.p90}, {"max", q.max}, {"mean", q.mean}};
  };
  return json{{"trials", summary.trials},
              {"success_rate", summary.success_rate},
              {"err", quantiles(summary.err)},
              {"vote_concentration", quantiles(summary.vote_concentration)},
              {"wall_clock",
               {{"total_seconds", summary.wall_seconds_total},
                {"per_trial_seconds", summary.wall_seconds_per_trial}}}};
}

absl::StatusOr<StabilityReport> RunStability(const ExperimentConfig& config) {
  USERDP_ASSIGN_OR_RETURN(LearnerSetup setup,
                          BuildLearnerAt(config, config.beta));
  USERDP_ASSIGN_OR_RETURN(RandomStream stream,
                          Derive(config.seed, SubstreamLabel("dist")));
  USERDP_ASSIGN_OR_RETURN(
      RealizableDistribution d,
      BuildDistribution(config.distribution, *setup.concepts, stream));
  return MeasureStability(*setup.pseudo, d, config.stability_roots,
                          config.stability_redraws, config.seed,
                          config.threads);
}

std::string StabilityCsv(const StabilityReport& report) {
  std::string out = "root_index,root,modal,frequency,modal_error\n";
  for (size_t i = 0; i < report.records.size(); ++i) {
    const StabilityRecord& r = report.records[i];
    absl::StrAppend(&out, i, ",", r.root.ToHex(), ",", r.modal.ToHex(), ",",
                    FormatDouble(r.frequency), ",",
                    FormatDouble(r.modal_error), "\n");
  }
  return out;
}

double ExactDisagreement(absl::Span<const double> p,
                         absl::Span<const double> q) {
  double disagree = 0.0, stop = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    disagree += std::max(p[i] - q[i], 0.0) * (1.0 - q[i]) +
                std::max(q[i] - p[i], 0.0) * (1.0 - p[i]);
    stop += std::max(p[i], q[i]);
  }
  return disagree / stop;
}

absl::StatusOr<std::vector<CsTestRecord>> RunCsTest(
    const ExperimentConfig& config) {
  const CsTestSpec& spec = config.cs_test;
  if (spec.outcomes < 2 || spec.distributions < 1 || spec.draws < 1) {
    return absl::InvalidArgumentError(
        "cs_test needs >= 2 outcomes, >= 1 distribution and >= 1 draw");
  }
  if (spec.coupling &&
      !(spec.min_tv >= 0.0 && spec.min_tv < spec.max_tv && spec.max_tv <= 1)) {
    return absl::InvalidArgumentError("need 0 <= min_tv < max_tv <= 1");
  }
  std::vector<CsTestRecord> records(spec.distributions);
  USERDP_RETURN_IF_ERROR(ParallelFor(
      spec.distributions, config.threads, [&](int64_t k) -> absl::Status {
        USERDP_ASSIGN_OR_RETURN(
            RandomStream setup,
            Derive(config.seed,
                   SubstreamLabel("cs-test", {static_cast<uint64_t>(k)})));
        USERDP_ASSIGN_OR_RETURN(
            DiscreteDistribution p,
            DiscreteDistribution::Create(
                DirichletWeights(spec.outcomes, setup)));
        std::optional<DiscreteDistribution> q;
        CsTestRecord& record = records[k];
        record.index = k;
        if (spec.coupling) {
          for (int attempt = 0;; ++attempt) {
            if (attempt == 10000) {
              return absl::ResourceExhaustedError(
                  "no partner distribution in the requested TV range");
            }
            std::vector<double> r = DirichletWeights(spec.outcomes, setup);
            const double lambda = UniformUnit(setup);
            std::vector<double> mix(spec.outcomes);
            for (int64_t i = 0; i < spec.outcomes; ++i) {
              mix[i] = (1.0 - lambda) * p[i] + lambda * r[i];
            }
            USERDP_ASSIGN_OR_RETURN(DiscreteDistribution candidate,
                                    DiscreteDistribution::Create(mix));
            USERDP_ASSIGN_OR_RETURN(double tv,
                                    TotalVariationDistance(p, candidate));
            if (tv >= spec.min_tv && tv <= spec.max_tv) {
              q = std::move(candidate);
              record.tv = tv;
              break;
            }
          }
          record.exact_disagreement =
              ExactDisagreement(p.probabilities(), q->probabilities());
        }
        std::vector<int64_t> counts(spec.outcomes, 0);
        int64_t disagreements = 0;
        for (int64_t j = 0; j < spec.draws; ++j) {
          USERDP_ASSIGN_OR_RETURN(
              RandomStream a,
              Derive(config.seed,
                     SubstreamLabel("cs", {static_cast<uint64_t>(k),
                                           static_cast<uint64_t>(j)})));
          RandomStream b = a;
          USERDP_ASSIGN_OR_RETURN(int64_t x, CorrelatedSample(p, a));
          ++counts[x];
          if (q.has_value()) {
            USERDP_ASSIGN_OR_RETURN(int64_t y, CorrelatedSample(*q, b));
            disagreements += x != y;
          }
        }
        if (spec.coupling) {
          record.disagreement = static_cast<double>(disagreements) /
                                static_cast<double>(spec.draws);
        } else {
          double tv = 0.0;
          for (int64_t i = 0; i < spec.outcomes; ++i) {
            tv += std::abs(static_cast<double>(counts[i]) /
                               static_cast<double>(spec.draws) -
                           p[i]);
          }
          record.tv = 0.5 * tv;
        }
        return absl::OkStatus();
      }));
  return records;
}

std::string CsTestCsv(absl::Span<const CsTestRecord> records) {
  return Csv("index,tv,disagreement,exact_disagreement", records,
             [](const CsTestRecord& r) {
               return absl::StrCat(r.index, ",", FormatDouble(r.tv), ",",
                                   FormatDouble(r.disagreement), ",",
                                   FormatDouble(r.exact_disagreement));
             });
}

absl::StatusOr<std::vector<ShuffleSumRecord>> RunShuffleSum(
    const ExperimentConfig& config) {
  const ShuffleSumSpec& spec = config.shuffle_sum;
  if (spec.users < 1 || spec.ones < 0 || spec.ones > spec.users) {
    return absl::InvalidArgumentError("need users >= 1 and 0 <= ones <= users");
  }
  SummationConfig summation;
  summation.beta = config.beta;
  summation.r_constant = config.shuffle_r_constant;
  summation.disable_noise = config.disable_noise;
  std::vector<uint8_t> bits(spec.users, 0);
  std::fill(bits.begin(), bits.begin() + spec.ones, 1);
  std::vector<ShuffleSumRecord> records(config.trials);
  USERDP_RETURN_IF_ERROR(ParallelFor(
      config.trials, config.threads, [&](int64_t t) -> absl::Status {
        const SeedRoot root = TrialRoot(config.seed, t);
        USERDP_ASSIGN_OR_RETURN(
            SummationResult result,
            spec.under ? ShuffleSumUnder(bits, config.epsilon, config.delta,
                                         root, summation)
                       : ShuffleSumOver(bits, config.epsilon, config.delta,
                                        root, summation));
        ShuffleSumRecord& r = records[t];
        r.trial = t;
        r.true_sum = spec.ones;
        r.estimate = result.estimate;
        r.violation = spec.under ? r.estimate > r.true_sum
                                 : r.estimate < r.true_sum;
        return absl::OkStatus();
      }));
  return records;
}

std::string ShuffleSumCsv(absl::Span<const ShuffleSumRecord> records) {
  return Csv("trial,true_sum,estimate,error,violation", records,
             [](const ShuffleSumRecord& r) {
               return absl::StrCat(r.trial, ",", r.true_sum, ",", r.estimate,
                                   ",", r.estimate - r.true_sum, ",",
                                   r.violation ? 1 : 0);
             });
}

namespace {

// Calls `visit` with every vector of `k` nonnegative counts summing to `n`.
void ForEachComposition(int64_t n, int64_t k,
                        const std::function<void(std::vector<int64_t>&)>&
                            visit) {
  std::vector<int64_t> counts(k, 0);
  std::function<void(int64_t, int64_t)> rec = [&](int64_t i, int64_t left) {
    if (i == k - 1) {
      counts[i] = left;
      visit(counts);
      return;
    }
    for (int64_t c = 0; c <= left; ++c) {
      counts[i] = c;
      rec(i + 1, left - c);
    }
  };
  rec(0, n);
}

std::string CountsString(const std::vector<int64_t>& counts) {
  return absl::StrCat("[", absl::StrJoin(counts, ","), "]");
}

}  // namespace

absl::StatusOr<AuditReport> AuditMechanism(std::string_view mechanism,
                                           int64_t universe_size,
                                           int64_t max_users, double epsilon) {
  if (universe_size < 1 || universe_size > 6 || max_users < 1 ||
      max_users > 6) {
    return absl::InvalidArgumentError(
        "audits enumerate |U| <= 6 and n <= 6 only");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError("epsilon must be finite and >= 0");
  }
  AuditReport report;
  report.mechanism = std::string(mechanism);
  report.epsilon = epsilon;
  report.bound = std::exp(epsilon);
  report.max_ratio = 1.0;

  auto consider = [&report](double a, double b, const std::string& what) {
    ++report.comparisons;
    const double ratio = a / b;
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.worst_case = what;
    }
  };

  if (mechanism == "local-rr") {
    if (!(epsilon > 0.0)) {
      return absl::InvalidArgumentError("local-rr needs epsilon > 0");
    }
    for (int64_t a = 0; a < universe_size; ++a) {
      for (int64_t b = 0; b < universe_size; ++b) {
        if (a == b) continue;
        for (uint32_t bits = 0; bits < (1u << universe_size); ++bits) {
          LocalMessage message(universe_size);
          for (int64_t i = 0; i < universe_size; ++i) {
            message[i] = (bits >> i) & 1;
          }
          USERDP_ASSIGN_OR_RETURN(double pa, LocalMessageProbability(
                                                 message, a, epsilon));
          USERDP_ASSIGN_OR_RETURN(double pb, LocalMessageProbability(
                                                 message, b, epsilon));
          consider(pa, pb,
                   absl::StrCat("item ", a, " vs ", b, ", message ",
                                absl::StrJoin(message, "")));
        }
      }
    }
  } else if (mechanism == "exponential" || mechanism == "exponential-broken" ||
             mechanism == "uniform") {
    const double exponent = mechanism == "exponential"  ? 0.5 * epsilon
                            : mechanism == "uniform"    ? 0.0
                                                        : epsilon;
    if (universe_size >= 2) {
      USERDP_ASSIGN_OR_RETURN(OutcomeSpace universe,
                              OutcomeSpace::Grid(universe_size - 1));
      auto law_of = [&](const std::vector<int64_t>& counts)
          -> absl::StatusOr<std::vector<double>> {
        std::vector<int64_t> votes;
        for (int64_t u = 0; u < universe_size; ++u) {
          votes.insert(votes.end(), counts[u], u);
        }
        USERDP_ASSIGN_OR_RETURN(VoteSet<int64_t> set,
                                VoteSet<int64_t>::Create(universe, votes));
        USERDP_ASSIGN_OR_RETURN(ExponentialMechanismLaw law,
                                ExponentialLaw(set, exponent));
        std::vector<double> p(universe_size);
        for (int64_t u = 0; u < universe_size; ++u) p[u] = law.Probability(u);
        return p;
      };
      absl::Status status;
      for (int64_t n = 1; n <= max_users && status.ok(); ++n) {
        ForEachComposition(n, universe_size, [&](std::vector<int64_t>& c) {
          if (!status.ok()) return;
          auto base = law_of(c);
          if (!base.ok()) {
            status = base.status();
            return;
          }
          for (int64_t from = 0; from < universe_size; ++from) {
            if (c[from] == 0) continue;
            for (int64_t to = 0; to < universe_size; ++to) {
              if (to == from) continue;
              std::vector<int64_t> neighbor = c;
              --neighbor[from];
              ++neighbor[to];
              auto other = law_of(neighbor);
              if (!other.ok()) {
                status = other.status();
                return;
              }
              for (int64_t u = 0; u < universe_size; ++u) {
                consider((*base)[u], (*other)[u],
                         absl::StrCat("votes ", CountsString(c), " vs ",
                                      CountsString(neighbor), ", output ",
                                      u));
              }
            }
          }
        });
      }
      USERDP_RETURN_IF_ERROR(status);
    }
  } else {
    return absl::InvalidArgumentError(absl::StrCat(
        "mechanism '", std::string(mechanism),
        "' has no enumerable pure output law; audits support exponential, "
        "exponential-broken, uniform and local-rr"));
  }
  report.pass = report.max_ratio <= report.bound * (1.0 + 1e-12);
  return report;
}

absl::StatusOr<BuildRepResult> RunBuildRep(const ExperimentConfig& config) {
  if (!config.users.has_value()) {
    return absl::InvalidArgumentError(
        "build-rep needs the learner's user count n");
  }
  ExperimentConfig pure = config;
  pure.model = LearningModel::kCentralPure;
  pure.learner = LearnerKind::kRepresentation;
  USERDP_ASSIGN_OR_RETURN(LearnerSetup setup, BuildLearner(pure));
  const ConceptClass& concepts = *setup.concepts;
  USERDP_ASSIGN_OR_RETURN(
      RealizableDistribution placeholder,
      RealizableDistribution::Uniform(concepts.domain_size(), concepts[0]));

  LearnerOptions options;
  options.user_constant = config.user_constant;
  options.users = 0;
  const ProfileConstants constants = config.constants();
  EmptyDatasetLearner learner =
      [&](const SeedRoot& root) -> absl::StatusOr<Hypothesis> {
    USERDP_ASSIGN_OR_RETURN(
        LearnerReport report,
        LearnCentralPure(*setup.representation, placeholder, config.alpha,
                         config.beta, config.epsilon, root, constants,
                         options));
    return std::move(report.output);
  };

  BuildRepResult result;
  USERDP_ASSIGN_OR_RETURN(result.runs,
                          RepresentationRunCount(config.epsilon, *config.users));
  USERDP_ASSIGN_OR_RETURN(RandomStream stream,
                          Derive(config.seed, SubstreamLabel("rep-build")));
  USERDP_ASSIGN_OR_RETURN(
      ConceptClass built,
      RepresentationFromLearner(learner, concepts.domain_size(),
                                config.epsilon, *config.users, stream));
  result.representation = std::make_shared<const ConceptClass>(std::move(built));

  result.coverage.resize(config.trials);
  for (int64_t t = 0; t < config.trials; ++t) {
    USERDP_ASSIGN_OR_RETURN(
        RandomStream dist_stream,
        Derive(config.seed,
               SubstreamLabel("dist", {static_cast<uint64_t>(t)})));
    USERDP_ASSIGN_OR_RETURN(
        RealizableDistribution d,
        BuildDistribution(config.distribution, concepts, dist_stream));
    BuildRepRecord& r = result.coverage[t];
    r.trial = t;
    r.target = d.target();
    r.best_err = std::numeric_limits<double>::infinity();
    for (const Hypothesis& h : result.representation->members()) {
      USERDP_ASSIGN_OR_RETURN(double err, DistributionalError(h, d));
      r.best_err = std::min(r.best_err, err);
    }
    r.covered = r.best_err <= config.alpha;
  }
  return result;
}

std::string BuildRepCsv(absl::Span<const BuildRepRecord> records) {
  return Csv("trial,target,best_err,covered", records,
             [](const BuildRepRecord& r) {
               return absl::StrCat(r.trial, ",", r.target.ToHex(), ",",
                                   FormatDouble(r.best_err), ",",
                                   r.covered ? 1 : 0);
             });
}

}  // namespace userdp
