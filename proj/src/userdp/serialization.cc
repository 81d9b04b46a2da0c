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

#include "userdp/serialization.h"

#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

#include "absl/strings/str_cat.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

using nlohmann::json;

absl::StatusOr<int64_t> DomainSizeOf(const json& doc) {
  if (!doc.is_object() || !doc.contains("domain_size") ||
      !doc["domain_size"].is_number_integer()) {
    return absl::InvalidArgumentError("document needs an integer domain_size");
  }
  const int64_t n = doc["domain_size"].get<int64_t>();
  USERDP_RETURN_IF_ERROR(ValidateDomainSize(n));
  return n;
}

absl::StatusOr<Hypothesis> HypothesisFromJson(const json& value, int64_t n) {
  if (!value.is_string()) {
    return absl::InvalidArgumentError("hypotheses are hex strings");
  }
  return Hypothesis::FromHex(value.get<std::string>(), n);
}

}  // namespace

json ClassToJson(const ConceptClass& concepts) {
  json members = json::array();
  for (const Hypothesis& h : concepts.members()) members.push_back(h.ToHex());
  return json{{"domain_size", concepts.domain_size()},
              {"members", std::move(members)}};
}

absl::StatusOr<ConceptClass> ClassFromJson(const json& doc) {
  USERDP_ASSIGN_OR_RETURN(int64_t n, DomainSizeOf(doc));
  if (!doc.contains("members") || !doc["members"].is_array()) {
    return absl::InvalidArgumentError("class document needs members");
  }
  std::vector<Hypothesis> members;
  for (const json& m : doc["members"]) {
    USERDP_ASSIGN_OR_RETURN(Hypothesis h, HypothesisFromJson(m, n));
    members.push_back(std::move(h));
  }
  return ConceptClass::Create(n, std::move(members));
}

json DistributionToJson(const RealizableDistribution& d) {
  return json{{"domain_size", d.domain_size()},
              {"weights", std::vector<double>(d.weights().begin(),
                                              d.weights().end())},
              {"target", d.target().ToHex()}};
}

absl::StatusOr<RealizableDistribution> DistributionFromJson(const json& doc) {
  USERDP_ASSIGN_OR_RETURN(int64_t n, DomainSizeOf(doc));
  if (!doc.contains("target")) {
    return absl::InvalidArgumentError("distribution document needs a target");
  }
  USERDP_ASSIGN_OR_RETURN(Hypothesis target,
                          HypothesisFromJson(doc["target"], n));
  if (!doc.contains("weights")) {
    return RealizableDistribution::Uniform(n, std::move(target));
  }
  const json& weights = doc["weights"];
  if (!weights.is_array() || static_cast<int64_t>(weights.size()) != n) {
    return absl::InvalidArgumentError(
        absl::StrCat("weights must be an array of ", n, " numbers"));
  }
  std::vector<double> w;
  w.reserve(n);
  for (const json& v : weights) {
    if (!v.is_number()) {
      return absl::InvalidArgumentError("weights must be numbers");
    }
    w.push_back(v.get<double>());
  }
  return RealizableDistribution::Create(std::move(w), std::move(target));
}

json DatasetToJson(const UserDataset& dataset) {
  json users = json::array();
  for (const auto& batch : dataset.users) {
    json samples = json::array();
    for (const LabeledSample& s : batch) {
      samples.push_back(json::array({s.x, s.y ? 1 : 0}));
    }
    users.push_back(std::move(samples));
  }
  return json{{"source", DistributionToJson(dataset.source)},
              {"users", std::move(users)}};
}

absl::StatusOr<UserDataset> DatasetFromJson(const json& doc) {
  if (!doc.is_object() || !doc.contains("source") || !doc.contains("users") ||
      !doc["users"].is_array()) {
    return absl::InvalidArgumentError(
        "dataset document needs source and users");
  }
  USERDP_ASSIGN_OR_RETURN(RealizableDistribution source,
                          DistributionFromJson(doc["source"]));
  UserDataset dataset{std::move(source), {}};
  for (const json& batch : doc["users"]) {
    if (!batch.is_array()) {
      return absl::InvalidArgumentError("each user is an array of samples");
    }
    std::vector<LabeledSample> samples;
    samples.reserve(batch.size());
    for (const json& s : batch) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() ||
          !s[1].is_number_integer()) {
        return absl::InvalidArgumentError("samples are [x, y] integer pairs");
      }
      const int64_t y = s[1].get<int64_t>();
      if (y != 0 && y != 1) {
        return absl::InvalidArgumentError("labels must be 0 or 1");
      }
      samples.push_back({s[0].get<int64_t>(), y == 1});
    }
    dataset.users.push_back(std::move(samples));
  }
  USERDP_RETURN_IF_ERROR(dataset.Validate());
  return dataset;
}

json ReportToJson(const LearnerReport& report) {
  json votes = json::array();
  for (const Hypothesis& v : report.per_user_votes) votes.push_back(v.ToHex());
  return json{
      {"model", std::string(LearningModelName(report.model))},
      {"output", report.output.ToHex()},
      {"err", report.err},
      {"per_user_votes", std::move(votes)},
      {"vote_concentration", report.vote_concentration},
      {"low_concentration", report.low_concentration},
      {"params",
       {{"users", report.users},
        {"users_formula", report.users_formula},
        {"samples_per_user", report.samples_per_user},
        {"alpha", report.alpha},
        {"beta", report.beta},
        {"epsilon", report.epsilon},
        {"delta", report.delta},
        {"user_constant", report.user_constant},
        {"profile", std::string(ProfileName(report.profile))}}}};
}

json StabilityReportToJson(const StabilityReport& report) {
  json roots = json::array();
  for (const StabilityRecord& r : report.records) {
    roots.push_back({{"root", r.root.ToHex()},
                     {"modal", r.modal.ToHex()},
                     {"frequency", r.frequency},
                     {"modal_error", r.modal_error}});
  }
  auto quantiles = [](const QuantileSummary& q) {
    return json{{"min", q.min}, {"p10", q.p10}, {"p50", q.p50},
                {"p90", q.p90}, {"max", q.max}, {"mean", q.mean}};
  };
  return json{{"profile", std::string(ProfileName(report.profile))},
              {"redraws", report.redraws},
              {"roots", std::move(roots)},
              {"frequency", quantiles(report.frequency)},
              {"modal_error", quantiles(report.modal_error)}};
}

json TranscriptToJson(const ApproxSelectTranscript<Hypothesis>& transcript) {
  json candidates = json::array();
  for (const auto& c : transcript.candidates) {
    candidates.push_back({{"element", c.element.ToHex()},
                          {"count", c.count},
                          {"noise", c.noise},
                          {"noisy_count", c.noisy_count}});
  }
  return json{{"candidates", std::move(candidates)},
              {"threshold", transcript.threshold},
              {"released", transcript.released},
              {"output", transcript.output.ToHex()}};
}

json TranscriptToJson(const ShuffleTranscript& transcript) {
  json buckets = json::object();
  for (const auto& [bucket, count] : transcript.message_count_per_bucket) {
    buckets[std::to_string(bucket)] = count;
  }
  return json{{"message_count_per_bucket", std::move(buckets)},
              {"noise", {{"r", transcript.noise.r}, {"p", transcript.noise.p}}}};
}

json TranscriptToJson(absl::Span<const SqTranscriptEntry> entries) {
  json out = json::array();
  for (const SqTranscriptEntry& e : entries) {
    out.push_back({{"description", e.description},
                   {"mean", e.mean},
                   {"grid_index", e.grid_index},
                   {"answer", e.answer}});
  }
  return out;
}

absl::StatusOr<json> ParseJson(std::string_view text) {
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) return absl::InvalidArgumentError("malformed JSON");
  return doc;
}

absl::StatusOr<json> ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto doc = ParseJson(buffer.str());
  if (!doc.ok()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": malformed JSON"));
  }
  return doc;
}

absl::Status WriteTextFile(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  return absl::OkStatus();
}

}  // namespace userdp
