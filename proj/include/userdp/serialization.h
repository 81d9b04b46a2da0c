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

// JSON documents for classes, distributions, user datasets and reports.
//
// Class and distribution documents share one shape:
//   {"domain_size": N, "members": [hex, ...], "weights": [...], "target": hex}
// where each hex string lists h(0), h(1), ... as big-endian bits, zero-padded
// to ceil(N / 4) digits. A class document omits weights and target; a
// distribution document omits members.

#ifndef USERDP_SERIALIZATION_H_
#define USERDP_SERIALIZATION_H_

#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"
#include "userdp/concepts.h"
#include "userdp/dp_select.h"
#include "userdp/shuffle.h"
#include "userdp/sq.h"
#include "userdp/stable_learners.h"
#include "userdp/user_level_learners.h"

namespace userdp {

nlohmann::json ClassToJson(const ConceptClass& concepts);
absl::StatusOr<ConceptClass> ClassFromJson(const nlohmann::json& doc);

nlohmann::json DistributionToJson(const RealizableDistribution& d);
absl::StatusOr<RealizableDistribution> DistributionFromJson(
    const nlohmann::json& doc);

// {"source": distribution document, "users": [[[x, y], ...], ...]}
nlohmann::json DatasetToJson(const UserDataset& dataset);
absl::StatusOr<UserDataset> DatasetFromJson(const nlohmann::json& doc);

nlohmann::json ReportToJson(const LearnerReport& report);
nlohmann::json StabilityReportToJson(const StabilityReport& report);

// Mechanism and protocol transcripts for audits and debugging.
nlohmann::json TranscriptToJson(
    const ApproxSelectTranscript<Hypothesis>& transcript);
nlohmann::json TranscriptToJson(const ShuffleTranscript& transcript);
nlohmann::json TranscriptToJson(absl::Span<const SqTranscriptEntry> entries);

absl::StatusOr<nlohmann::json> ParseJson(std::string_view text);
absl::StatusOr<nlohmann::json> ReadJsonFile(const std::string& path);
absl::Status WriteTextFile(const std::string& path, std::string_view text);

}  // namespace userdp

#endif  // USERDP_SERIALIZATION_H_
