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

#include "userdp/sample_source.h"

#include <cstdint>
#include <map>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "userdp/sampling.h"
#include "userdp/status_macros.h"

namespace userdp {
namespace {

constexpr size_t kMaxPatternHypotheses = 16;

absl::Status CheckCount(int64_t m) {
  if (m < 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("negative sample count ", m));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<SampleCounts> SampleSource::DrawCounts(int64_t m) {
  USERDP_ASSIGN_OR_RETURN(std::vector<LabeledSample> samples, Draw(m));
  return SampleCounts::FromSamples(samples);
}

absl::StatusOr<std::vector<int64_t>> SampleSource::DrawMistakeCounts(
    int64_t m, absl::Span<const Hypothesis> hypotheses) {
  USERDP_ASSIGN_OR_RETURN(SampleCounts counts, DrawCounts(m));
  std::vector<int64_t> mistakes(hypotheses.size(), 0);
  for (size_t j = 0; j < hypotheses.size(); ++j) {
    if (hypotheses[j].domain_size() != domain_size()) {
      return absl::InvalidArgumentError("hypothesis over the wrong domain");
    }
    for (const auto& e : counts.entries) {
      if (hypotheses[j](e.x) != e.y) mistakes[j] += e.count;
    }
  }
  return mistakes;
}

absl::StatusOr<std::vector<LabeledSample>> DistributionSampleSource::Draw(
    int64_t m) {
  USERDP_RETURN_IF_ERROR(CheckCount(m));
  samples_drawn_ += m;
  return DrawSamples(*distribution_, m, stream_);
}

absl::StatusOr<SampleCounts> DistributionSampleSource::DrawCounts(int64_t m) {
  USERDP_RETURN_IF_ERROR(CheckCount(m));
  samples_drawn_ += m;
  return DrawSampleCounts(*distribution_, m, stream_);
}

absl::StatusOr<std::vector<int64_t>>
DistributionSampleSource::DrawMistakeCounts(
    int64_t m, absl::Span<const Hypothesis> hypotheses) {
  if (hypotheses.size() > kMaxPatternHypotheses) {
    return SampleSource::DrawMistakeCounts(m, hypotheses);
  }
  USERDP_RETURN_IF_ERROR(CheckCount(m));
  for (const Hypothesis& h : hypotheses) {
    if (h.domain_size() != domain_size()) {
      return absl::InvalidArgumentError("hypothesis over the wrong domain");
    }
  }
  const Hypothesis& target = distribution_->target();
  std::map<uint32_t, double> cell_weight;
  for (int64_t x = 0; x < domain_size(); ++x) {
    const double w = distribution_->weights()[x];
    if (w <= 0.0) continue;
    uint32_t pattern = 0;
    for (size_t j = 0; j < hypotheses.size(); ++j) {
      if (hypotheses[j](x) != target(x)) pattern |= uint32_t{1} << j;
    }
    cell_weight[pattern] += w;
  }
  std::vector<uint32_t> patterns;
  std::vector<double> weights;
  for (const auto& [pattern, w] : cell_weight) {
    patterns.push_back(pattern);
    weights.push_back(w);
  }
  const std::vector<int64_t> cells = SampleMultinomial(stream_, m, weights);
  std::vector<int64_t> mistakes(hypotheses.size(), 0);
  for (size_t c = 0; c < cells.size(); ++c) {
    for (size_t j = 0; j < hypotheses.size(); ++j) {
      if ((patterns[c] >> j) & 1) mistakes[j] += cells[c];
    }
  }
  samples_drawn_ += m;
  return mistakes;
}

absl::StatusOr<std::vector<LabeledSample>> RecordedSampleSource::Draw(
    int64_t m) {
  USERDP_RETURN_IF_ERROR(CheckCount(m));
  if (m > remaining()) {
    return absl::OutOfRangeError(absl::StrCat(
        "recorded sample exhausted: asked for ", m, ", ", remaining(),
        " left"));
  }
  std::vector<LabeledSample> out(samples_.begin() + samples_drawn_,
                                 samples_.begin() + samples_drawn_ + m);
  samples_drawn_ += m;
  return out;
}

}  // namespace userdp
