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

// Where learners get their labeled samples.

#ifndef USERDP_SAMPLE_SOURCE_H_
#define USERDP_SAMPLE_SOURCE_H_

#include <cstdint>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "userdp/concepts.h"
#include "userdp/randomness.h"

namespace userdp {

// Every call returns fresh samples. Learners that only need a histogram or
// per-hypothesis mistake counts should ask for those; sources backed by a
// distribution can then sample the sufficient statistic directly.
class SampleSource {
 public:
  virtual ~SampleSource() = default;

  virtual int64_t domain_size() const = 0;
  virtual absl::StatusOr<std::vector<LabeledSample>> Draw(int64_t m) = 0;
  // Histogram of m fresh samples.
  virtual absl::StatusOr<SampleCounts> DrawCounts(int64_t m);
  // Mistakes of each hypothesis on the same m fresh samples.
  virtual absl::StatusOr<std::vector<int64_t>> DrawMistakeCounts(
      int64_t m, absl::Span<const Hypothesis> hypotheses);

  int64_t samples_drawn() const { return samples_drawn_; }

 protected:
  int64_t samples_drawn_ = 0;
};

// I.i.d. samples from a distribution, using a private stream.
class DistributionSampleSource : public SampleSource {
 public:
  // `distribution` must outlive the source.
  DistributionSampleSource(const RealizableDistribution* distribution,
                           RandomStream stream)
      : distribution_(distribution), stream_(std::move(stream)) {}

  int64_t domain_size() const override {
    return distribution_->domain_size();
  }
  absl::StatusOr<std::vector<LabeledSample>> Draw(int64_t m) override;
  absl::StatusOr<SampleCounts> DrawCounts(int64_t m) override;
  // For up to 16 hypotheses, samples the multinomial over the cells of
  // points that share a mistake pattern.
  absl::StatusOr<std::vector<int64_t>> DrawMistakeCounts(
      int64_t m, absl::Span<const Hypothesis> hypotheses) override;

 private:
  const RealizableDistribution* distribution_;
  RandomStream stream_;
};

// Replays a fixed sample in order; running out is an error.
class RecordedSampleSource : public SampleSource {
 public:
  RecordedSampleSource(int64_t domain_size,
                       std::vector<LabeledSample> samples)
      : domain_size_(domain_size), samples_(std::move(samples)) {}

  int64_t domain_size() const override { return domain_size_; }
  absl::StatusOr<std::vector<LabeledSample>> Draw(int64_t m) override;
  int64_t remaining() const {
    return static_cast<int64_t>(samples_.size()) - samples_drawn_;
  }

 private:
  int64_t domain_size_;
  std::vector<LabeledSample> samples_;
};

}  // namespace userdp

#endif  // USERDP_SAMPLE_SOURCE_H_
