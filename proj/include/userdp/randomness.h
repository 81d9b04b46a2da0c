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

// Shared public randomness. A 256-bit root plus a labeled path determines a
// deterministic keystream; every simulated user that knows the root rebuilds
// the same stream without communication.
//
// Derivation contract (bit-exact, platform independent):
//   label bytes = u32_be(#steps) ||
//                 for each step: u8(len(tag)) || tag || u32_be(#indices) ||
//                                u64_be(index)...
//   stream key  = HMAC-SHA256(key = root, message = label bytes)
//   stream      = ChaCha20 keystream (zero 8-byte nonce, 64-bit block counter
//                 starting at 0) under stream key, read as little-endian u64.

#ifndef USERDP_RANDOMNESS_H_
#define USERDP_RANDOMNESS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"

namespace userdp {

using StreamKey = std::array<uint8_t, 32>;

// Tags accepted in a SubstreamLabel. See README for the meaning of each.
absl::Span<const std::string_view> RegisteredTags();
bool IsRegisteredTag(std::string_view tag);

class SeedRoot {
 public:
  SeedRoot() : bytes_{} {}
  explicit SeedRoot(const StreamKey& bytes) : bytes_(bytes) {}

  // Accepts 1 to 64 hex digits, optionally prefixed by "0x". Shorter inputs
  // are left-padded with zeros.
  static absl::StatusOr<SeedRoot> FromHex(std::string_view hex);
  // Root whose low 8 bytes hold `value` big-endian.
  static SeedRoot FromUint64(uint64_t value);

  // 64 lowercase hex digits.
  std::string ToHex() const;
  const StreamKey& bytes() const { return bytes_; }

  friend bool operator==(const SeedRoot&, const SeedRoot&) = default;

 private:
  StreamKey bytes_;
};

struct LabelStep {
  std::string tag;
  std::vector<uint64_t> indices;

  friend bool operator==(const LabelStep&, const LabelStep&) = default;
};

class SubstreamLabel {
 public:
  SubstreamLabel() = default;
  SubstreamLabel(std::string_view tag, std::initializer_list<uint64_t> indices)
      : path_{LabelStep{std::string(tag), std::vector<uint64_t>(indices)}} {}
  explicit SubstreamLabel(std::string_view tag) : SubstreamLabel(tag, {}) {}

  // Returns a copy of this label extended by one step.
  SubstreamLabel Then(std::string_view tag,
                      std::vector<uint64_t> indices = {}) const;

  const std::vector<LabelStep>& path() const { return path_; }

  // Canonical, prefix-free byte encoding. Fails if a tag is longer than 255
  // bytes.
  absl::StatusOr<std::string> Encode() const;
  // e.g. "cs[3]/sq-query[0,1]".
  std::string DebugString() const;

  friend bool operator==(const SubstreamLabel&,
                         const SubstreamLabel&) = default;

 private:
  std::vector<LabelStep> path_;
};

// Deterministic counter-mode generator. Satisfies UniformRandomBitGenerator so
// it can drive standard and Boost distributions. Copying a stream copies its
// position; the copy then produces the same outputs as the original.
// A stream must not be shared between threads.
class RandomStream {
 public:
  using result_type = uint64_t;

  // Stream keyed directly by `key`.
  explicit RandomStream(const StreamKey& key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return Next(); }

  uint64_t Next() {
    if (position_ == buffered_) Refill();
    return buffer_[position_++];
  }

  // 32 fresh bytes, e.g. for keying a child stream or a new root.
  StreamKey NextKey();
  SeedRoot NextSeedRoot() { return SeedRoot(NextKey()); }

  // Number of 64-bit words consumed so far.
  uint64_t words_consumed() const {
    return blocks_generated_ * kWordsPerBlock - (buffered_ - position_);
  }

 private:
  static constexpr size_t kWordsPerBlock = 8;
  static constexpr size_t kMaxBlocksPerRefill = 16;

  void Refill();

  StreamKey key_;
  uint64_t blocks_generated_ = 0;
  size_t position_ = 0;
  size_t buffered_ = 0;
  std::array<uint64_t, kWordsPerBlock * kMaxBlocksPerRefill> buffer_{};
};

// Stream for `label` under `root`. Fails on an unregistered tag.
absl::StatusOr<RandomStream> Derive(const SeedRoot& root,
                                    const SubstreamLabel& label);

// Stream keyed by HMAC-SHA256(key, message). Used for per-element streams
// inside a sampling routine; no tag registry applies.
RandomStream KeyedSubstream(const StreamKey& key,
                            absl::Span<const uint8_t> message);

// Uniform integer in [0, n) by rejection over the next power of two.
absl::StatusOr<uint64_t> UniformIndex(RandomStream& stream, uint64_t n);

// Uniform real in [0, 1) with 53 random mantissa bits.
inline double UniformUnit(RandomStream& stream) {
  return static_cast<double>(stream.Next() >> 11) * 0x1.0p-53;
}

// Uniform real in (0, 1); never returns an endpoint.
inline double UniformOpenUnit(RandomStream& stream) {
  return (static_cast<double>(stream.Next() >> 11) + 0.5) * 0x1.0p-53;
}

namespace internal {

// UniformIndex without the n = 0 check. Requires n >= 1.
uint64_t UniformBelow(RandomStream& stream, uint64_t n);

}  // namespace internal
}  // namespace userdp

#endif  // USERDP_RANDOMNESS_H_
