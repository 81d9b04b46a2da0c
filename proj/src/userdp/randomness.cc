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

#include "userdp/randomness.h"

#include <sodium.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "absl/strings/escaping.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"

namespace userdp {
namespace {

constexpr std::array<std::string_view, 17> kTags = {
    "cs",         "cs-test",   "dist",       "noise",     "nb",
    "public",     "rep-H",     "rep-build",  "rr",        "shuffle",
    "sq-coins",   "sq-query",  "stab-data",  "stab-root", "trial",
    "user-data",  "audit",
};

void EnsureSodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) std::abort();
  });
}

void AppendBigEndian32(uint32_t v, std::string& out) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

void AppendBigEndian64(uint64_t v, std::string& out) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

StreamKey HmacSha256(const StreamKey& key, const unsigned char* message,
                     size_t length) {
  EnsureSodium();
  StreamKey out;
  crypto_auth_hmacsha256(out.data(), message, length, key.data());
  return out;
}

}  // namespace

absl::Span<const std::string_view> RegisteredTags() { return kTags; }

bool IsRegisteredTag(std::string_view tag) {
  return std::find(kTags.begin(), kTags.end(), tag) != kTags.end();
}

absl::StatusOr<SeedRoot> SeedRoot::FromHex(std::string_view hex) {
  if (hex.size() >= 2 && hex[0] == '0' && (hex[1] == 'x' || hex[1] == 'X')) {
    hex.remove_prefix(2);
  }
  if (hex.empty() || hex.size() > 64) {
    return absl::InvalidArgumentError(
        absl::StrCat("seed must have 1 to 64 hex digits, got ", hex.size()));
  }
  std::string padded(64 - hex.size(), '0');
  padded.append(hex);
  for (char c : padded) {
    if (!std::isxdigit(static_cast<unsigned char>(c))) {
      return absl::InvalidArgumentError(
          absl::StrCat("invalid hex digit in seed: '", std::string(1, c), "'"));
    }
  }
  const std::string raw = absl::HexStringToBytes(padded);
  StreamKey bytes;
  std::memcpy(bytes.data(), raw.data(), bytes.size());
  return SeedRoot(bytes);
}

SeedRoot SeedRoot::FromUint64(uint64_t value) {
  StreamKey bytes{};
  for (int i = 0; i < 8; ++i) {
    bytes[31 - i] = static_cast<uint8_t>(value >> (8 * i));
  }
  return SeedRoot(bytes);
}

std::string SeedRoot::ToHex() const {
  return absl::BytesToHexString(absl::string_view(
      reinterpret_cast<const char*>(bytes_.data()), bytes_.size()));
}

SubstreamLabel SubstreamLabel::Then(std::string_view tag,
                                    std::vector<uint64_t> indices) const {
  SubstreamLabel out = *this;
  out.path_.push_back(LabelStep{std::string(tag), std::move(indices)});
  return out;
}

absl::StatusOr<std::string> SubstreamLabel::Encode() const {
  std::string out;
  AppendBigEndian32(static_cast<uint32_t>(path_.size()), out);
  for (const LabelStep& step : path_) {
    if (step.tag.size() > 255) {
      return absl::InvalidArgumentError("label tag longer than 255 bytes");
    }
    out.push_back(static_cast<char>(step.tag.size()));
    out.append(step.tag);
    AppendBigEndian32(static_cast<uint32_t>(step.indices.size()), out);
    for (uint64_t index : step.indices) AppendBigEndian64(index, out);
  }
  return out;
}

std::string SubstreamLabel::DebugString() const {
  return absl::StrJoin(path_, "/", [](std::string* out, const LabelStep& s) {
    absl::StrAppend(out, s.tag, "[", absl::StrJoin(s.indices, ","), "]");
  });
}

RandomStream::RandomStream(const StreamKey& key) : key_(key) {}

void RandomStream::Refill() {
  EnsureSodium();
  // Short first refill: many streams are used for a handful of draws.
  const size_t blocks = blocks_generated_ == 0 ? 4 : kMaxBlocksPerRefill;
  static constexpr unsigned char kNonce[crypto_stream_chacha20_NONCEBYTES] = {};
  auto* bytes = reinterpret_cast<unsigned char*>(buffer_.data());
  const size_t length = blocks * kWordsPerBlock * sizeof(uint64_t);
  std::memset(bytes, 0, length);
  crypto_stream_chacha20_xor_ic(bytes, bytes, length, kNonce,
                                blocks_generated_, key_.data());
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = 0; i < blocks * kWordsPerBlock; ++i) {
      buffer_[i] = __builtin_bswap64(buffer_[i]);
    }
  }
  blocks_generated_ += blocks;
  buffered_ = blocks * kWordsPerBlock;
  position_ = 0;
}

StreamKey RandomStream::NextKey() {
  StreamKey key;
  for (int i = 0; i < 4; ++i) {
    const uint64_t word = Next();
    for (int b = 0; b < 8; ++b) {
      key[8 * i + b] = static_cast<uint8_t>(word >> (8 * b));
    }
  }
  return key;
}

absl::StatusOr<RandomStream> Derive(const SeedRoot& root,
                                    const SubstreamLabel& label) {
  for (const LabelStep& step : label.path()) {
    if (!IsRegisteredTag(step.tag)) {
      return absl::InvalidArgumentError(
          absl::StrCat("unregistered substream tag '", step.tag, "'"));
    }
  }
  absl::StatusOr<std::string> encoded = label.Encode();
  if (!encoded.ok()) return encoded.status();
  return RandomStream(HmacSha256(
      root.bytes(), reinterpret_cast<const unsigned char*>(encoded->data()),
      encoded->size()));
}

RandomStream KeyedSubstream(const StreamKey& key,
                            absl::Span<const uint8_t> message) {
  return RandomStream(HmacSha256(key, message.data(), message.size()));
}

absl::StatusOr<uint64_t> UniformIndex(RandomStream& stream, uint64_t n) {
  if (n == 0) {
    return absl::InvalidArgumentError("uniform index over an empty range");
  }
  return internal::UniformBelow(stream, n);
}

namespace internal {

uint64_t UniformBelow(RandomStream& stream, uint64_t n) {
  if (n == 1) return 0;
  const uint64_t mask = ~uint64_t{0} >> std::countl_zero(n - 1);
  while (true) {
    const uint64_t candidate = stream.Next() & mask;
    if (candidate < n) return candidate;
  }
}

}  // namespace internal
}  // namespace userdp
