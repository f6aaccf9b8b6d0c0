/*
 * Copyright 2026 The PodSeal Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace podseal {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

enum class HashAlgorithm : std::uint8_t { kSha1, kSha256, kSha384, kSha512 };

std::size_t digest_size(HashAlgorithm alg);
std::string_view algorithm_name(HashAlgorithm alg);
std::optional<HashAlgorithm> algorithm_from_name(std::string_view name);

/// An algorithm-tagged digest. Everything this system produces is SHA-256;
/// the other algorithms exist so that foreign measurement lists can be
/// parsed and re-emitted without loss.
class Digest {
 public:
  static constexpr std::size_t kMaxSize = 64;

  /// All-zero SHA-256 value (the reset state of a PCR).
  Digest() = default;

  static Digest zero(HashAlgorithm alg = HashAlgorithm::kSha256);
  /// Throws InvalidArgument if the length does not match the algorithm.
  static Digest from_bytes(HashAlgorithm alg, ByteView bytes);
  static Digest from_hex(HashAlgorithm alg, std::string_view hex);
  /// Infers the algorithm from the hex length (40 -> SHA-1, 64 -> SHA-256, ...).
  static Digest from_hex_any(std::string_view hex);
  /// Accepts "sha256:<hex>" or bare hex (SHA-256 assumed for 64 chars).
  static Digest parse(std::string_view text);

  HashAlgorithm algorithm() const { return alg_; }
  std::size_t size() const { return digest_size(alg_); }
  ByteView bytes() const { return {bytes_.data(), size()}; }
  std::uint8_t* mutable_data() { return bytes_.data(); }

  std::string hex() const;
  /// "<alg>:<hex>", e.g. "sha256:ab12...".
  std::string prefixed() const;

  friend bool operator==(const Digest&, const Digest&) = default;
  friend std::strong_ordering operator<=>(const Digest&, const Digest&) = default;

 private:
  HashAlgorithm alg_ = HashAlgorithm::kSha256;
  std::array<std::uint8_t, kMaxSize> bytes_{};
};

Digest sha256(ByteView data);
Digest sha256(std::string_view data);

std::string to_hex(ByteView data);
/// Throws InvalidArgument on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);
bool is_lower_hex(std::string_view s);

std::string to_base64(ByteView data);
Bytes from_base64(std::string_view text);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace podseal

template <>
struct std::hash<podseal::Digest> {
  std::size_t operator()(const podseal::Digest& d) const noexcept {
    std::size_t h = static_cast<std::size_t>(d.algorithm());
    auto b = d.bytes();
    for (std::size_t i = 0; i < 8 && i < b.size(); ++i) h = (h << 8) ^ b[i];
    return h;
  }
};
