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

#include "podseal/digest.hpp"

#include <sodium.h>

#include <algorithm>

#include "podseal/error.hpp"

namespace podseal {

std::size_t digest_size(HashAlgorithm alg) {
  switch (alg) {
    case HashAlgorithm::kSha1:
      return 20;
    case HashAlgorithm::kSha256:
      return 32;
    case HashAlgorithm::kSha384:
      return 48;
    case HashAlgorithm::kSha512:
      return 64;
  }
  return 32;
}

std::string_view algorithm_name(HashAlgorithm alg) {
  switch (alg) {
    case HashAlgorithm::kSha1:
      return "sha1";
    case HashAlgorithm::kSha256:
      return "sha256";
    case HashAlgorithm::kSha384:
      return "sha384";
    case HashAlgorithm::kSha512:
      return "sha512";
  }
  return "sha256";
}

std::optional<HashAlgorithm> algorithm_from_name(std::string_view name) {
  if (name == "sha1") return HashAlgorithm::kSha1;
  if (name == "sha256") return HashAlgorithm::kSha256;
  if (name == "sha384") return HashAlgorithm::kSha384;
  if (name == "sha512") return HashAlgorithm::kSha512;
  return std::nullopt;
}

Digest Digest::zero(HashAlgorithm alg) {
  Digest d;
  d.alg_ = alg;
  return d;
}

Digest Digest::from_bytes(HashAlgorithm alg, ByteView bytes) {
  if (bytes.size() != digest_size(alg)) {
    throw InvalidArgument("digest length " + std::to_string(bytes.size()) + " does not match " +
                          std::string(algorithm_name(alg)));
  }
  Digest d;
  d.alg_ = alg;
  std::copy(bytes.begin(), bytes.end(), d.bytes_.begin());
  return d;
}

Digest Digest::from_hex(HashAlgorithm alg, std::string_view hex) {
  Bytes raw = podseal::from_hex(hex);
  return from_bytes(alg, raw);
}

Digest Digest::from_hex_any(std::string_view hex) {
  for (auto alg : {HashAlgorithm::kSha1, HashAlgorithm::kSha256, HashAlgorithm::kSha384,
                   HashAlgorithm::kSha512}) {
    if (hex.size() == 2 * digest_size(alg)) return from_hex(alg, hex);
  }
  throw InvalidArgument("hex digest of unsupported length " + std::to_string(hex.size()));
}

Digest Digest::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) return from_hex(HashAlgorithm::kSha256, text);
  auto alg = algorithm_from_name(text.substr(0, colon));
  if (!alg) throw InvalidArgument("unknown hash algorithm '" + std::string(text.substr(0, colon)) + "'");
  return from_hex(*alg, text.substr(colon + 1));
}

std::string Digest::hex() const { return to_hex(bytes()); }

std::string Digest::prefixed() const {
  std::string out(algorithm_name(alg_));
  out += ':';
  out += hex();
  return out;
}

Digest sha256(ByteView data) {
  Digest d;
  crypto_hash_sha256(d.mutable_data(), data.data(), data.size());
  return d;
}

Digest sha256(std::string_view data) { return sha256(as_bytes(data)); }

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0xf];
  }
  return out;
}

namespace {
int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw InvalidArgument("odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw InvalidArgument("invalid hex character");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

bool is_lower_hex(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::string to_base64(ByteView data) {
  std::string out(sodium_base64_encoded_len(data.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

Bytes from_base64(std::string_view text) {
  Bytes out(text.size() * 3 / 4 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw InvalidArgument("invalid base64");
  }
  out.resize(len);
  return out;
}

}  // namespace podseal
