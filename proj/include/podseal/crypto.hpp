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
#include <cstdint>
#include <optional>

#include "podseal/digest.hpp"

namespace podseal::crypto {

// Ed25519 over SHA-256 message digests. Deterministic: the same key and
// digest always produce the same signature.
inline constexpr std::uint8_t kSchemeEd25519Sha256 = 0x01;
inline constexpr std::size_t kPublicKeySize = 32;
inline constexpr std::size_t kSignatureSize = 64;
inline constexpr std::size_t kSeedSize = 32;

using PublicKey = std::array<std::uint8_t, kPublicKeySize>;
using Signature = std::array<std::uint8_t, kSignatureSize>;
using Seed = std::array<std::uint8_t, kSeedSize>;

/// Initializes libsodium; safe to call repeatedly from any thread.
void ensure_initialized();

class SigningKey {
 public:
  static SigningKey from_seed(const Seed& seed);
  static SigningKey generate();

  const PublicKey& public_key() const { return public_; }
  Signature sign(const Digest& message_digest) const;

 private:
  SigningKey() = default;

  PublicKey public_{};
  std::array<std::uint8_t, 64> secret_{};
};

bool verify(const PublicKey& key, const Digest& message_digest, const Signature& sig);

Bytes random_bytes(std::size_t n);
Seed derive_seed(std::string_view label, std::uint64_t seed);

std::optional<PublicKey> public_key_from_bytes(ByteView bytes);
std::optional<Signature> signature_from_bytes(ByteView bytes);

}  // namespace podseal::crypto
