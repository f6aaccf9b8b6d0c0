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

#include "podseal/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <mutex>

#include "podseal/error.hpp"

namespace podseal::crypto {

void ensure_initialized() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw Error("libsodium initialization failed");
  });
}

SigningKey SigningKey::from_seed(const Seed& seed) {
  ensure_initialized();
  SigningKey key;
  crypto_sign_seed_keypair(key.public_.data(), key.secret_.data(), seed.data());
  return key;
}

SigningKey SigningKey::generate() {
  ensure_initialized();
  Seed seed;
  randombytes_buf(seed.data(), seed.size());
  return from_seed(seed);
}

Signature SigningKey::sign(const Digest& message_digest) const {
  Signature sig{};
  auto msg = message_digest.bytes();
  crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), secret_.data());
  return sig;
}

bool verify(const PublicKey& key, const Digest& message_digest, const Signature& sig) {
  ensure_initialized();
  auto msg = message_digest.bytes();
  return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), key.data()) == 0;
}

Bytes random_bytes(std::size_t n) {
  ensure_initialized();
  Bytes out(n);
  randombytes_buf(out.data(), out.size());
  return out;
}

Seed derive_seed(std::string_view label, std::uint64_t seed) {
  std::string material(label);
  material += ':';
  for (int i = 7; i >= 0; --i) material += static_cast<char>((seed >> (8 * i)) & 0xff);
  Digest d = sha256(material);
  Seed out{};
  std::copy_n(d.bytes().begin(), out.size(), out.begin());
  return out;
}

std::optional<PublicKey> public_key_from_bytes(ByteView bytes) {
  if (bytes.size() != kPublicKeySize) return std::nullopt;
  PublicKey key{};
  std::copy(bytes.begin(), bytes.end(), key.begin());
  return key;
}

std::optional<Signature> signature_from_bytes(ByteView bytes) {
  if (bytes.size() != kSignatureSize) return std::nullopt;
  Signature sig{};
  std::copy(bytes.begin(), bytes.end(), sig.begin());
  return sig;
}

}  // namespace podseal::crypto
