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
#include <string>
#include <vector>

#include "podseal/crypto.hpp"
#include "podseal/digest.hpp"

namespace podseal::tpm {

inline constexpr std::size_t kPcrCount = 24;
inline constexpr std::size_t kImaPcr = 10;
inline constexpr std::uint8_t kQuoteVersion = 0x01;
inline constexpr std::size_t kMinNonce = 8;
inline constexpr std::size_t kMaxNonce = 64;

/// 24-bit PCR selection; bit i selects PCR i.
class PcrMask {
 public:
  constexpr PcrMask() = default;
  /// Throws InvalidArgument if bits above 23 are set.
  explicit PcrMask(std::uint32_t bits);

  static PcrMask only(std::size_t index);
  static PcrMask parse_hex(std::string_view hex);

  std::uint32_t bits() const { return bits_; }
  bool empty() const { return bits_ == 0; }
  bool contains(std::size_t index) const { return index < kPcrCount && ((bits_ >> index) & 1u); }
  PcrMask with(std::size_t index) const;
  std::vector<std::size_t> indices() const;
  std::string hex() const;

  friend bool operator==(PcrMask, PcrMask) = default;

 private:
  std::uint32_t bits_ = 0;
};

class PcrBank {
 public:
  PcrBank();

  const Digest& value(std::size_t index) const;
  /// registers[index] := SHA-256(old || digest). Throws InvalidArgument on a
  /// bad index or a non-SHA-256 digest.
  void extend(std::size_t index, const Digest& digest);
  /// SHA-256 over the selected registers concatenated in ascending order.
  Digest composite(PcrMask selection) const;

 private:
  std::array<Digest, kPcrCount> registers_;
};

/// Pure form of the extend operation.
Digest extend_value(const Digest& old_value, const Digest& digest);

struct EndorsementIdentity {
  crypto::PublicKey ek_public{};
  std::string manufacturer;
  crypto::Signature ek_cert{};  // self-signature over (ek_public, manufacturer)
};

struct AkCertificate {
  crypto::PublicKey ak_public{};
  std::string issuer_ek_id;
  crypto::Signature signature{};  // EK signature
};

struct AttestationIdentity {
  crypto::PublicKey ak_public{};
  AkCertificate ak_cert;
};

std::string key_id(std::string_view prefix, const crypto::PublicKey& key);
inline std::string ek_id(const crypto::PublicKey& ek) { return key_id("ek", ek); }
inline std::string ak_id(const crypto::PublicKey& ak) { return key_id("ak", ak); }

bool verify_ek_certificate(const EndorsementIdentity& ek);
bool verify_ak_certificate(const AkCertificate& cert, const crypto::PublicKey& ek_public);

struct Quote {
  Bytes nonce;
  PcrMask pcr_selection;
  Digest composite_digest;
  crypto::Signature signature{};
  std::string ak_id;

  friend bool operator==(const Quote&, const Quote&) = default;
};

/// version || scheme || u16be(len(nonce)) || nonce || u24be(selection) || composite
Bytes canonical_quote_body(ByteView nonce, PcrMask selection, const Digest& composite);

enum class QuoteRejection { kBadSignature, kNonceMismatch, kMalformed };
std::string_view to_string(QuoteRejection r);

struct QuoteVerdict {
  bool accepted = false;
  Digest composite_digest;  // valid when accepted
  QuoteRejection reason = QuoteRejection::kMalformed;

  explicit operator bool() const { return accepted; }
};

QuoteVerdict verify_quote(const Quote& quote, const crypto::PublicKey& ak_public, ByteView expected_nonce);

/// Emulated TPM: PCR bank plus EK/AK keys. Not internally synchronized; the
/// owning agent serializes extend and quote.
class TrustAnchor {
 public:
  /// Deterministic keys for a given seed, random keys otherwise.
  explicit TrustAnchor(std::optional<std::uint64_t> seed = std::nullopt,
                       std::string manufacturer = "podseal-swtpm");

  const EndorsementIdentity& endorsement() const { return ek_; }
  const AttestationIdentity& attestation() const { return ak_; }
  const PcrBank& pcrs() const { return bank_; }

  void extend(std::size_t index, const Digest& digest) { bank_.extend(index, digest); }

  /// Throws InvalidArgument for an empty selection or a nonce outside 8..64 bytes.
  Quote quote(ByteView nonce, PcrMask selection) const;

  /// Test hook: signs an arbitrary body with the AK (used to fabricate quotes).
  crypto::Signature sign_with_ak(const Digest& body_digest) const { return ak_key_.sign(body_digest); }

 private:
  crypto::SigningKey ek_key_;
  crypto::SigningKey ak_key_;
  EndorsementIdentity ek_;
  AttestationIdentity ak_;
  PcrBank bank_;
};

struct IdentityPair {
  EndorsementIdentity endorsement;
  AttestationIdentity attestation;
};

IdentityPair create_identity(std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace podseal::tpm
