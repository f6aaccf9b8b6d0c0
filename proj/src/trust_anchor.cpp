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

#include "podseal/trust_anchor.hpp"

#include "podseal/error.hpp"

namespace podseal::tpm {

namespace {

void put_field(Bytes& out, ByteView field) {
  auto n = static_cast<std::uint32_t>(field.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(n >> shift));
  out.insert(out.end(), field.begin(), field.end());
}

Digest ek_cert_digest(const crypto::PublicKey& ek_public, std::string_view manufacturer) {
  Bytes body;
  put_field(body, as_bytes("ek-cert"));
  put_field(body, ek_public);
  put_field(body, as_bytes(manufacturer));
  return sha256(body);
}

Digest ak_cert_digest(const crypto::PublicKey& ak_public, std::string_view issuer_ek_id) {
  Bytes body;
  put_field(body, ak_public);
  put_field(body, as_bytes(issuer_ek_id));
  return sha256(body);
}

crypto::SigningKey make_key(std::string_view label, std::optional<std::uint64_t> seed) {
  if (seed) return crypto::SigningKey::from_seed(crypto::derive_seed(label, *seed));
  return crypto::SigningKey::generate();
}

}  // namespace

PcrMask::PcrMask(std::uint32_t bits) : bits_(bits) {
  if (bits >> kPcrCount) throw InvalidArgument("PCR mask has bits above PCR 23");
}

PcrMask PcrMask::only(std::size_t index) {
  if (index >= kPcrCount) throw InvalidArgument("PCR index out of range");
  return PcrMask(1u << index);
}

PcrMask PcrMask::parse_hex(std::string_view hex) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  if (hex.empty() || hex.size() > 6) throw InvalidArgument("PCR mask must be 1..6 hex digits");
  std::uint32_t bits = 0;
  for (char c : hex) {
    int v = (c >= '0' && c <= '9')   ? c - '0'
            : (c >= 'a' && c <= 'f') ? c - 'a' + 10
            : (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                     : -1;
    if (v < 0) throw InvalidArgument("invalid PCR mask");
    bits = (bits << 4) | static_cast<std::uint32_t>(v);
  }
  return PcrMask(bits);
}

PcrMask PcrMask::with(std::size_t index) const { return PcrMask(bits_ | only(index).bits()); }

std::vector<std::size_t> PcrMask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kPcrCount; ++i)
    if (contains(i)) out.push_back(i);
  return out;
}

std::string PcrMask::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (int shift = 20; shift >= 0; shift -= 4) out += kDigits[(bits_ >> shift) & 0xf];
  return out;
}

PcrBank::PcrBank() { registers_.fill(Digest::zero()); }

const Digest& PcrBank::value(std::size_t index) const {
  if (index >= kPcrCount) throw InvalidArgument("PCR index out of range");
  return registers_[index];
}

Digest extend_value(const Digest& old_value, const Digest& digest) {
  if (old_value.algorithm() != HashAlgorithm::kSha256 || digest.algorithm() != HashAlgorithm::kSha256)
    throw InvalidArgument("only SHA-256 values can be extended into the PCR bank");
  std::array<std::uint8_t, 64> buf{};
  auto a = old_value.bytes();
  auto b = digest.bytes();
  std::copy(a.begin(), a.end(), buf.begin());
  std::copy(b.begin(), b.end(), buf.begin() + 32);
  return sha256(ByteView(buf));
}

void PcrBank::extend(std::size_t index, const Digest& digest) {
  if (index >= kPcrCount) throw InvalidArgument("PCR index " + std::to_string(index) + " out of range");
  registers_[index] = extend_value(registers_[index], digest);
}

Digest PcrBank::composite(PcrMask selection) const {
  Bytes concat;
  for (auto i : selection.indices()) {
    auto b = registers_[i].bytes();
    concat.insert(concat.end(), b.begin(), b.end());
  }
  return sha256(concat);
}

std::string key_id(std::string_view prefix, const crypto::PublicKey& key) {
  std::string out(prefix);
  out += ':';
  out += sha256(ByteView(key)).hex().substr(0, 16);
  return out;
}

bool verify_ek_certificate(const EndorsementIdentity& ek) {
  return crypto::verify(ek.ek_public, ek_cert_digest(ek.ek_public, ek.manufacturer), ek.ek_cert);
}

bool verify_ak_certificate(const AkCertificate& cert, const crypto::PublicKey& ek_public) {
  if (cert.issuer_ek_id != ek_id(ek_public)) return false;
  return crypto::verify(ek_public, ak_cert_digest(cert.ak_public, cert.issuer_ek_id), cert.signature);
}

Bytes canonical_quote_body(ByteView nonce, PcrMask selection, const Digest& composite) {
  Bytes out;
  out.reserve(2 + 2 + nonce.size() + 3 + composite.size());
  out.push_back(kQuoteVersion);
  out.push_back(crypto::kSchemeEd25519Sha256);
  out.push_back(static_cast<std::uint8_t>(nonce.size() >> 8));
  out.push_back(static_cast<std::uint8_t>(nonce.size() & 0xff));
  out.insert(out.end(), nonce.begin(), nonce.end());
  auto bits = selection.bits();
  out.push_back(static_cast<std::uint8_t>(bits >> 16));
  out.push_back(static_cast<std::uint8_t>(bits >> 8));
  out.push_back(static_cast<std::uint8_t>(bits));
  auto c = composite.bytes();
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

std::string_view to_string(QuoteRejection r) {
  switch (r) {
    case QuoteRejection::kBadSignature:
      return "bad-signature";
    case QuoteRejection::kNonceMismatch:
      return "nonce-mismatch";
    case QuoteRejection::kMalformed:
      return "malformed";
  }
  return "malformed";
}

QuoteVerdict verify_quote(const Quote& quote, const crypto::PublicKey& ak_public, ByteView expected_nonce) {
  QuoteVerdict verdict;
  if (quote.nonce.size() < kMinNonce || quote.nonce.size() > kMaxNonce || quote.pcr_selection.empty() ||
      quote.composite_digest.algorithm() != HashAlgorithm::kSha256) {
    verdict.reason = QuoteRejection::kMalformed;
    return verdict;
  }
  Digest body = sha256(canonical_quote_body(quote.nonce, quote.pcr_selection, quote.composite_digest));
  if (!crypto::verify(ak_public, body, quote.signature)) {
    verdict.reason = QuoteRejection::kBadSignature;
    return verdict;
  }
  if (!std::equal(quote.nonce.begin(), quote.nonce.end(), expected_nonce.begin(), expected_nonce.end())) {
    verdict.reason = QuoteRejection::kNonceMismatch;
    return verdict;
  }
  verdict.accepted = true;
  verdict.composite_digest = quote.composite_digest;
  return verdict;
}

TrustAnchor::TrustAnchor(std::optional<std::uint64_t> seed, std::string manufacturer)
    : ek_key_(make_key("podseal-ek", seed)), ak_key_(make_key("podseal-ak", seed)) {
  ek_.ek_public = ek_key_.public_key();
  ek_.manufacturer = std::move(manufacturer);
  ek_.ek_cert = ek_key_.sign(ek_cert_digest(ek_.ek_public, ek_.manufacturer));

  ak_.ak_public = ak_key_.public_key();
  ak_.ak_cert.ak_public = ak_.ak_public;
  ak_.ak_cert.issuer_ek_id = ek_id(ek_.ek_public);
  ak_.ak_cert.signature = ek_key_.sign(ak_cert_digest(ak_.ak_public, ak_.ak_cert.issuer_ek_id));
}

Quote TrustAnchor::quote(ByteView nonce, PcrMask selection) const {
  if (selection.empty()) throw InvalidArgument("quote requires at least one selected PCR");
  if (nonce.size() < kMinNonce || nonce.size() > kMaxNonce)
    throw InvalidArgument("nonce length must be 8..64 bytes");
  Quote q;
  q.nonce.assign(nonce.begin(), nonce.end());
  q.pcr_selection = selection;
  q.composite_digest = bank_.composite(selection);
  q.signature = ak_key_.sign(sha256(canonical_quote_body(q.nonce, selection, q.composite_digest)));
  q.ak_id = ak_id(ak_.ak_public);
  return q;
}

IdentityPair create_identity(std::optional<std::uint64_t> seed) {
  TrustAnchor anchor(seed);
  return {anchor.endorsement(), anchor.attestation()};
}

}  // namespace podseal::tpm
