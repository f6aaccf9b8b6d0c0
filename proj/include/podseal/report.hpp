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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "podseal/measurement_log.hpp"
#include "podseal/trust_anchor.hpp"

namespace podseal {

/// Agent answer to a verifier challenge.
struct IntegrityReport {
  std::string agent_id;
  Bytes nonce;
  tpm::Quote quote;
  std::map<std::size_t, Digest> pcr_values;  // the selected registers
  std::size_t offset = 0;
  std::vector<ml::MeasurementEntry> entries;  // log[offset, offset + size)
  std::size_t total_count = 0;

  friend bool operator==(const IntegrityReport&, const IntegrityReport&) = default;
};

/// Registration message and the registrar's pinned record.
struct IdentityRecord {
  std::string agent_id;
  std::string endpoint;  // base URL the verifier polls
  tpm::EndorsementIdentity ek;
  tpm::AkCertificate ak_cert;
  std::int64_t registered_at = 0;

  const crypto::PublicKey& ak_public() const { return ak_cert.ak_public; }
  /// True when both records bind the same EK and AK keys.
  bool same_keys(const IdentityRecord& other) const {
    return ek.ek_public == other.ek.ek_public && ak_cert.ak_public == other.ak_cert.ak_public;
  }
};

}  // namespace podseal
