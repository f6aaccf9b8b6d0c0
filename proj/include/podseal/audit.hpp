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
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "podseal/policy.hpp"
#include "podseal/trust.hpp"

namespace podseal {

enum class CycleOutcome { kOk, kQuoteInvalid, kReplayMismatch, kPolicyViolations, kAgentUnreachable };

std::string_view to_string(CycleOutcome o);
std::optional<CycleOutcome> cycle_outcome_from_string(std::string_view s);

struct TrustDelta {
  std::string scope;  // "node" or pod UID
  trust::TrustLevel from;
  trust::TrustLevel to;

  friend bool operator==(const TrustDelta&, const TrustDelta&) = default;
};

struct AuditRecord {
  // "cycle" for attestation cycles; "reset" and "remediation" for operator
  // resets and remediation delivery results.
  std::string kind = "cycle";
  trust::Timestamp timestamp = 0;
  std::string agent_id;
  std::string nonce;  // hex
  CycleOutcome outcome = CycleOutcome::kOk;
  std::string detail;
  std::optional<Digest> composite_digest;
  std::vector<policy::Violation> new_violations;
  std::vector<TrustDelta> trust_delta;
  std::uint64_t sequence = 0;  // assigned by AuditLog
};

struct RemediationEvent {
  std::string agent_id;
  pod::PodRef scope;
  policy::RemediationAction action = policy::RemediationAction::kNotifyOnly;
  std::string cause;
  std::string pod_name;
  std::uint64_t transition_id = 0;  // unique per Untrusted transition

  friend bool operator==(const RemediationEvent&, const RemediationEvent&) = default;
};

/// Append-only audit trail. Optionally mirrored to a JSON-lines file.
class AuditLog {
 public:
  AuditLog() = default;
  explicit AuditLog(std::filesystem::path file);

  /// Assigns the sequence number and a timestamp that never goes backwards.
  AuditRecord append(AuditRecord record);
  std::vector<AuditRecord> since(trust::Timestamp ts) const;
  std::vector<AuditRecord> for_agent(const std::string& agent_id) const;
  std::vector<AuditRecord> all() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::optional<std::filesystem::path> file_;
  std::vector<AuditRecord> records_;
  trust::Timestamp last_ts_ = 0;
};

}  // namespace podseal
