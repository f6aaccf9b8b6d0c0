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
#include <optional>
#include <string>
#include <vector>

#include "podseal/policy.hpp"

namespace podseal::trust {

/// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;
Timestamp now_ms();

enum class TrustLevel { kStart, kTrusted, kUntrusted };

std::string_view to_string(TrustLevel l);
std::optional<TrustLevel> trust_level_from_string(std::string_view s);

struct TrustState {
  TrustLevel level = TrustLevel::kStart;
  Timestamp since = 0;
  std::vector<policy::Violation> violations;  // only while Untrusted
  std::vector<std::string> reasons;           // only while Untrusted

  static TrustState start(Timestamp at = 0) { return {TrustLevel::kStart, at, {}, {}}; }
  bool is_untrusted() const { return level == TrustLevel::kUntrusted; }

  friend bool operator==(const TrustState&, const TrustState&) = default;
};

struct TrustMap {
  TrustState node_state;
  std::map<std::string, TrustState> pod_states;

  /// Node plus every registered pod in Start.
  static TrustMap initial(const policy::PolicyBundle& bundle, Timestamp at = 0);

  const TrustState& state_of(const pod::PodRef& scope) const;

  friend bool operator==(const TrustMap&, const TrustMap&) = default;
};

/// Reason strings recorded on Untrusted states.
inline constexpr std::string_view kReasonPolicy = "policy-violations";
inline constexpr std::string_view kReasonUnknownPod = "unknown-pod";
inline constexpr std::string_view kReasonQuoteInvalid = "quote-invalid";
inline constexpr std::string_view kReasonReplayMismatch = "replay-mismatch";
inline constexpr std::string_view kReasonUnreachable = "agent-unreachable";

/// Moves `state` to Untrusted (or extends an existing Untrusted state with
/// new findings). Returns true when this is a fresh transition.
bool mark_untrusted(TrustState& state, Timestamp at, std::string_view reason,
                    const std::vector<policy::Violation>& violations = {});

/// Applies one evaluation. Node: Untrusted on node violations or unknown
/// pods. Registered pod: Untrusted on its own violations. Clean scopes move
/// Start -> Trusted (pods only once observed). Untrusted is sticky.
TrustMap derive_trust(const TrustMap& previous, const policy::EvaluationResult& eval, Timestamp at = 0);

struct Transition {
  pod::PodRef scope;
  TrustLevel from;
  TrustLevel to;
};

std::vector<Transition> diff(const TrustMap& before, const TrustMap& after);

}  // namespace podseal::trust
