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

#include "podseal/trust.hpp"

#include <algorithm>
#include <chrono>

#include "podseal/error.hpp"

namespace podseal::trust {

Timestamp now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string_view to_string(TrustLevel l) {
  switch (l) {
    case TrustLevel::kStart:
      return "Start";
    case TrustLevel::kTrusted:
      return "Trusted";
    case TrustLevel::kUntrusted:
      return "Untrusted";
  }
  return "Start";
}

std::optional<TrustLevel> trust_level_from_string(std::string_view s) {
  if (s == "Start") return TrustLevel::kStart;
  if (s == "Trusted") return TrustLevel::kTrusted;
  if (s == "Untrusted") return TrustLevel::kUntrusted;
  return std::nullopt;
}

TrustMap TrustMap::initial(const policy::PolicyBundle& bundle, Timestamp at) {
  TrustMap map;
  map.node_state = TrustState::start(at);
  for (const auto& uid : bundle.registered_pods) map.pod_states[uid] = TrustState::start(at);
  return map;
}

const TrustState& TrustMap::state_of(const pod::PodRef& scope) const {
  if (scope.is_node()) return node_state;
  auto it = pod_states.find(scope.uid());
  if (it == pod_states.end()) throw NotFound("no trust state for pod " + scope.uid());
  return it->second;
}

bool mark_untrusted(TrustState& state, Timestamp at, std::string_view reason,
                    const std::vector<policy::Violation>& violations) {
  bool fresh = !state.is_untrusted();
  if (fresh) {
    state.level = TrustLevel::kUntrusted;
    state.since = at;
    state.violations.clear();
    state.reasons.clear();
  }
  if (std::find(state.reasons.begin(), state.reasons.end(), reason) == state.reasons.end())
    state.reasons.emplace_back(reason);
  for (const auto& v : violations) {
    bool known = std::any_of(state.violations.begin(), state.violations.end(),
                             [&](const policy::Violation& o) { return o.same_finding(v); });
    if (!known) state.violations.push_back(v);
  }
  return fresh;
}

namespace {

void promote_if_clean(TrustState& state, Timestamp at) {
  if (state.level == TrustLevel::kStart) {
    state.level = TrustLevel::kTrusted;
    state.since = at;
  }
}

}  // namespace

TrustMap derive_trust(const TrustMap& previous, const policy::EvaluationResult& eval, Timestamp at) {
  TrustMap next = previous;

  if (!eval.node_violations.empty()) mark_untrusted(next.node_state, at, kReasonPolicy, eval.node_violations);
  if (!eval.unknown_pods.empty())
    mark_untrusted(next.node_state, at, kReasonUnknownPod, eval.unknown_pod_violations);
  if (eval.node_violations.empty() && eval.unknown_pods.empty()) promote_if_clean(next.node_state, at);

  for (auto& [uid, state] : next.pod_states) {
    auto it = eval.pod_violations.find(uid);
    if (it != eval.pod_violations.end() && !it->second.empty()) {
      mark_untrusted(state, at, kReasonPolicy, it->second);
    } else if (state.level == TrustLevel::kTrusted || eval.observed_pods.count(uid)) {
      promote_if_clean(state, at);
    }
  }
  return next;
}

std::vector<Transition> diff(const TrustMap& before, const TrustMap& after) {
  std::vector<Transition> out;
  if (before.node_state.level != after.node_state.level)
    out.push_back({pod::PodRef::node(), before.node_state.level, after.node_state.level});
  for (const auto& [uid, state] : after.pod_states) {
    auto it = before.pod_states.find(uid);
    TrustLevel from = it == before.pod_states.end() ? TrustLevel::kStart : it->second.level;
    if (from != state.level) out.push_back({pod::PodRef::pod(uid), from, state.level});
  }
  return out;
}

}  // namespace podseal::trust
