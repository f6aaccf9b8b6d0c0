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

#include "podseal/policy.hpp"

#include <algorithm>
#include <tuple>

#include "podseal/error.hpp"

namespace podseal::policy {

void AllowList::set(const std::string& path, std::set<Digest> digests) {
  if (digests.empty()) throw PolicyError("allowlist entry '" + path + "' has no digests");
  entries_[path] = std::move(digests);
}

const std::set<Digest>* AllowList::find(const std::string& path) const {
  auto it = entries_.find(path);
  return it == entries_.end() ? nullptr : &it->second;
}

void AllowList::merge(const AllowList& other) {
  for (const auto& [path, digests] : other.entries_) entries_[path].insert(digests.begin(), digests.end());
}

std::string_view to_string(RuleScope s) {
  switch (s) {
    case RuleScope::kAll:
      return "all";
    case RuleScope::kNode:
      return "node";
    case RuleScope::kPods:
      return "pods";
  }
  return "all";
}

std::optional<RuleScope> rule_scope_from_string(std::string_view s) {
  if (s == "all") return RuleScope::kAll;
  if (s == "node") return RuleScope::kNode;
  if (s == "pods") return RuleScope::kPods;
  return std::nullopt;
}

std::string_view to_string(RemediationAction a) {
  switch (a) {
    case RemediationAction::kEvictRestart:
      return "evict-restart";
    case RemediationAction::kIsolate:
      return "isolate";
    case RemediationAction::kNotifyOnly:
      return "notify-only";
  }
  return "notify-only";
}

std::optional<RemediationAction> remediation_from_string(std::string_view s) {
  if (s == "evict-restart") return RemediationAction::kEvictRestart;
  if (s == "isolate") return RemediationAction::kIsolate;
  if (s == "notify-only") return RemediationAction::kNotifyOnly;
  return std::nullopt;
}

RemediationAction PolicyBundle::remediation_for(const pod::PodRef& scope) const {
  auto it = remediation.find(scope.to_string());
  return it == remediation.end() ? default_remediation : it->second;
}

std::string_view to_string(ViolationReason r) {
  switch (r) {
    case ViolationReason::kUnknownFile:
      return "unknown-file";
    case ViolationReason::kDigestMismatch:
      return "digest-mismatch";
    case ViolationReason::kUnknownPod:
      return "unknown-pod";
  }
  return "unknown-file";
}

std::optional<ViolationReason> violation_reason_from_string(std::string_view s) {
  if (s == "unknown-file") return ViolationReason::kUnknownFile;
  if (s == "digest-mismatch") return ViolationReason::kDigestMismatch;
  if (s == "unknown-pod") return ViolationReason::kUnknownPod;
  return std::nullopt;
}

std::size_t EvaluationResult::violation_count() const {
  std::size_t n = node_violations.size() + unknown_pod_violations.size();
  for (const auto& [uid, v] : pod_violations) n += v.size();
  return n;
}

void validate(const PolicyBundle& bundle) {
  for (const auto& [uid, list] : bundle.pod_allowlists) {
    if (!bundle.registered_pods.count(uid)) throw PolicyError("pod allowlist for unregistered pod " + uid);
    for (const auto& [path, digests] : list.entries())
      if (digests.empty()) throw PolicyError("allowlist entry '" + path + "' of pod " + uid + " has no digests");
  }
  for (const auto& [path, digests] : bundle.node_allowlist.entries())
    if (digests.empty()) throw PolicyError("node allowlist entry '" + path + "' has no digests");
  for (const auto& uid : bundle.registered_pods)
    if (!pod::is_canonical_uid(uid)) throw PolicyError("registered pod '" + uid + "' is not a canonical UID");
  for (const auto& uid : bundle.retired_pods) {
    if (!pod::is_canonical_uid(uid)) throw PolicyError("retired pod '" + uid + "' is not a canonical UID");
    if (bundle.registered_pods.count(uid)) throw PolicyError("pod " + uid + " is both registered and retired");
  }
  if (!bundle.pcr_selection.contains(tpm::kImaPcr)) throw PolicyError("pcr_selection must include PCR 10");
  for (const auto& [key, action] : bundle.remediation)
    if (key != "node" && !bundle.registered_pods.count(key))
      throw PolicyError("remediation override for unregistered scope " + key);
}

std::shared_ptr<const CompiledPolicy> compile_policy(PolicyBundle bundle) {
  validate(bundle);
  auto policy = std::shared_ptr<CompiledPolicy>(new CompiledPolicy());
  for (std::size_t i = 0; i < bundle.exclude_rules.size(); ++i) {
    const auto& rule = bundle.exclude_rules[i];
    CompiledPolicy::CompiledRule compiled{rule, std::nullopt};
    if (rule.kind == ExcludeRule::Kind::kRegex) {
      try {
        compiled.regex.emplace(rule.pattern, std::regex::ECMAScript | std::regex::optimize);
      } catch (const std::regex_error& e) {
        throw PolicyError("exclude rule " + std::to_string(i) + " ('" + rule.pattern + "') does not compile: " +
                          e.what());
      }
    } else if (rule.pattern.empty() || rule.pattern.front() != '/') {
      throw PolicyError("exclude rule " + std::to_string(i) + ": keep prefix '" + rule.pattern +
                        "' is not an absolute path");
    }
    policy->rules_.push_back(std::move(compiled));
  }
  policy->bundle_ = std::move(bundle);
  return policy;
}

bool CompiledPolicy::is_excluded(std::string_view path, const pod::PodRef& scope) const {
  for (const auto& r : rules_) {
    if (!r.rule.applies_to(scope)) continue;
    if (r.regex) {
      if (std::regex_search(path.begin(), path.end(), *r.regex)) return true;
    } else if (!path.starts_with(r.rule.pattern)) {
      return true;
    }
  }
  return false;
}

const AllowList* CompiledPolicy::allowlist_for(const pod::PodRef& scope) const {
  if (scope.is_node()) return &bundle_.node_allowlist;
  if (!is_registered(scope.uid())) return nullptr;
  static const AllowList kEmpty;
  auto it = bundle_.pod_allowlists.find(scope.uid());
  return it == bundle_.pod_allowlists.end() ? &kEmpty : &it->second;
}

pod::PodRef attribute(const ml::MeasurementEntry& entry) {
  if (entry.data.name == ml::TemplateName::kImaCgn) return pod::parse_cgroup_path(entry.data.cgpath);
  return pod::PodRef::node();
}

namespace {

using FindingKey = std::tuple<pod::PodRef, std::string, std::optional<Digest>, ViolationReason>;

class Dedup {
 public:
  void push(std::vector<Violation>& list, Violation v) {
    if (seen_.emplace(v.scope, v.path, v.observed, v.reason).second) list.push_back(std::move(v));
  }

 private:
  std::set<FindingKey> seen_;
};

}  // namespace

EvaluationResult evaluate_entries(const CompiledPolicy& policy, std::span<const AttributedEntry> entries,
                                  std::size_t first_index, std::size_t retired_horizon) {
  EvaluationResult result;
  Dedup dedup;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [entry, scope] = entries[i];
    const std::size_t index = first_index + i;
    if (scope.is_pod() && policy.is_registered(scope.uid())) result.observed_pods.insert(scope.uid());
    if (entry.is_boot_aggregate()) continue;
    if (scope.is_pod() && index < retired_horizon && policy.bundle().retired_pods.count(scope.uid())) continue;
    if (policy.is_excluded(entry.data.path, scope)) continue;

    if (scope.is_pod() && !policy.is_registered(scope.uid())) {
      result.unknown_pods.insert(scope.uid());
      dedup.push(result.unknown_pod_violations,
                  {scope, entry.data.path, entry.data.filedata_hash, ViolationReason::kUnknownPod, index});
      continue;
    }

    const AllowList* list = policy.allowlist_for(scope);
    const std::set<Digest>* digests = list->find(entry.data.path);
    std::optional<ViolationReason> reason;
    if (!digests)
      reason = ViolationReason::kUnknownFile;
    else if (!digests->count(entry.data.filedata_hash))
      reason = ViolationReason::kDigestMismatch;
    if (!reason) continue;

    Violation v{scope, entry.data.path, entry.data.filedata_hash, *reason, index};
    if (scope.is_node())
      dedup.push(result.node_violations, std::move(v));
    else
      dedup.push(result.pod_violations[scope.uid()], std::move(v));
  }
  return result;
}

EvaluationResult evaluate_entries(const CompiledPolicy& policy, std::span<const ml::MeasurementEntry> entries,
                                  std::size_t first_index, std::size_t retired_horizon) {
  std::vector<AttributedEntry> attributed;
  attributed.reserve(entries.size());
  for (const auto& e : entries) attributed.emplace_back(e, attribute(e));
  return evaluate_entries(policy, attributed, first_index, retired_horizon);
}

AllowList build_allowlist_from_log(std::span<const ml::MeasurementEntry> entries, const pod::PodRef& scope) {
  AllowList list;
  for (const auto& e : entries) {
    if (e.is_boot_aggregate()) continue;
    if (attribute(e) == scope) list.add(e.data.path, e.data.filedata_hash);
  }
  return list;
}

}  // namespace podseal::policy
