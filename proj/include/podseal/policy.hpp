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

#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "podseal/digest.hpp"
#include "podseal/measurement_log.hpp"
#include "podseal/pod_attribution.hpp"
#include "podseal/trust_anchor.hpp"

namespace podseal::policy {

/// path -> acceptable digests. No path maps to an empty set.
class AllowList {
 public:
  void add(const std::string& path, const Digest& digest) { entries_[path].insert(digest); }
  /// Throws PolicyError on an empty digest set.
  void set(const std::string& path, std::set<Digest> digests);

  const std::map<std::string, std::set<Digest>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::set<Digest>* find(const std::string& path) const;

  /// Adds every (path, digest) from `other`.
  void merge(const AllowList& other);

  friend bool operator==(const AllowList&, const AllowList&) = default;

 private:
  std::map<std::string, std::set<Digest>> entries_;
};

/// Which attributions an exclude rule applies to.
enum class RuleScope { kAll, kNode, kPods };

std::string_view to_string(RuleScope s);
std::optional<RuleScope> rule_scope_from_string(std::string_view s);

struct ExcludeRule {
  enum class Kind { kRegex, kPrefixInverted };

  Kind kind = Kind::kRegex;
  // Regex pattern (ECMAScript, searched, lookahead supported) or the absolute prefix
  // to keep (everything outside it is excluded).
  std::string pattern;
  RuleScope scope = RuleScope::kAll;

  static ExcludeRule regex(std::string pattern, RuleScope scope = RuleScope::kAll) {
    return {Kind::kRegex, std::move(pattern), scope};
  }
  static ExcludeRule keep_prefix(std::string prefix, RuleScope scope = RuleScope::kAll) {
    return {Kind::kPrefixInverted, std::move(prefix), scope};
  }

  bool applies_to(const pod::PodRef& ref) const {
    return scope == RuleScope::kAll || (scope == RuleScope::kNode) == ref.is_node();
  }

  friend bool operator==(const ExcludeRule&, const ExcludeRule&) = default;
};

enum class RemediationAction { kEvictRestart, kIsolate, kNotifyOnly };

std::string_view to_string(RemediationAction a);
std::optional<RemediationAction> remediation_from_string(std::string_view s);

struct PolicyBundle {
  AllowList node_allowlist;
  std::map<std::string, AllowList> pod_allowlists;  // keyed by pod UID
  std::set<std::string> registered_pods;
  // Evicted pod UIDs. Their entries already in the log are history and are
  // skipped; new entries from them count as an unknown pod.
  std::set<std::string> retired_pods;
  std::vector<ExcludeRule> exclude_rules;
  tpm::PcrMask pcr_selection = tpm::PcrMask::only(tpm::kImaPcr);
  RemediationAction default_remediation = RemediationAction::kNotifyOnly;
  std::map<std::string, RemediationAction> remediation;  // "node" or pod UID
  std::map<std::string, std::string> pod_names;          // pod UID -> display name

  RemediationAction remediation_for(const pod::PodRef& scope) const;
  friend bool operator==(const PolicyBundle&, const PolicyBundle&) = default;
};

/// Throws PolicyError when an invariant of the bundle does not hold.
void validate(const PolicyBundle& bundle);

enum class ViolationReason { kUnknownFile, kDigestMismatch, kUnknownPod };

std::string_view to_string(ViolationReason r);
std::optional<ViolationReason> violation_reason_from_string(std::string_view s);

struct Violation {
  pod::PodRef scope;
  std::string path;
  std::optional<Digest> observed;
  ViolationReason reason = ViolationReason::kUnknownFile;
  std::size_t entry_index = 0;

  /// Identity for deduplication; entry_index is deliberately not part of it.
  auto key() const { return std::tie(scope, path, observed, reason); }
  bool same_finding(const Violation& o) const { return key() == o.key(); }

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct EvaluationResult {
  std::vector<Violation> node_violations;
  std::map<std::string, std::vector<Violation>> pod_violations;
  std::set<std::string> unknown_pods;
  // One unknown-pod violation per distinct (pod, path, digest).
  std::vector<Violation> unknown_pod_violations;
  // Registered pods with at least one attributed entry (excluded or not).
  std::set<std::string> observed_pods;

  bool clean() const { return node_violations.empty() && pod_violations.empty() && unknown_pods.empty(); }
  std::size_t violation_count() const;

  friend bool operator==(const EvaluationResult&, const EvaluationResult&) = default;
};

/// Immutable after construction; share freely across threads.
class CompiledPolicy {
 public:
  const PolicyBundle& bundle() const { return bundle_; }
  bool is_registered(const std::string& uid) const { return bundle_.registered_pods.count(uid) > 0; }
  bool is_excluded(std::string_view path, const pod::PodRef& scope) const;
  /// Allowlist for a scope; nullptr for unregistered pods.
  const AllowList* allowlist_for(const pod::PodRef& scope) const;

 private:
  friend std::shared_ptr<const CompiledPolicy> compile_policy(PolicyBundle bundle);
  struct CompiledRule {
    ExcludeRule rule;
    std::optional<std::regex> regex;
  };

  PolicyBundle bundle_;
  std::vector<CompiledRule> rules_;
};

/// Validates the bundle and compiles its exclude rules. Throws PolicyError
/// naming the offending rule.
std::shared_ptr<const CompiledPolicy> compile_policy(PolicyBundle bundle);

using AttributedEntry = std::pair<ml::MeasurementEntry, pod::PodRef>;

/// Scope of an entry: ima-cgn entries are attributed through their cgpath,
/// everything else belongs to the node.
pod::PodRef attribute(const ml::MeasurementEntry& entry);

inline constexpr std::size_t kNoHorizon = static_cast<std::size_t>(-1);

/// Checks PCR-verified entries against the scope allowlists.
/// `first_index` is the log index of entries[0]; entries of retired pods
/// below `retired_horizon` are skipped.
EvaluationResult evaluate_entries(const CompiledPolicy& policy, std::span<const AttributedEntry> entries,
                                  std::size_t first_index = 0, std::size_t retired_horizon = kNoHorizon);
EvaluationResult evaluate_entries(const CompiledPolicy& policy, std::span<const ml::MeasurementEntry> entries,
                                  std::size_t first_index = 0, std::size_t retired_horizon = kNoHorizon);

/// Golden baseline: every (path -> digest) observed for `scope`, without
/// the boot aggregate.
AllowList build_allowlist_from_log(std::span<const ml::MeasurementEntry> entries, const pod::PodRef& scope);
inline AllowList build_allowlist_from_log(const ml::MeasurementLog& log, const pod::PodRef& scope) {
  return build_allowlist_from_log(log.entries(), scope);
}

}  // namespace podseal::policy
