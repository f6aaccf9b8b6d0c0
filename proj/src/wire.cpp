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

#include "podseal/wire.hpp"

#include <fstream>
#include <sstream>

#include "podseal/error.hpp"

namespace podseal {

namespace {

template <typename Array>
Array fixed_from_base64(const json& j, const char* field) {
  Bytes raw = from_base64(j.at(field).get<std::string>());
  Array out{};
  if (raw.size() != out.size()) throw InvalidArgument(std::string(field) + ": wrong length");
  std::copy(raw.begin(), raw.end(), out.begin());
  return out;
}

std::string digest_text(const Digest& d) {
  return d.algorithm() == HashAlgorithm::kSha256 ? d.hex() : d.prefixed();
}

}  // namespace

void to_json(json& j, const Digest& d) { j = digest_text(d); }

void from_json(const json& j, Digest& d) { d = Digest::parse(j.get<std::string>()); }

void to_json(json& j, const IntegrityReport& r) {
  json pcrs = json::object();
  for (const auto& [index, value] : r.pcr_values) pcrs[std::to_string(index)] = value;
  j = json{{"agent_id", r.agent_id},
           {"nonce", to_hex(r.nonce)},
           {"quote", r.quote},
           {"pcr_values", pcrs},
           {"offset", r.offset},
           {"entries", ml::emit_ascii(r.entries)},
           {"total_count", r.total_count}};
}

void from_json(const json& j, IntegrityReport& r) {
  r.agent_id = j.at("agent_id").get<std::string>();
  r.nonce = from_hex(j.at("nonce").get<std::string>());
  r.quote = j.at("quote").get<tpm::Quote>();
  r.pcr_values.clear();
  for (const auto& [index, value] : j.at("pcr_values").items())
    r.pcr_values[std::stoul(index)] = value.get<Digest>();
  r.offset = j.at("offset").get<std::size_t>();
  r.entries = ml::parse_ascii_entries(j.at("entries").get<std::string>());
  r.total_count = j.at("total_count").get<std::size_t>();
}

void to_json(json& j, const IdentityRecord& r) {
  j = json{{"agent_id", r.agent_id},
           {"endpoint", r.endpoint},
           {"ek_public", to_base64(r.ek.ek_public)},
           {"ek_manufacturer", r.ek.manufacturer},
           {"ek_cert", to_base64(r.ek.ek_cert)},
           {"ak_public", to_base64(r.ak_cert.ak_public)},
           {"ak_cert", json{{"issuer_ek_id", r.ak_cert.issuer_ek_id}, {"signature", to_base64(r.ak_cert.signature)}}},
           {"registered_at", r.registered_at}};
}

void from_json(const json& j, IdentityRecord& r) {
  r.agent_id = j.at("agent_id").get<std::string>();
  r.endpoint = j.value("endpoint", "");
  r.ek.ek_public = fixed_from_base64<crypto::PublicKey>(j, "ek_public");
  r.ek.manufacturer = j.at("ek_manufacturer").get<std::string>();
  r.ek.ek_cert = fixed_from_base64<crypto::Signature>(j, "ek_cert");
  r.ak_cert.ak_public = fixed_from_base64<crypto::PublicKey>(j, "ak_public");
  const auto& cert = j.at("ak_cert");
  r.ak_cert.issuer_ek_id = cert.at("issuer_ek_id").get<std::string>();
  r.ak_cert.signature = fixed_from_base64<crypto::Signature>(cert, "signature");
  r.registered_at = j.value("registered_at", std::int64_t{0});
}

std::string_view to_string(CycleOutcome o) {
  switch (o) {
    case CycleOutcome::kOk:
      return "ok";
    case CycleOutcome::kQuoteInvalid:
      return "quote-invalid";
    case CycleOutcome::kReplayMismatch:
      return "replay-mismatch";
    case CycleOutcome::kPolicyViolations:
      return "policy-violations";
    case CycleOutcome::kAgentUnreachable:
      return "agent-unreachable";
  }
  return "ok";
}

std::optional<CycleOutcome> cycle_outcome_from_string(std::string_view s) {
  for (auto o : {CycleOutcome::kOk, CycleOutcome::kQuoteInvalid, CycleOutcome::kReplayMismatch,
                 CycleOutcome::kPolicyViolations, CycleOutcome::kAgentUnreachable})
    if (to_string(o) == s) return o;
  return std::nullopt;
}

void to_json(json& j, const TrustDelta& d) {
  j = json{{"scope", d.scope}, {"from", trust::to_string(d.from)}, {"to", trust::to_string(d.to)}};
}

void from_json(const json& j, TrustDelta& d) {
  d.scope = j.at("scope").get<std::string>();
  d.from = trust::trust_level_from_string(j.at("from").get<std::string>()).value();
  d.to = trust::trust_level_from_string(j.at("to").get<std::string>()).value();
}

void to_json(json& j, const AuditRecord& r) {
  j = json{{"seq", r.sequence},
           {"kind", r.kind},
           {"timestamp", r.timestamp},
           {"agent_id", r.agent_id},
           {"nonce", r.nonce},
           {"outcome", to_string(r.outcome)},
           {"detail", r.detail},
           {"composite_digest", r.composite_digest ? json(*r.composite_digest) : json(nullptr)},
           {"new_violations", r.new_violations},
           {"trust_delta", r.trust_delta}};
}

void from_json(const json& j, AuditRecord& r) {
  r.sequence = j.value("seq", std::uint64_t{0});
  r.kind = j.value("kind", "cycle");
  r.timestamp = j.at("timestamp").get<trust::Timestamp>();
  r.agent_id = j.at("agent_id").get<std::string>();
  r.nonce = j.value("nonce", "");
  r.outcome = cycle_outcome_from_string(j.at("outcome").get<std::string>()).value();
  r.detail = j.value("detail", "");
  if (j.contains("composite_digest") && !j["composite_digest"].is_null())
    r.composite_digest = j["composite_digest"].get<Digest>();
  r.new_violations = j.value("new_violations", std::vector<policy::Violation>{});
  r.trust_delta = j.value("trust_delta", std::vector<TrustDelta>{});
}

void to_json(json& j, const RemediationEvent& e) {
  j = json{{"agent_id", e.agent_id},
           {"scope", e.scope.to_string()},
           {"action", policy::to_string(e.action)},
           {"cause", e.cause},
           {"pod_name", e.pod_name},
           {"transition_id", e.transition_id}};
}

void from_json(const json& j, RemediationEvent& e) {
  e.agent_id = j.at("agent_id").get<std::string>();
  e.scope = pod::PodRef::parse(j.at("scope").get<std::string>());
  auto action = policy::remediation_from_string(j.at("action").get<std::string>());
  if (!action) throw InvalidArgument("unknown remediation action");
  e.action = *action;
  e.cause = j.value("cause", "");
  e.pod_name = j.value("pod_name", "");
  e.transition_id = j.value("transition_id", std::uint64_t{0});
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace tpm {

void to_json(json& j, const Quote& q) {
  j = json{{"nonce", to_hex(q.nonce)},
           {"pcr_selection", q.pcr_selection.hex()},
           {"composite_digest", q.composite_digest},
           {"signature", to_base64(q.signature)},
           {"ak_id", q.ak_id}};
}

void from_json(const json& j, Quote& q) {
  q.nonce = from_hex(j.at("nonce").get<std::string>());
  q.pcr_selection = PcrMask::parse_hex(j.at("pcr_selection").get<std::string>());
  q.composite_digest = j.at("composite_digest").get<Digest>();
  q.signature = fixed_from_base64<crypto::Signature>(j, "signature");
  q.ak_id = j.at("ak_id").get<std::string>();
}

}  // namespace tpm

namespace ml {

void to_json(json& j, const FileEvent& e) {
  j = json{{"path", e.path}, {"digest", e.content_digest}, {"cgpath", e.cgpath}, {"timestamp", e.timestamp}};
}

void from_json(const json& j, FileEvent& e) {
  e.path = j.at("path").get<std::string>();
  e.content_digest = j.at("digest").get<Digest>();
  e.cgpath = j.value("cgpath", "");
  e.timestamp = j.value("timestamp", std::uint64_t{0});
}

}  // namespace ml

namespace policy {

void to_json(json& j, const AllowList& a) {
  j = json::object();
  for (const auto& [path, digests] : a.entries()) {
    json list = json::array();
    for (const auto& d : digests) list.push_back(d);
    j[path] = std::move(list);
  }
}

void from_json(const json& j, AllowList& a) {
  a = AllowList();
  for (const auto& [path, digests] : j.items()) {
    std::set<Digest> set;
    for (const auto& d : digests) set.insert(d.get<Digest>());
    a.set(path, std::move(set));
  }
}

void to_json(json& j, const ExcludeRule& r) {
  j = json::object();
  j[r.kind == ExcludeRule::Kind::kRegex ? "regex" : "keep_prefix"] = r.pattern;
  j["scope"] = to_string(r.scope);
}

void from_json(const json& j, ExcludeRule& r) {
  if (j.is_string()) {
    r = ExcludeRule::regex(j.get<std::string>());
    return;
  }
  if (j.contains("regex")) {
    r.kind = ExcludeRule::Kind::kRegex;
    r.pattern = j["regex"].get<std::string>();
  } else if (j.contains("keep_prefix")) {
    r.kind = ExcludeRule::Kind::kPrefixInverted;
    r.pattern = j["keep_prefix"].get<std::string>();
  } else {
    throw PolicyError("exclude rule needs 'regex' or 'keep_prefix'");
  }
  auto scope = rule_scope_from_string(j.value("scope", "all"));
  if (!scope) throw PolicyError("exclude rule scope must be all, node or pods");
  r.scope = *scope;
}

void to_json(json& j, const PolicyBundle& b) {
  json overrides = json::object();
  for (const auto& [scope, action] : b.remediation) overrides[scope] = to_string(action);
  j = json{{"node_allowlist", b.node_allowlist},
           {"pod_allowlists", b.pod_allowlists},
           {"registered_pods", b.registered_pods},
           {"retired_pods", b.retired_pods},
           {"exclude_rules", b.exclude_rules},
           {"pcr_selection", b.pcr_selection.hex()},
           {"remediation", json{{"default", to_string(b.default_remediation)}, {"overrides", overrides}}},
           {"pod_names", b.pod_names}};
}

void from_json(const json& j, PolicyBundle& b) {
  b = PolicyBundle();
  if (j.contains("node_allowlist")) b.node_allowlist = j["node_allowlist"].get<AllowList>();
  if (j.contains("pod_allowlists"))
    for (const auto& [uid, list] : j["pod_allowlists"].items())
      b.pod_allowlists[pod::normalize_pod_uid(uid)] = list.get<AllowList>();
  if (j.contains("registered_pods"))
    for (const auto& uid : j["registered_pods"]) b.registered_pods.insert(pod::normalize_pod_uid(uid.get<std::string>()));
  if (j.contains("retired_pods"))
    for (const auto& uid : j["retired_pods"]) b.retired_pods.insert(pod::normalize_pod_uid(uid.get<std::string>()));
  if (j.contains("exclude_rules")) b.exclude_rules = j["exclude_rules"].get<std::vector<ExcludeRule>>();
  if (j.contains("pcr_selection")) b.pcr_selection = tpm::PcrMask::parse_hex(j["pcr_selection"].get<std::string>());
  if (j.contains("remediation")) {
    const auto& rem = j["remediation"];
    auto parse_action = [](const json& v) {
      auto a = remediation_from_string(v.get<std::string>());
      if (!a) throw PolicyError("unknown remediation action '" + v.get<std::string>() + "'");
      return *a;
    };
    if (rem.contains("default")) b.default_remediation = parse_action(rem["default"]);
    if (rem.contains("overrides"))
      for (const auto& [scope, action] : rem["overrides"].items())
        b.remediation[scope == "node" ? scope : pod::normalize_pod_uid(scope)] = parse_action(action);
  }
  if (j.contains("pod_names"))
    for (const auto& [uid, name] : j["pod_names"].items())
      b.pod_names[pod::normalize_pod_uid(uid)] = name.get<std::string>();
}

void to_json(json& j, const Violation& v) {
  j = json{{"scope", v.scope.to_string()},
           {"path", v.path},
           {"observed", v.observed ? json(*v.observed) : json(nullptr)},
           {"reason", to_string(v.reason)},
           {"entry_index", v.entry_index}};
}

void from_json(const json& j, Violation& v) {
  v.scope = pod::PodRef::parse(j.at("scope").get<std::string>());
  v.path = j.at("path").get<std::string>();
  v.observed.reset();
  if (j.contains("observed") && !j["observed"].is_null()) v.observed = j["observed"].get<Digest>();
  auto reason = violation_reason_from_string(j.at("reason").get<std::string>());
  if (!reason) throw InvalidArgument("unknown violation reason");
  v.reason = *reason;
  v.entry_index = j.value("entry_index", std::size_t{0});
}

PolicyBundle load_bundle(const std::filesystem::path& path) {
  auto bundle = read_json_file(path).get<PolicyBundle>();
  validate(bundle);
  return bundle;
}

}  // namespace policy

namespace trust {

void to_json(json& j, const TrustState& s) {
  j = json{{"state", to_string(s.level)}, {"since", s.since}, {"violations", s.violations}, {"reasons", s.reasons}};
}

void from_json(const json& j, TrustState& s) {
  auto level = trust_level_from_string(j.at("state").get<std::string>());
  if (!level) throw InvalidArgument("unknown trust state");
  s.level = *level;
  s.since = j.value("since", Timestamp{0});
  s.violations = j.value("violations", std::vector<policy::Violation>{});
  s.reasons = j.value("reasons", std::vector<std::string>{});
}

void to_json(json& j, const TrustMap& m) { j = json{{"node", m.node_state}, {"pods", m.pod_states}}; }

void from_json(const json& j, TrustMap& m) {
  m.node_state = j.at("node").get<TrustState>();
  m.pod_states = j.at("pods").get<std::map<std::string, TrustState>>();
}

}  // namespace trust

}  // namespace podseal
