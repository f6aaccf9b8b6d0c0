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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "podseal/agent.hpp"
#include "podseal/error.hpp"
#include "podseal/wire.hpp"

namespace podseal {
namespace {

const std::string kUid = "11111111-1111-4111-8111-111111111111";

template <typename T>
T round_trip(const T& v) {
  return json::parse(json(v).dump()).get<T>();
}

TEST(Wire, DigestIsPrefixedString) {
  auto d = sha256(std::string_view("x"));
  EXPECT_EQ(json(d), json(d.hex()));
  auto s1 = Digest::from_hex_any(std::string(40, 'a'));
  EXPECT_EQ(json(s1), json(s1.prefixed()));
  EXPECT_EQ(round_trip(s1), s1);
  EXPECT_EQ(round_trip(d), d);
  EXPECT_THROW(json("sha256:zz").get<Digest>(), InvalidArgument);
}

TEST(Wire, ReportRoundTrip) {
  agent::Agent a("n1", 3);
  a.ingest_event({"/bin/x", sha256(std::string_view("x")), "/kubepods/pod" + kUid + "/c", 1});
  auto r = a.handle_quote_request(Bytes(20, 7), tpm::PcrMask::only(10), 0);
  EXPECT_EQ(round_trip(r), r);
}

TEST(Wire, IdentityRoundTrip) {
  agent::Agent a("n1", 3);
  auto rec = a.identity("http://127.0.0.1:1");
  rec.registered_at = 99;
  auto back = round_trip(rec);
  EXPECT_TRUE(back.same_keys(rec));
  EXPECT_EQ(back.endpoint, rec.endpoint);
  EXPECT_EQ(back.registered_at, 99);
  EXPECT_EQ(back.ak_cert.signature, rec.ak_cert.signature);
  EXPECT_EQ(back.ek.manufacturer, rec.ek.manufacturer);
}

TEST(Wire, BundleRoundTrip) {
  policy::PolicyBundle b;
  b.node_allowlist.add("/usr/bin/a", sha256(std::string_view("a")));
  b.registered_pods = {kUid};
  b.retired_pods = {"22222222-2222-4222-8222-222222222222"};
  b.pod_allowlists[kUid].add("/b", sha256(std::string_view("b")));
  b.pod_allowlists[kUid].add("/b", sha256(std::string_view("b2")));
  b.exclude_rules = {policy::ExcludeRule::regex("^(?!/usr/bin/).*$", policy::RuleScope::kNode),
                     policy::ExcludeRule::keep_prefix("/opt", policy::RuleScope::kPods)};
  b.default_remediation = policy::RemediationAction::kIsolate;
  b.remediation[kUid] = policy::RemediationAction::kEvictRestart;
  b.pod_names[kUid] = "ausf";
  EXPECT_EQ(round_trip(b), b);

  auto path = std::filesystem::temp_directory_path() / "podseal_wire_bundle.json";
  write_file_atomic(path, json(b).dump(2));
  EXPECT_EQ(policy::load_bundle(path), b);
  std::filesystem::remove(path);
  EXPECT_THROW(policy::load_bundle(path), Error);
}

TEST(Wire, BundleRejectsGarbage) {
  auto j = json(policy::PolicyBundle{});
  j["remediation"] = json{{"default", "reboot"}};
  EXPECT_THROW(j.get<policy::PolicyBundle>(), PolicyError);
  auto k = json(policy::PolicyBundle{});
  k["registered_pods"] = json::array({"not-a-uid"});
  EXPECT_ANY_THROW(k.get<policy::PolicyBundle>());
}

TEST(Wire, AuditAndEvents) {
  AuditRecord r;
  r.agent_id = "n1";
  r.outcome = CycleOutcome::kPolicyViolations;
  r.composite_digest = sha256(std::string_view("c"));
  r.new_violations.push_back({pod::PodRef::pod(kUid), "/bin/cat", sha256(std::string_view("cat")),
                              policy::ViolationReason::kUnknownFile, 4});
  r.trust_delta.push_back({kUid, trust::TrustLevel::kStart, trust::TrustLevel::kUntrusted});
  r.sequence = 3;
  auto back = round_trip(r);
  EXPECT_EQ(back.new_violations, r.new_violations);
  EXPECT_EQ(back.trust_delta, r.trust_delta);
  EXPECT_EQ(back.composite_digest, r.composite_digest);
  EXPECT_EQ(back.outcome, r.outcome);
  EXPECT_EQ(back.sequence, 3u);

  RemediationEvent e{"n1", pod::PodRef::pod(kUid), policy::RemediationAction::kEvictRestart, "policy", "ausf", 7};
  EXPECT_EQ(round_trip(e), e);

  ml::FileEvent fe{"/a b", Digest::zero(), "/x", 5};
  EXPECT_EQ(round_trip(fe), fe);
}

TEST(Wire, TrustMapRoundTrip) {
  trust::TrustMap m;
  m.node_state = trust::TrustState::start(4);
  trust::TrustState bad;
  trust::mark_untrusted(bad, 9, trust::kReasonPolicy,
                        {{pod::PodRef::pod(kUid), "/x", std::nullopt, policy::ViolationReason::kUnknownPod, 0}});
  m.pod_states[kUid] = bad;
  EXPECT_EQ(round_trip(m), m);
}

TEST(Wire, CycleOutcomeStrings) {
  for (auto o : {CycleOutcome::kOk, CycleOutcome::kQuoteInvalid, CycleOutcome::kReplayMismatch,
                 CycleOutcome::kPolicyViolations, CycleOutcome::kAgentUnreachable})
    EXPECT_EQ(cycle_outcome_from_string(to_string(o)), o);
}

TEST(Audit, SequenceAndFileMirror) {
  auto path = std::filesystem::temp_directory_path() / "podseal_audit_test.jsonl";
  std::filesystem::remove(path);
  {
    AuditLog log(path);
    AuditRecord a;
    a.agent_id = "n1";
    auto first = log.append(a);
    a.agent_id = "n2";
    auto second = log.append(a);
    EXPECT_LT(first.sequence, second.sequence);
    EXPECT_LE(first.timestamp, second.timestamp);
    EXPECT_EQ(log.for_agent("n2").size(), 1u);
    EXPECT_EQ(log.since(second.timestamp).size() >= 1, true);
    EXPECT_EQ(log.size(), 2u);
  }
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    EXPECT_NO_THROW(json::parse(line).get<AuditRecord>());
    ++lines;
  }
  EXPECT_EQ(lines, 2);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace podseal
