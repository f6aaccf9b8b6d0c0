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

#include <atomic>
#include <thread>

#include "podseal/agent.hpp"
#include "podseal/error.hpp"
#include "podseal/policy.hpp"
#include "podseal/registrar.hpp"
#include "podseal/wire.hpp"

namespace podseal::agent {
namespace {

const std::string kUid = "11111111-1111-4111-8111-111111111111";
const std::string kCg = "/kubepods/besteffort/pod" + kUid + "/c";

Bytes nonce(std::uint8_t fill = 1) { return Bytes(20, fill); }

TEST(Agent, FreshLogHasBootAggregate) {
  Agent a("n1", 1);
  auto r = a.handle_quote_request(nonce(), tpm::PcrMask::only(10), 0);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_TRUE(r.entries[0].is_boot_aggregate());
  EXPECT_EQ(r.total_count, 1u);
  EXPECT_EQ(ml::replay(r.entries), r.pcr_values.at(10));
  EXPECT_NE(r.entries[0].data, ml::boot_aggregate(tpm::PcrBank()));
  EXPECT_NE(a.pcr(0), Digest::zero());
}

TEST(Agent, IngestAndDedup) {
  Agent a("n1", 1);
  ml::FileEvent ev{"/bin/cat", sha256(std::string_view("cat")), kCg, 1};
  EXPECT_TRUE(a.ingest_event(ev));
  EXPECT_FALSE(a.ingest_event(ev));
  EXPECT_EQ(a.log_size(), 2u);
  auto log = a.log_snapshot();
  EXPECT_EQ(log[1].data.name, ml::TemplateName::kImaCgn);
  EXPECT_EQ(log[1].data.cgpath, kCg);
  EXPECT_EQ(policy::attribute(log[1]), pod::PodRef::pod(kUid));
  EXPECT_TRUE(a.ingest_event({"/usr/bin/kubelet", Digest::zero(), "/system.slice/kubelet.service", 2}));
  EXPECT_TRUE(policy::attribute(a.log_snapshot()[2]).is_node());
}

TEST(Agent, OffsetSemantics) {
  Agent a("n1", 1);
  a.ingest_event({"/bin/cat", Digest::zero(), kCg, 1});
  auto tail = a.handle_quote_request(nonce(), tpm::PcrMask::only(10), 2);
  EXPECT_TRUE(tail.entries.empty());
  EXPECT_EQ(tail.offset, 2u);
  EXPECT_TRUE(tpm::verify_quote(tail.quote, a.identity("").ak_public(), nonce()));
  EXPECT_THROW(a.handle_quote_request(nonce(), tpm::PcrMask::only(10), 3), OffsetOutOfRange);
  EXPECT_THROW(a.handle_quote_request(Bytes(3), tpm::PcrMask::only(10), 0), InvalidArgument);
}

TEST(Agent, ReportsDifferOnlyInNonce) {
  Agent a("n1", 1);
  auto r1 = a.handle_quote_request(nonce(1), tpm::PcrMask::only(10), 0);
  auto r2 = a.handle_quote_request(nonce(2), tpm::PcrMask::only(10), 0);
  EXPECT_EQ(r1.entries, r2.entries);
  EXPECT_EQ(r1.quote.composite_digest, r2.quote.composite_digest);
  EXPECT_NE(r1.quote.signature, r2.quote.signature);
  EXPECT_NE(r1.nonce, r2.nonce);
}

TEST(Agent, SeededIdentityStable) {
  EXPECT_TRUE(Agent("n1", 5).identity("x").same_keys(Agent("n1", 5).identity("y")));
  EXPECT_FALSE(Agent("n1", 5).identity("x").same_keys(Agent("n1", 6).identity("x")));
  EXPECT_THROW(Agent(""), InvalidArgument);
}

TEST(Agent, SnapshotConsistencyUnderConcurrentIngest) {
  Agent a("n1", 1);
  std::atomic<bool> done{false};
  std::thread writer([&] {
    for (int i = 0; i < 3000; ++i) a.ingest_event({"/bin/f" + std::to_string(i), Digest::zero(), kCg, 0});
    done = true;
  });
  auto ak = a.identity("").ak_public();
  std::size_t offset = 0;
  Digest running = Digest::zero();
  int quotes = 0;
  while (quotes < 1000) {
    Bytes n = nonce(static_cast<std::uint8_t>(quotes));
    auto r = a.handle_quote_request(n, tpm::PcrMask::only(10), offset);
    auto v = tpm::verify_quote(r.quote, ak, n);
    ASSERT_TRUE(v);
    running = ml::replay(r.entries, running, offset);
    ASSERT_EQ(running, r.pcr_values.at(10)) << "quote " << quotes;
    ASSERT_EQ(sha256(r.pcr_values.at(10).bytes()), v.composite_digest);
    offset += r.entries.size();
    ASSERT_EQ(offset, r.total_count);
    ++quotes;
  }
  writer.join();
  EXPECT_TRUE(done);
  EXPECT_GE(a.quotes_served(), 1000u);
}

TEST(AgentServer, HttpEndpoints) {
  Agent a("n1", 1);
  AgentServer server(a, "tok");
  server.start();
  http::Client c(server.base_url(), "tok");
  EXPECT_EQ(c.get("/v1/health").status, 200);
  EXPECT_EQ(http::Client(server.base_url()).get("/v1/health").status, 200);
  EXPECT_EQ(http::Client(server.base_url(), "bad").get("/v1/quote?nonce=00&mask=000400&offset=0").status, 401);

  json events = json::array({json(ml::FileEvent{"/a", Digest::zero(), kCg, 1}),
                             json(ml::FileEvent{"/a", Digest::zero(), kCg, 2})});
  auto posted = c.post("/v1/events", events.dump());
  ASSERT_EQ(posted.status, 200);
  EXPECT_EQ(json::parse(posted.body)["appended"], 1);

  std::string n = to_hex(nonce());
  auto q = c.get("/v1/quote?nonce=" + n + "&mask=000400&offset=1");
  ASSERT_EQ(q.status, 200) << q.body;
  auto r = json::parse(q.body).get<IntegrityReport>();
  EXPECT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(c.get("/v1/quote?nonce=" + n + "&mask=000400&offset=9").status, 409);
  EXPECT_EQ(c.get("/v1/quote?nonce=" + n + "&mask=000400&offset=x").status, 400);
  EXPECT_EQ(c.get("/v1/quote?nonce=" + n + "&mask=000400").status, 400);
  EXPECT_EQ(c.post("/v1/events", "{").status, 400);
  server.stop();
}

TEST(AgentServer, RegisterWithRegistrar) {
  registrar::Registry registry;
  registrar::RegistrarServer rs(registry, "tok", "admin");
  rs.start();
  Agent a("n1", 1);
  register_agent(a, http::Client(rs.base_url(), "tok"), "http://127.0.0.1:1");
  auto rec = registry.lookup("n1");
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->ak_public(), a.identity("").ak_public());
  Agent imposter("n1", 2);
  EXPECT_THROW(register_agent(imposter, http::Client(rs.base_url(), "tok"), "http://127.0.0.1:1"), Error);
  rs.stop();
  EXPECT_THROW(register_agent(a, http::Client(rs.base_url(), "tok", std::chrono::milliseconds(300)), "x"),
               Unreachable);
}

}  // namespace
}  // namespace podseal::agent
