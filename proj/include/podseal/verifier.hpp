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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "podseal/audit.hpp"
#include "podseal/http.hpp"
#include "podseal/policy.hpp"
#include "podseal/registrar.hpp"
#include "podseal/report.hpp"
#include "podseal/trust.hpp"
#include "podseal/wire.hpp"

namespace podseal::verifier {

using Millis = std::chrono::milliseconds;

/// Transport to one agent. Implementations throw Unreachable on transport
/// failure and agent::OffsetOutOfRange when the agent rejects the offset.
class AgentChannel {
 public:
  virtual ~AgentChannel() = default;
  virtual IntegrityReport request_report(ByteView nonce, tpm::PcrMask mask, std::size_t offset) = 0;
};

class HttpAgentChannel : public AgentChannel {
 public:
  HttpAgentChannel(std::string endpoint, std::string token, Millis timeout = Millis(3000));
  IntegrityReport request_report(ByteView nonce, tpm::PcrMask mask, std::size_t offset) override;

 private:
  http::Client client_;
};

/// Where the verifier looks up pinned identities.
class IdentityDirectory {
 public:
  virtual ~IdentityDirectory() = default;
  virtual std::optional<IdentityRecord> lookup(const std::string& agent_id) = 0;
};

class LocalDirectory : public IdentityDirectory {
 public:
  explicit LocalDirectory(const registrar::Registry& registry) : registry_(registry) {}
  std::optional<IdentityRecord> lookup(const std::string& agent_id) override { return registry_.lookup(agent_id); }

 private:
  const registrar::Registry& registry_;
};

class RemoteDirectory : public IdentityDirectory {
 public:
  explicit RemoteDirectory(registrar::RegistrarClient client) : client_(std::move(client)) {}
  std::optional<IdentityRecord> lookup(const std::string& agent_id) override { return client_.lookup(agent_id); }

 private:
  registrar::RegistrarClient client_;
};

using ChannelFactory = std::function<std::unique_ptr<AgentChannel>(const IdentityRecord&)>;

/// Delivers remediation events to a webhook from a background thread.
/// Every event is also recorded in the audit log. Events are suppressed
/// when their (agent, scope, transition) was already emitted.
class RemediationDispatcher {
 public:
  struct Options {
    std::optional<std::string> webhook_url;
    std::string webhook_token;  // bearer token sent with each delivery
    int max_attempts = 4;
    Millis initial_backoff = Millis(100);
    Millis timeout = Millis(2000);
  };

  RemediationDispatcher(std::shared_ptr<AuditLog> audit, Options options);
  ~RemediationDispatcher();

  /// Returns false when the event was suppressed as a duplicate.
  bool emit(RemediationEvent event);
  /// Blocks until every queued event has been delivered or given up on.
  void flush();

  std::vector<RemediationEvent> emitted() const;
  std::size_t delivered() const { return delivered_.load(); }
  std::size_t failed() const { return failed_.load(); }

 private:
  void run();
  void deliver(const RemediationEvent& event);

  std::shared_ptr<AuditLog> audit_;
  Options options_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<RemediationEvent> queue_;
  std::vector<RemediationEvent> emitted_;
  std::set<std::tuple<std::string, std::string, std::uint64_t>> seen_;
  bool busy_ = false;
  bool stopping_ = false;
  std::atomic<std::size_t> delivered_{0};
  std::atomic<std::size_t> failed_{0};
  std::thread worker_;
};

struct VerifierOptions {
  Millis default_interval = Millis(2000);
  int unreachable_grace = 5;
  std::size_t nonce_size = 20;
};

/// Consistent view of one session.
struct AgentStatus {
  std::string agent_id;
  trust::TrustMap trust;
  std::map<std::string, std::string> pod_names;
  std::size_t verified_count = 0;
  Digest running_pcr;
  std::optional<CycleOutcome> last_outcome;
  std::string last_detail;
  trust::Timestamp last_cycle = 0;
  std::uint64_t cycles = 0;
  int consecutive_misses = 0;
  Millis interval{0};
};

void to_json(json& j, const AgentStatus& s);
void from_json(const json& j, AgentStatus& s);

class Verifier {
 public:
  Verifier(VerifierOptions options, std::shared_ptr<IdentityDirectory> directory, ChannelFactory channels,
           std::shared_ptr<AuditLog> audit, std::shared_ptr<RemediationDispatcher> remediation);
  ~Verifier();

  Verifier(const Verifier&) = delete;
  Verifier& operator=(const Verifier&) = delete;

  /// Creates (or replaces) the session for `agent_id` in Start. With
  /// `poll` the session is attested every interval on its own thread.
  /// Throws NotFound for an unregistered agent, PolicyError for a bad
  /// bundle and Error when the registrar's AK certificate does not verify.
  void enroll(const std::string& agent_id, policy::PolicyBundle bundle, std::optional<Millis> interval = {},
              bool poll = true);
  /// Runs one attestation cycle now and returns its audit record.
  AuditRecord attest_now(const std::string& agent_id);

  AgentStatus status(const std::string& agent_id) const;
  std::vector<AgentStatus> status_all() const;

  /// Returns `scope` to Start. Throws NotFound for an unknown agent and
  /// InvalidArgument for a pod that is not registered in the session.
  void reset(const std::string& agent_id, const pod::PodRef& scope);
  void unenroll(const std::string& agent_id);
  void stop();

  AuditLog& audit() { return *audit_; }
  /// Number of policy evaluations run so far (instrumentation).
  std::uint64_t policy_evaluations() const { return policy_evaluations_.load(); }

 private:
  struct Session;

  std::shared_ptr<Session> session(const std::string& agent_id) const;
  AuditRecord run_cycle(Session& s);
  void poll_loop(std::shared_ptr<Session> s);

  VerifierOptions options_;
  std::shared_ptr<IdentityDirectory> directory_;
  ChannelFactory channels_;
  std::shared_ptr<AuditLog> audit_;
  std::shared_ptr<RemediationDispatcher> remediation_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> policy_evaluations_{0};
  std::atomic<std::uint64_t> next_transition_{1};
};

/// POST /v1/enroll, GET /v1/status[/<id>], POST /v1/reset, GET /v1/audit.
class VerifierServer {
 public:
  VerifierServer(Verifier& verifier, std::string token);

  int start(const std::string& host = "127.0.0.1", int port = 0) { return server_.start(host, port); }
  void stop() { server_.stop(); }
  std::string base_url() const { return server_.base_url(); }

 private:
  Verifier& verifier_;
  http::Server server_;
};

/// Splits "http://host:port/path" into base URL and path ("/" if absent).
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace podseal::verifier
