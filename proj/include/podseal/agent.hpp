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
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "podseal/error.hpp"
#include "podseal/http.hpp"
#include "podseal/measurement_log.hpp"
#include "podseal/report.hpp"
#include "podseal/trust_anchor.hpp"

namespace podseal::agent {

/// Requested offset is past the end of the log; the verifier must resync
/// from offset 0.
class OffsetOutOfRange : public Error {
 public:
  using Error::Error;
};

/// Per-node attestation agent: owns the emulated TPM and the measurement
/// list. Event ingest and snapshot+quote are serialized by one mutex, so
/// every report's entries replay exactly to its quoted PCR 10.
class Agent {
 public:
  Agent(std::string agent_id, std::optional<std::uint64_t> seed = std::nullopt);

  const std::string& id() const { return id_; }

  /// Registration message for this agent, advertising `endpoint`.
  IdentityRecord identity(const std::string& endpoint) const;

  /// Measures the event with the pod-aware template. Returns false when the
  /// measurement was already recorded.
  bool ingest_event(const ml::FileEvent& event);

  /// Throws OffsetOutOfRange when offset exceeds the log count and
  /// InvalidArgument for a bad nonce or mask.
  IntegrityReport handle_quote_request(ByteView nonce, tpm::PcrMask mask, std::size_t offset) const;

  std::size_t log_size() const;
  ml::MeasurementLog log_snapshot() const;
  Digest pcr(std::size_t index) const;
  std::uint64_t quotes_served() const { return quotes_served_.load(); }

 private:
  std::string id_;
  mutable std::mutex mu_;
  tpm::TrustAnchor anchor_;
  ml::MeasurementLog log_;
  mutable std::atomic<std::uint64_t> quotes_served_{0};
};

/// Registers `agent` with the registrar at `registrar`. Throws Error with the
/// registrar's reason on rejection and Unreachable on transport failure.
void register_agent(const Agent& agent, const http::Client& registrar, const std::string& endpoint);

/// HTTP front end: GET /v1/quote, POST /v1/events, GET /v1/health.
class AgentServer {
 public:
  AgentServer(Agent& agent, std::string token);

  int start(const std::string& host = "127.0.0.1", int port = 0) { return server_.start(host, port); }
  void stop() { server_.stop(); }
  std::string base_url() const { return server_.base_url(); }

 private:
  Agent& agent_;
  http::Server server_;
};

}  // namespace podseal::agent
