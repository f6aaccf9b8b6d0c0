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

#include "podseal/agent.hpp"

#include <charconv>

#include "podseal/wire.hpp"

namespace podseal::agent {

namespace {

// Synthetic measured boot: PCRs 0..7 receive one component digest each.
void measure_boot(tpm::TrustAnchor& anchor, const std::string& agent_id, std::optional<std::uint64_t> seed) {
  for (std::size_t i = 0; i < 8; ++i) {
    std::string component = "boot-component:" + std::to_string(i) + ":" + agent_id;
    if (seed) component += ":" + std::to_string(*seed);
    anchor.extend(i, sha256(component));
  }
}

}  // namespace

Agent::Agent(std::string agent_id, std::optional<std::uint64_t> seed) : id_(std::move(agent_id)), anchor_(seed) {
  if (id_.empty()) throw InvalidArgument("agent id must not be empty");
  measure_boot(anchor_, id_, seed);
  auto entry = ml::MeasurementEntry::from_data(ml::boot_aggregate(anchor_.pcrs()));
  anchor_.extend(entry.pcr_index, entry.template_hash);
  log_.append(std::move(entry));
}

IdentityRecord Agent::identity(const std::string& endpoint) const {
  IdentityRecord rec;
  rec.agent_id = id_;
  rec.endpoint = endpoint;
  rec.ek = anchor_.endorsement();
  rec.ak_cert = anchor_.attestation().ak_cert;
  return rec;
}

bool Agent::ingest_event(const ml::FileEvent& event) {
  std::lock_guard lock(mu_);
  return ml::append_measurement(log_, anchor_, event, ml::TemplateName::kImaCgn).has_value();
}

IntegrityReport Agent::handle_quote_request(ByteView nonce, tpm::PcrMask mask, std::size_t offset) const {
  IntegrityReport report;
  report.agent_id = id_;
  report.nonce.assign(nonce.begin(), nonce.end());
  {
    std::lock_guard lock(mu_);
    if (offset > log_.size())
      throw OffsetOutOfRange("offset " + std::to_string(offset) + " beyond log count " + std::to_string(log_.size()));
    report.entries = log_.segment(offset);
    report.total_count = log_.size();
    report.quote = anchor_.quote(nonce, mask);
    for (auto i : mask.indices()) report.pcr_values[i] = anchor_.pcrs().value(i);
  }
  report.offset = offset;
  ++quotes_served_;
  return report;
}

std::size_t Agent::log_size() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

ml::MeasurementLog Agent::log_snapshot() const {
  std::lock_guard lock(mu_);
  return log_;
}

Digest Agent::pcr(std::size_t index) const {
  std::lock_guard lock(mu_);
  return anchor_.pcrs().value(index);
}

void register_agent(const Agent& agent, const http::Client& registrar, const std::string& endpoint) {
  auto res = registrar.post("/v1/agents", json(agent.identity(endpoint)).dump());
  if (!res.ok()) {
    std::string reason = res.body;
    try {
      reason = json::parse(res.body).value("error", res.body);
    } catch (const json::exception&) {
    }
    throw Error("registration of " + agent.id() + " rejected: " + reason);
  }
}

AgentServer::AgentServer(Agent& agent, std::string token) : agent_(agent), server_(std::move(token)) {
  server_.route("GET", "/v1/health", [this](const http::Request&) {
    return http::Response{200, json{{"status", "ok"}, {"agent_id", agent_.id()}, {"count", agent_.log_size()}}.dump()};
  }, http::Auth::kNone);

  server_.route("GET", "/v1/quote", [this](const http::Request& req) {
    auto param = [&](const char* name) -> const std::string& {
      auto it = req.params.find(name);
      if (it == req.params.end()) throw InvalidArgument(std::string("missing parameter ") + name);
      return it->second;
    };
    Bytes nonce = from_hex(param("nonce"));
    auto mask = tpm::PcrMask::parse_hex(param("mask"));
    std::size_t offset = 0;
    const auto& off = param("offset");
    auto [ptr, ec] = std::from_chars(off.data(), off.data() + off.size(), offset);
    if (ec != std::errc() || ptr != off.data() + off.size()) throw InvalidArgument("invalid offset");
    try {
      return http::Response{200, json(agent_.handle_quote_request(nonce, mask, offset)).dump()};
    } catch (const OffsetOutOfRange& e) {
      return http::json_error(409, e.what());
    }
  });

  server_.route("POST", "/v1/events", [this](const http::Request& req) {
    auto body = json::parse(req.body);
    std::size_t appended = 0;
    if (body.is_array()) {
      for (const auto& e : body) appended += agent_.ingest_event(e.get<ml::FileEvent>());
    } else {
      appended += agent_.ingest_event(body.get<ml::FileEvent>());
    }
    return http::Response{200, json{{"appended", appended}, {"count", agent_.log_size()}}.dump()};
  });
}

}  // namespace podseal::agent
