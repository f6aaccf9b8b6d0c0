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

#include "podseal/registrar.hpp"

#include <fstream>

#include "podseal/error.hpp"
#include "podseal/trust.hpp"
#include "podseal/wire.hpp"

namespace podseal::registrar {

std::string_view to_string(RejectReason r) {
  return r == RejectReason::kConflict ? "conflict" : "invalid-ak-cert";
}

Registry::Registry() : records_(std::make_shared<const Snapshot>()) {}

Registry::Registry(std::filesystem::path file) : file_(std::move(file)) {
  Snapshot records;
  std::ifstream in(*file_);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto rec = json::parse(line).get<IdentityRecord>();
      records[rec.agent_id] = std::move(rec);
    } catch (const json::exception& e) {
      throw ParseError(n, file_->string() + ": " + e.what());
    }
  }
  records_ = std::make_shared<const Snapshot>(std::move(records));
}

std::shared_ptr<const Registry::Snapshot> Registry::snapshot() const {
  std::lock_guard lock(snap_mu_);
  return records_;
}

void Registry::persist(const Snapshot& records) const {
  if (!file_) return;
  std::string content;
  for (const auto& [id, rec] : records) content += json(rec).dump() + '\n';
  write_file_atomic(*file_, content);
}

RegistrationResult Registry::register_agent(IdentityRecord record) {
  if (record.agent_id.empty()) return {false, RejectReason::kInvalidAkCert, "empty agent id"};
  if (!tpm::verify_ek_certificate(record.ek))
    return {false, RejectReason::kInvalidAkCert, "EK certificate does not verify"};
  if (!tpm::verify_ak_certificate(record.ak_cert, record.ek.ek_public))
    return {false, RejectReason::kInvalidAkCert, "AK certificate does not verify under the EK"};

  std::lock_guard lock(write_mu_);
  auto current = snapshot();
  auto it = current->find(record.agent_id);
  if (it != current->end()) {
    if (!it->second.same_keys(record))
      return {false, RejectReason::kConflict, "agent id " + record.agent_id + " is pinned to different keys"};
    if (it->second.endpoint == record.endpoint) return {true, {}, "already registered"};
    record.registered_at = it->second.registered_at;
  } else {
    record.registered_at = trust::now_ms();
  }
  auto next = std::make_shared<Snapshot>(*current);
  (*next)[record.agent_id] = std::move(record);
  persist(*next);
  std::lock_guard snap_lock(snap_mu_);
  records_ = std::move(next);
  return {true, {}, {}};
}

std::optional<IdentityRecord> Registry::lookup(const std::string& agent_id) const {
  auto snap = snapshot();
  auto it = snap->find(agent_id);
  if (it == snap->end()) return std::nullopt;
  return it->second;
}

bool Registry::remove(const std::string& agent_id) {
  std::lock_guard lock(write_mu_);
  auto current = snapshot();
  if (!current->count(agent_id)) return false;
  auto next = std::make_shared<Snapshot>(*current);
  next->erase(agent_id);
  persist(*next);
  std::lock_guard snap_lock(snap_mu_);
  records_ = std::move(next);
  return true;
}

std::vector<IdentityRecord> Registry::list() const {
  std::vector<IdentityRecord> out;
  for (const auto& [id, rec] : *snapshot()) out.push_back(rec);
  return out;
}

RegistrarServer::RegistrarServer(Registry& registry, std::string token, std::string admin_token)
    : registry_(registry), server_(std::move(token), std::move(admin_token)) {
  server_.route("POST", "/v1/agents", [this](const http::Request& req) {
    auto result = registry_.register_agent(json::parse(req.body).get<IdentityRecord>());
    if (!result) {
      int status = result.reason == RejectReason::kConflict ? 409 : 400;
      return http::Response{status, json{{"error", to_string(result.reason)}, {"detail", result.detail}}.dump()};
    }
    return http::Response{200, json{{"status", "accepted"}}.dump()};
  });
  server_.route("GET", R"(/v1/agents/([^/]+))", [this](const http::Request& req) {
    auto rec = registry_.lookup(req.matches.at(0));
    if (!rec) throw NotFound("agent " + req.matches.at(0) + " not registered");
    return http::Response{200, json(*rec).dump()};
  });
  server_.route("DELETE", R"(/v1/agents/([^/]+))", [this](const http::Request& req) {
    if (!registry_.remove(req.matches.at(0))) throw NotFound("agent " + req.matches.at(0) + " not registered");
    return http::Response{200, json{{"status", "deleted"}}.dump()};
  }, http::Auth::kAdmin);
}

RegistrarClient::RegistrarClient(std::string base_url, std::string token)
    : client_(std::move(base_url), std::move(token)) {}

namespace {

std::string error_of(const http::Response& res) {
  try {
    auto j = json::parse(res.body);
    return j.value("error", res.body);
  } catch (const json::exception&) {
    return res.body;
  }
}

}  // namespace

std::optional<IdentityRecord> RegistrarClient::lookup(const std::string& agent_id) const {
  auto res = client_.get("/v1/agents/" + agent_id);
  if (res.status == 404) return std::nullopt;
  if (!res.ok()) throw Error("registrar lookup failed: " + error_of(res));
  return json::parse(res.body).get<IdentityRecord>();
}

RegistrationResult RegistrarClient::register_agent(const IdentityRecord& record) const {
  auto res = client_.post("/v1/agents", json(record).dump());
  if (res.ok()) return {true, {}, {}};
  auto err = error_of(res);
  if (err == "conflict") return {false, RejectReason::kConflict, err};
  if (err == "invalid-ak-cert") return {false, RejectReason::kInvalidAkCert, err};
  throw Error("registration failed: " + err);
}

bool RegistrarClient::remove(const std::string& agent_id) const {
  auto res = client_.del("/v1/agents/" + agent_id);
  if (res.status == 404) return false;
  if (!res.ok()) throw Error("registrar delete failed: " + error_of(res));
  return true;
}

}  // namespace podseal::registrar
