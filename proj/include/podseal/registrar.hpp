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

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "podseal/http.hpp"
#include "podseal/report.hpp"

namespace podseal::registrar {

enum class RejectReason { kInvalidAkCert, kConflict };

std::string_view to_string(RejectReason r);

struct RegistrationResult {
  bool accepted = false;
  RejectReason reason = RejectReason::kInvalidAkCert;  // valid when rejected
  std::string detail;

  explicit operator bool() const { return accepted; }
};

/// Identity store. Records are pinned: once an agent id is bound to EK/AK
/// keys only remove() can unbind it. With a backing file every change is
/// written through a temporary file and rename.
class Registry {
 public:
  Registry();
  explicit Registry(std::filesystem::path file);

  RegistrationResult register_agent(IdentityRecord record);
  std::optional<IdentityRecord> lookup(const std::string& agent_id) const;
  /// Returns false when the id was not registered.
  bool remove(const std::string& agent_id);
  std::vector<IdentityRecord> list() const;

 private:
  using Snapshot = std::map<std::string, IdentityRecord>;

  std::shared_ptr<const Snapshot> snapshot() const;
  void persist(const Snapshot& records) const;

  std::optional<std::filesystem::path> file_;
  std::mutex write_mu_;
  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> records_;
};

/// POST /v1/agents, GET /v1/agents/<id>, DELETE /v1/agents/<id> (admin).
class RegistrarServer {
 public:
  RegistrarServer(Registry& registry, std::string token, std::string admin_token);

  int start(const std::string& host = "127.0.0.1", int port = 0) { return server_.start(host, port); }
  void stop() { server_.stop(); }
  std::string base_url() const { return server_.base_url(); }

 private:
  Registry& registry_;
  http::Server server_;
};

/// Remote lookups against a registrar.
class RegistrarClient {
 public:
  explicit RegistrarClient(std::string base_url, std::string token = {});

  /// nullopt when the registrar does not know the id; throws Unreachable on
  /// transport failure and Error on any other unexpected answer.
  std::optional<IdentityRecord> lookup(const std::string& agent_id) const;
  RegistrationResult register_agent(const IdentityRecord& record) const;
  bool remove(const std::string& agent_id) const;

 private:
  http::Client client_;
};

}  // namespace podseal::registrar
