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

#include <fstream>

#include "podseal/audit.hpp"
#include "podseal/error.hpp"
#include "podseal/wire.hpp"

namespace podseal {

AuditLog::AuditLog(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(*file_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto rec = json::parse(line).get<AuditRecord>();
    last_ts_ = std::max(last_ts_, rec.timestamp);
    records_.push_back(std::move(rec));
  }
}

AuditRecord AuditLog::append(AuditRecord record) {
  std::lock_guard lock(mu_);
  if (record.timestamp == 0) record.timestamp = trust::now_ms();
  record.timestamp = std::max(record.timestamp, last_ts_);
  last_ts_ = record.timestamp;
  record.sequence = records_.size() + 1;
  if (file_) {
    std::ofstream out(*file_, std::ios::app);
    if (!out) throw Error("cannot append to audit log " + file_->string());
    out << json(record).dump() << '\n';
  }
  records_.push_back(record);
  return record;
}

std::vector<AuditRecord> AuditLog::since(trust::Timestamp ts) const {
  std::lock_guard lock(mu_);
  std::vector<AuditRecord> out;
  for (const auto& r : records_)
    if (r.timestamp >= ts) out.push_back(r);
  return out;
}

std::vector<AuditRecord> AuditLog::for_agent(const std::string& agent_id) const {
  std::lock_guard lock(mu_);
  std::vector<AuditRecord> out;
  for (const auto& r : records_)
    if (r.agent_id == agent_id) out.push_back(r);
  return out;
}

std::vector<AuditRecord> AuditLog::all() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

}  // namespace podseal
