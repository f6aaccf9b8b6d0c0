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

// JSON encodings of everything that crosses a process boundary: HTTP
// bodies, the policy bundle file, registrar and audit lines.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "podseal/audit.hpp"
#include "podseal/policy.hpp"
#include "podseal/report.hpp"
#include "podseal/trust.hpp"

namespace podseal {

using json = nlohmann::json;

void to_json(json& j, const Digest& d);
void from_json(const json& j, Digest& d);

void to_json(json& j, const IntegrityReport& r);
void from_json(const json& j, IntegrityReport& r);

void to_json(json& j, const IdentityRecord& r);
void from_json(const json& j, IdentityRecord& r);

void to_json(json& j, const TrustDelta& d);
void from_json(const json& j, TrustDelta& d);

void to_json(json& j, const AuditRecord& r);
void from_json(const json& j, AuditRecord& r);

void to_json(json& j, const RemediationEvent& e);
void from_json(const json& j, RemediationEvent& e);

/// Reads a JSON document from disk. Throws Error with the path on failure.
json read_json_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

namespace tpm {
void to_json(json& j, const Quote& q);
void from_json(const json& j, Quote& q);
}  // namespace tpm

namespace ml {
void to_json(json& j, const FileEvent& e);
void from_json(const json& j, FileEvent& e);
}  // namespace ml

namespace policy {
void to_json(json& j, const AllowList& a);
void from_json(const json& j, AllowList& a);
void to_json(json& j, const ExcludeRule& r);
void from_json(const json& j, ExcludeRule& r);
void to_json(json& j, const PolicyBundle& b);
void from_json(const json& j, PolicyBundle& b);
void to_json(json& j, const Violation& v);
void from_json(const json& j, Violation& v);

PolicyBundle load_bundle(const std::filesystem::path& path);
}  // namespace policy

namespace trust {
void to_json(json& j, const TrustState& s);
void from_json(const json& j, TrustState& s);
void to_json(json& j, const TrustMap& m);
void from_json(const json& j, TrustMap& m);
}  // namespace trust

}  // namespace podseal
