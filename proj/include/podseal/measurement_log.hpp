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

#include <cstdint>
#include <optional>
#include <span>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "podseal/digest.hpp"
#include "podseal/trust_anchor.hpp"

namespace podseal::ml {

inline constexpr std::string_view kBootAggregatePath = "boot_aggregate";

enum class TemplateName : std::uint8_t { kImaNg, kImaCgn };

std::string_view to_string(TemplateName t);
std::optional<TemplateName> template_from_string(std::string_view s);

/// Template fields. `cgpath` is only meaningful for ima-cgn and is always
/// empty for ima-ng.
struct TemplateData {
  TemplateName name = TemplateName::kImaNg;
  Digest filedata_hash;
  std::string path;
  std::string cgpath;

  static TemplateData ima_ng(Digest filedata_hash, std::string path);
  static TemplateData ima_cgn(Digest filedata_hash, std::string path, std::string cgpath);

  friend bool operator==(const TemplateData&, const TemplateData&) = default;
};

/// Throws InvalidArgument on an empty path, embedded newline or a cgpath
/// on an ima-ng entry.
void validate(const TemplateData& data);

/// For each field in declared order: u32be(length) || bytes. Fields are
/// "<alg>:<hex digest>", path and, for ima-cgn, cgpath.
Bytes canonical_template_data(const TemplateData& data);
Digest template_hash(const TemplateData& data);

struct MeasurementEntry {
  std::uint8_t pcr_index = static_cast<std::uint8_t>(tpm::kImaPcr);
  Digest template_hash;
  TemplateData data;

  static MeasurementEntry from_data(TemplateData data);
  bool is_boot_aggregate() const { return data.path == kBootAggregatePath; }

  friend bool operator==(const MeasurementEntry&, const MeasurementEntry&) = default;
};

/// The stimulus behind a measurement: a file was executed or opened.
struct FileEvent {
  std::string path;
  Digest content_digest;
  std::string cgpath;
  std::uint64_t timestamp = 0;

  friend bool operator==(const FileEvent&, const FileEvent&) = default;
};

/// Append-only measurement list with measure-once semantics.
class MeasurementLog {
 public:
  MeasurementLog() = default;
  explicit MeasurementLog(std::vector<MeasurementEntry> entries);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<MeasurementEntry>& entries() const { return entries_; }
  const MeasurementEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Entries [offset, size()). Throws InvalidArgument if offset > size().
  std::vector<MeasurementEntry> segment(std::size_t offset) const;

  void append(MeasurementEntry entry);
  bool contains(const TemplateData& data) const;

  friend bool operator==(const MeasurementLog& a, const MeasurementLog& b) { return a.entries_ == b.entries_; }

 private:
  using Key = std::tuple<TemplateName, std::string, Digest, std::string>;
  static Key key_of(const TemplateData& data);

  std::vector<MeasurementEntry> entries_;
  std::set<Key> seen_;
};

/// Builds the entry for `event`, appends it and extends PCR 10 with its
/// template hash. Returns nullopt when the same (template, path, digest,
/// cgpath) was already measured.
std::optional<MeasurementEntry> append_measurement(MeasurementLog& log, tpm::PcrBank& bank,
                                                   const FileEvent& event, TemplateName name);

/// Same as above but extends through a TrustAnchor.
std::optional<MeasurementEntry> append_measurement(MeasurementLog& log, tpm::TrustAnchor& anchor,
                                                   const FileEvent& event, TemplateName name);

/// ima-ng entry "boot_aggregate" over SHA-256(PCR0 || ... || PCR7).
TemplateData boot_aggregate(const tpm::PcrBank& bank);

/// Folds extend over `entries` starting from `initial`. Every template hash
/// is recomputed first; a mismatch throws IntegrityError carrying
/// `base_index + i`.
Digest replay(std::span<const MeasurementEntry> entries, const Digest& initial = Digest::zero(),
              std::size_t base_index = 0);

/// Parses ascii_runtime_measurements text. Throws ParseError (1-based line).
MeasurementLog parse_ascii(std::string_view text);
/// Parses without the measure-once filter, preserving duplicate lines.
std::vector<MeasurementEntry> parse_ascii_entries(std::string_view text);
MeasurementEntry parse_ascii_line(std::string_view line, std::size_t line_number = 1);

std::string emit_ascii(std::span<const MeasurementEntry> entries);
inline std::string emit_ascii(const MeasurementLog& log) { return emit_ascii(log.entries()); }
std::string emit_ascii_line(const MeasurementEntry& entry);

std::string escape_field(std::string_view raw);
std::string unescape_field(std::string_view escaped);

}  // namespace podseal::ml
