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

#include "podseal/measurement_log.hpp"

#include <charconv>

#include "podseal/error.hpp"

namespace podseal::ml {

namespace {

void put_field(Bytes& out, std::string_view field) {
  auto n = static_cast<std::uint32_t>(field.size());
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
  out.insert(out.end(), field.begin(), field.end());
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(' ', start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      break;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

}  // namespace

std::string_view to_string(TemplateName t) { return t == TemplateName::kImaNg ? "ima-ng" : "ima-cgn"; }

std::optional<TemplateName> template_from_string(std::string_view s) {
  if (s == "ima-ng") return TemplateName::kImaNg;
  if (s == "ima-cgn") return TemplateName::kImaCgn;
  return std::nullopt;
}

TemplateData TemplateData::ima_ng(Digest filedata_hash, std::string path) {
  return {TemplateName::kImaNg, filedata_hash, std::move(path), {}};
}

TemplateData TemplateData::ima_cgn(Digest filedata_hash, std::string path, std::string cgpath) {
  return {TemplateName::kImaCgn, filedata_hash, std::move(path), std::move(cgpath)};
}

void validate(const TemplateData& data) {
  if (data.path.empty()) throw InvalidArgument("template path must not be empty");
  if (data.path.find('\n') != std::string::npos) throw InvalidArgument("template path contains a newline");
  if (data.cgpath.find('\n') != std::string::npos) throw InvalidArgument("cgpath contains a newline");
  if (data.name == TemplateName::kImaNg && !data.cgpath.empty())
    throw InvalidArgument("ima-ng entries carry no cgpath");
}

Bytes canonical_template_data(const TemplateData& data) {
  Bytes out;
  out.reserve(16 + 2 * data.filedata_hash.size() + data.path.size() + data.cgpath.size());
  put_field(out, data.filedata_hash.prefixed());
  put_field(out, data.path);
  if (data.name == TemplateName::kImaCgn) put_field(out, data.cgpath);
  return out;
}

Digest template_hash(const TemplateData& data) { return sha256(canonical_template_data(data)); }

MeasurementEntry MeasurementEntry::from_data(TemplateData data) {
  validate(data);
  MeasurementEntry e;
  e.template_hash = ml::template_hash(data);
  e.data = std::move(data);
  return e;
}

MeasurementLog::MeasurementLog(std::vector<MeasurementEntry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) seen_.insert(key_of(e.data));
}

MeasurementLog::Key MeasurementLog::key_of(const TemplateData& d) {
  return {d.name, d.path, d.filedata_hash, d.cgpath};
}

std::vector<MeasurementEntry> MeasurementLog::segment(std::size_t offset) const {
  if (offset > entries_.size())
    throw InvalidArgument("offset " + std::to_string(offset) + " beyond log count " +
                          std::to_string(entries_.size()));
  return {entries_.begin() + static_cast<std::ptrdiff_t>(offset), entries_.end()};
}

void MeasurementLog::append(MeasurementEntry entry) {
  seen_.insert(key_of(entry.data));
  entries_.push_back(std::move(entry));
}

bool MeasurementLog::contains(const TemplateData& data) const { return seen_.count(key_of(data)) > 0; }

namespace {

TemplateData data_for(const FileEvent& event, TemplateName name) {
  if (name == TemplateName::kImaCgn) return TemplateData::ima_cgn(event.content_digest, event.path, event.cgpath);
  return TemplateData::ima_ng(event.content_digest, event.path);
}

}  // namespace

std::optional<MeasurementEntry> append_measurement(MeasurementLog& log, tpm::PcrBank& bank, const FileEvent& event,
                                                   TemplateName name) {
  TemplateData data = data_for(event, name);
  if (log.contains(data)) return std::nullopt;
  MeasurementEntry entry = MeasurementEntry::from_data(std::move(data));
  bank.extend(entry.pcr_index, entry.template_hash);
  log.append(entry);
  return entry;
}

std::optional<MeasurementEntry> append_measurement(MeasurementLog& log, tpm::TrustAnchor& anchor,
                                                   const FileEvent& event, TemplateName name) {
  TemplateData data = data_for(event, name);
  if (log.contains(data)) return std::nullopt;
  MeasurementEntry entry = MeasurementEntry::from_data(std::move(data));
  anchor.extend(entry.pcr_index, entry.template_hash);
  log.append(entry);
  return entry;
}

TemplateData boot_aggregate(const tpm::PcrBank& bank) {
  Bytes concat;
  for (std::size_t i = 0; i < 8; ++i) {
    auto b = bank.value(i).bytes();
    concat.insert(concat.end(), b.begin(), b.end());
  }
  return TemplateData::ima_ng(sha256(concat), std::string(kBootAggregatePath));
}

Digest replay(std::span<const MeasurementEntry> entries, const Digest& initial, std::size_t base_index) {
  Digest pcr = initial;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.template_hash.algorithm() != HashAlgorithm::kSha256)
      throw IntegrityError(base_index + i, "template hash is not SHA-256");
    if (template_hash(e.data) != e.template_hash)
      throw IntegrityError(base_index + i, "template hash does not match template data");
    pcr = tpm::extend_value(pcr, e.template_hash);
  }
  return pcr;
}

std::string escape_field(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (c == ' ')
      out += "\\x20";
    else if (c == '\\')
      out += "\\x5c";
    else
      out += c;
  }
  return out;
}

std::string unescape_field(std::string_view escaped) {
  std::string out;
  out.reserve(escaped.size());
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    if (escaped[i] == '\\' && i + 3 < escaped.size() && escaped[i + 1] == 'x') {
      int hi = hex_value(escaped[i + 2]);
      int lo = hex_value(escaped[i + 3]);
      if (hi >= 0 && lo >= 0) {
        out += static_cast<char>((hi << 4) | lo);
        i += 3;
        continue;
      }
    }
    out += escaped[i];
  }
  return out;
}

MeasurementEntry parse_ascii_line(std::string_view line, std::size_t line_number) {
  auto parts = split_spaces(line);
  if (parts.size() < 5) throw ParseError(line_number, "expected at least 5 space-separated fields");

  unsigned pcr = 0;
  auto [ptr, ec] = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), pcr);
  if (ec != std::errc() || ptr != parts[0].data() + parts[0].size() || pcr >= tpm::kPcrCount ||
      (parts[0].size() > 1 && parts[0][0] == '0'))
    throw ParseError(line_number, "invalid PCR index '" + std::string(parts[0]) + "'");

  auto name = template_from_string(parts[2]);
  if (!name) throw ParseError(line_number, "unknown template '" + std::string(parts[2]) + "'");
  std::size_t expected = *name == TemplateName::kImaNg ? 5 : 6;
  if (parts.size() != expected)
    throw ParseError(line_number, std::string(parts[2]) + " expects " + std::to_string(expected) + " fields, got " +
                                      std::to_string(parts.size()));

  MeasurementEntry entry;
  entry.pcr_index = static_cast<std::uint8_t>(pcr);
  try {
    if (!is_lower_hex(parts[1])) throw InvalidArgument("template hash must be lowercase hex");
    entry.template_hash = Digest::from_hex_any(parts[1]);
    auto colon = parts[3].find(':');
    if (colon == std::string_view::npos) throw InvalidArgument("file digest lacks an algorithm prefix");
    if (!is_lower_hex(parts[3].substr(colon + 1))) throw InvalidArgument("file digest must be lowercase hex");
    entry.data.filedata_hash = Digest::parse(parts[3]);
  } catch (const InvalidArgument& e) {
    throw ParseError(line_number, e.what());
  }
  entry.data.name = *name;
  entry.data.path = unescape_field(parts[4]);
  if (entry.data.path.empty()) throw ParseError(line_number, "empty path");
  if (*name == TemplateName::kImaCgn) entry.data.cgpath = unescape_field(parts[5]);
  return entry;
}

std::vector<MeasurementEntry> parse_ascii_entries(std::string_view text) {
  std::vector<MeasurementEntry> entries;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_number;
    auto line = text.substr(start, end - start);
    if (line.empty()) throw ParseError(line_number, "empty line");
    entries.push_back(parse_ascii_line(line, line_number));
    start = end + 1;
  }
  return entries;
}

MeasurementLog parse_ascii(std::string_view text) { return MeasurementLog(parse_ascii_entries(text)); }

std::string emit_ascii_line(const MeasurementEntry& e) {
  std::string line = std::to_string(e.pcr_index);
  line += ' ';
  line += e.template_hash.hex();
  line += ' ';
  line += to_string(e.data.name);
  line += ' ';
  line += e.data.filedata_hash.prefixed();
  line += ' ';
  line += escape_field(e.data.path);
  if (e.data.name == TemplateName::kImaCgn) {
    line += ' ';
    line += escape_field(e.data.cgpath);
  }
  return line;
}

std::string emit_ascii(std::span<const MeasurementEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    out += emit_ascii_line(e);
    out += '\n';
  }
  return out;
}

}  // namespace podseal::ml
