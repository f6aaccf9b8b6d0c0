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

#include "podseal/pod_attribution.hpp"

#include <algorithm>
#include <cctype>

#include "podseal/error.hpp"

namespace podseal::pod {

namespace {

constexpr std::size_t kUidLength = 36;

bool is_hex_or_sep(char c) { return std::isxdigit(static_cast<unsigned char>(c)) || c == '-' || c == '_'; }

// Normalized UID or nullopt, without throwing.
std::optional<std::string> try_normalize(std::string_view raw) {
  if (raw.size() != kUidLength || !std::all_of(raw.begin(), raw.end(), is_hex_or_sep)) return std::nullopt;
  std::string out(raw);
  for (auto& c : out) {
    if (c == '_') c = '-';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (!is_canonical_uid(out)) return std::nullopt;
  return out;
}

std::optional<std::string> uid_from_segment(std::string_view seg) {
  // cgroupfs: "pod<uid>"
  if (seg.size() == 3 + kUidLength && seg.starts_with("pod")) return try_normalize(seg.substr(3));

  // systemd: "kubepods-pod<uid>.slice" or "kubepods-<qos>-pod<uid>.slice"
  constexpr std::string_view kSlice = ".slice";
  if (!seg.starts_with("kubepods") || !seg.ends_with(kSlice)) return std::nullopt;
  auto body = seg.substr(0, seg.size() - kSlice.size());
  if (body.size() < kUidLength + 4) return std::nullopt;
  auto marker = body.substr(body.size() - kUidLength - 4, 4);
  if (marker != "-pod") return std::nullopt;
  auto qos = body.substr(std::string_view("kubepods").size(), body.size() - kUidLength - 4 - 8);
  if (!qos.empty() && (qos.front() != '-' || qos.size() < 2 ||
                       !std::all_of(qos.begin() + 1, qos.end(), [](char c) { return std::islower(static_cast<unsigned char>(c)); })))
    return std::nullopt;
  return try_normalize(body.substr(body.size() - kUidLength));
}

}  // namespace

PodRef PodRef::pod(std::string uid) {
  if (!is_canonical_uid(uid)) throw InvalidArgument("not a canonical pod UID: '" + uid + "'");
  PodRef ref;
  ref.uid_ = std::move(uid);
  return ref;
}

PodRef PodRef::parse(std::string_view text) {
  if (text == "node") return node();
  return pod(normalize_pod_uid(text));
}

bool is_canonical_uid(std::string_view uid) {
  if (uid.size() != kUidLength) return false;
  for (std::size_t i = 0; i < uid.size(); ++i) {
    char c = uid[i];
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (c != '-') return false;
    } else if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
      return false;
    }
  }
  return true;
}

std::string normalize_pod_uid(std::string_view raw) {
  auto out = try_normalize(raw);
  if (!out) throw InvalidArgument("not a pod UID: '" + std::string(raw) + "'");
  return *out;
}

PodRef parse_cgroup_path(std::string_view cgpath) {
  std::size_t start = 0;
  while (start <= cgpath.size()) {
    auto end = cgpath.find('/', start);
    if (end == std::string_view::npos) end = cgpath.size();
    if (auto uid = uid_from_segment(cgpath.substr(start, end - start))) {
      return PodRef::pod(std::move(*uid));
    }
    start = end + 1;
  }
  return PodRef::node();
}

std::string_view to_string(CgroupStyle s) { return s == CgroupStyle::kCgroupfs ? "cgroupfs" : "systemd"; }

std::optional<CgroupStyle> cgroup_style_from_string(std::string_view s) {
  if (s == "cgroupfs") return CgroupStyle::kCgroupfs;
  if (s == "systemd") return CgroupStyle::kSystemd;
  return std::nullopt;
}

std::string_view to_string(QosClass q) {
  switch (q) {
    case QosClass::kGuaranteed:
      return "guaranteed";
    case QosClass::kBurstable:
      return "burstable";
    case QosClass::kBestEffort:
      return "besteffort";
  }
  return "besteffort";
}

std::optional<QosClass> qos_from_string(std::string_view s) {
  if (s == "guaranteed") return QosClass::kGuaranteed;
  if (s == "burstable") return QosClass::kBurstable;
  if (s == "besteffort") return QosClass::kBestEffort;
  return std::nullopt;
}

std::string cgroup_path_for(std::string_view uid, CgroupStyle style, QosClass qos, std::string_view container_id,
                            std::string_view prefix) {
  std::string out(prefix);
  if (style == CgroupStyle::kCgroupfs) {
    out += "/kubepods";
    if (qos != QosClass::kGuaranteed) {
      out += '/';
      out += to_string(qos);
    }
    out += "/pod";
    out += uid;
    out += '/';
    out += container_id;
    return out;
  }
  std::string underscored(uid);
  std::replace(underscored.begin(), underscored.end(), '-', '_');
  out += "/kubepods.slice";
  std::string parent = "kubepods";
  if (qos != QosClass::kGuaranteed) {
    parent += '-';
    parent += to_string(qos);
    out += '/';
    out += parent;
    out += ".slice";
  }
  out += '/';
  out += parent;
  out += "-pod";
  out += underscored;
  out += ".slice/cri-containerd-";
  out += container_id;
  out += ".scope";
  return out;
}

}  // namespace podseal::pod
