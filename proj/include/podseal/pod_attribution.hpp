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

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace podseal::pod {

/// Attribution of a measurement: the node itself, or one pod by UID.
class PodRef {
 public:
  PodRef() = default;

  static PodRef node() { return PodRef(); }
  /// `uid` must already be canonical (see normalize_pod_uid).
  static PodRef pod(std::string uid);

  bool is_node() const { return uid_.empty(); }
  bool is_pod() const { return !uid_.empty(); }
  const std::string& uid() const { return uid_; }

  /// "node" or the pod UID.
  std::string to_string() const { return is_node() ? "node" : uid_; }
  /// Inverse of to_string(); throws InvalidArgument on a malformed UID.
  static PodRef parse(std::string_view text);

  friend bool operator==(const PodRef&, const PodRef&) = default;
  friend std::strong_ordering operator<=>(const PodRef&, const PodRef&) = default;

 private:
  std::string uid_;
};

bool is_canonical_uid(std::string_view uid);

/// Lowercases and turns '_' into '-'. Throws InvalidArgument unless the
/// result is an 8-4-4-4-12 hex UUID.
std::string normalize_pod_uid(std::string_view raw);

/// Pod UID encoded in a cgroup path, or node scope when no segment matches
/// a kubepods layout. Accepts cgroupfs ("pod<uid>") and systemd
/// ("kubepods[-<qos>]-pod<uid_with_underscores>.slice") segments under any
/// prefix. Never throws.
PodRef parse_cgroup_path(std::string_view cgpath);

enum class CgroupStyle { kCgroupfs, kSystemd };
enum class QosClass { kGuaranteed, kBurstable, kBestEffort };

std::string_view to_string(CgroupStyle s);
std::optional<CgroupStyle> cgroup_style_from_string(std::string_view s);
std::string_view to_string(QosClass q);
std::optional<QosClass> qos_from_string(std::string_view s);

/// Kubelet-style cgroup path for a container of pod `uid`. `prefix` is
/// prepended verbatim (e.g. "/rancher/k3s" style orchestrator prefixes).
std::string cgroup_path_for(std::string_view uid, CgroupStyle style, QosClass qos, std::string_view container_id,
                            std::string_view prefix = {});

}  // namespace podseal::pod
