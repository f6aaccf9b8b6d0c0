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
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "podseal/agent.hpp"
#include "podseal/audit.hpp"
#include "podseal/http.hpp"
#include "podseal/pod_attribution.hpp"
#include "podseal/wire.hpp"

namespace podseal::sim {

using Manifest = std::map<std::string, Digest>;  // path -> digest

struct PodSpec {
  std::string name;
  Manifest manifest;
  pod::CgroupStyle cgroup_style = pod::CgroupStyle::kSystemd;
  pod::QosClass qos = pod::QosClass::kBestEffort;
};

struct NodeSpec {
  std::string name;
  std::string agent_endpoint;  // used by HTTP delivery
  Manifest host_binaries;
  std::vector<PodSpec> pods;
};

struct Topology {
  std::vector<NodeSpec> nodes;

  const NodeSpec* node(const std::string& name) const;
};

/// Throws InvalidArgument on duplicate node or pod names.
void validate(const Topology& topology);
Topology load_topology(const std::filesystem::path& path);

enum class ScenarioKind { kExecUnlisted, kOverwriteHostBinary, kPreloadHijack, kUnknownPod, kModifyPodBinary };

std::string_view to_string(ScenarioKind k);
std::optional<ScenarioKind> scenario_kind_from_string(std::string_view s);

struct TamperScenario {
  ScenarioKind kind = ScenarioKind::kExecUnlisted;
  std::string pod;   // pod name (exec-unlisted, preload-hijack, modify-pod-binary)
  std::string node;  // node name (overwrite-host-binary, unknown-pod)
  std::string path;  // binary or library path

  static TamperScenario exec_unlisted(std::string pod, std::string path) {
    return {ScenarioKind::kExecUnlisted, std::move(pod), {}, std::move(path)};
  }
  static TamperScenario overwrite_host_binary(std::string node, std::string path) {
    return {ScenarioKind::kOverwriteHostBinary, {}, std::move(node), std::move(path)};
  }
  static TamperScenario preload_hijack(std::string pod, std::string library) {
    return {ScenarioKind::kPreloadHijack, std::move(pod), {}, std::move(library)};
  }
  static TamperScenario unknown_pod(std::string node) { return {ScenarioKind::kUnknownPod, {}, std::move(node), {}}; }
  static TamperScenario modify_pod_binary(std::string pod, std::string path) {
    return {ScenarioKind::kModifyPodBinary, std::move(pod), {}, std::move(path)};
  }
};

struct ScheduledScenario {
  std::chrono::milliseconds at{0};
  TamperScenario scenario;
};

std::vector<ScheduledScenario> load_scenarios(const std::filesystem::path& path);

void to_json(json& j, const PodSpec& p);
void from_json(const json& j, PodSpec& p);
void to_json(json& j, const NodeSpec& n);
void from_json(const json& j, NodeSpec& n);
void to_json(json& j, const Topology& t);
void from_json(const json& j, Topology& t);
void to_json(json& j, const TamperScenario& s);
void from_json(const json& j, TamperScenario& s);

/// Receives one node's events in order.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void deliver(const ml::FileEvent& event) = 0;
};

class AgentSink : public EventSink {
 public:
  explicit AgentSink(agent::Agent& agent) : agent_(agent) {}
  void deliver(const ml::FileEvent& event) override { agent_.ingest_event(event); }

 private:
  agent::Agent& agent_;
};

class HttpSink : public EventSink {
 public:
  HttpSink(std::string endpoint, std::string token);
  void deliver(const ml::FileEvent& event) override;

 private:
  http::Client client_;
};

struct PodInstance {
  std::string name;
  std::string node;
  std::string uid;
  std::string container_id;
  std::string cgpath;
  Manifest manifest;
  bool registered = true;  // false for pods injected by unknown-pod
  bool running = true;
};

struct SimEvent {
  std::uint64_t seq = 0;
  std::string kind;  // "exec", "terminate" or "start"
  std::string node;
  std::string pod;  // pod name; empty for host processes
  std::string uid;
  ml::FileEvent event;
};

void to_json(json& j, const PodInstance& p);
void to_json(json& j, const SimEvent& e);

struct Restart {
  std::string pod;
  std::string old_uid;
  std::string new_uid;
};

struct SimOptions {
  std::uint64_t seed = 1;
  std::chrono::milliseconds mean_gap{200};
  bool background = true;
  std::optional<std::filesystem::path> event_log;
};

/// Simulated cluster: pods are event generators feeding each node's agent
/// through one serialized stream per node.
class Cluster {
 public:
  Cluster(Topology topology, SimOptions options, std::map<std::string, std::shared_ptr<EventSink>> sinks);
  ~Cluster();

  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  /// Emits host binaries and every pod manifest, then starts the
  /// background workload if enabled.
  void start();
  void stop();

  /// Throws InvalidArgument for an unknown pod or node.
  void inject(const TamperScenario& scenario);
  /// Plays a schedule relative to now; blocks until the last entry.
  void play(const std::vector<ScheduledScenario>& schedule);

  /// Evict-restart terminates the pod and starts it again under a fresh
  /// UID. Returns the restart, or nullopt when nothing changed.
  std::optional<Restart> handle_remediation(const RemediationEvent& event);

  /// Emits `count` background exec events now.
  void step(std::size_t count);

  std::vector<PodInstance> pods() const;
  std::optional<PodInstance> pod(const std::string& name) const;
  std::vector<SimEvent> events(std::uint64_t since = 0) const;
  std::vector<Restart> restarts() const;
  const Topology& topology() const { return topology_; }

 private:
  struct NodeStream {
    std::mutex mu;  // serializes delivery to this node's agent
    std::shared_ptr<EventSink> sink;
  };

  std::string fresh_uid();
  std::string fresh_container_id();
  PodInstance make_pod(const PodSpec& spec, const std::string& node, bool registered);
  void emit(const std::string& node, const std::string& pod, const std::string& uid, const std::string& kind,
            ml::FileEvent event);
  void emit_exec(const PodInstance& p, const std::string& path, const Digest& digest);
  void launch(const PodInstance& p);
  void background_loop();
  PodInstance& running_pod(const std::string& name);

  Topology topology_;
  SimOptions options_;
  std::map<std::string, std::unique_ptr<NodeStream>> streams_;

  mutable std::mutex mu_;  // pods_, events_, restarts_, rng state
  std::vector<PodInstance> pods_;
  std::vector<SimEvent> events_;
  std::vector<Restart> restarts_;
  std::mt19937_64 uid_rng_;
  std::mt19937_64 work_rng_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t tamper_counter_ = 0;
  std::uint64_t unknown_counter_ = 0;
  std::set<std::string> used_uids_;

  std::mutex bg_mu_;
  std::condition_variable bg_cv_;
  bool stopping_ = false;
  std::thread background_;
  std::atomic<std::uint64_t> delivery_failures_{0};
};

/// POST /v1/remediate, POST /v1/inject, GET /v1/pods, GET /v1/events,
/// GET /v1/restarts.
class SimServer {
 public:
  SimServer(Cluster& cluster, std::string token);

  int start(const std::string& host = "127.0.0.1", int port = 0) { return server_.start(host, port); }
  void stop() { server_.stop(); }
  std::string base_url() const { return server_.base_url(); }

 private:
  Cluster& cluster_;
  http::Server server_;
};

/// Host processes run in a non-pod cgroup.
inline constexpr std::string_view kHostCgroup = "/system.slice/kubelet.service";

}  // namespace podseal::sim
