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

#include "podseal/cluster_sim.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <set>

#include "podseal/error.hpp"

namespace podseal::sim {

const NodeSpec* Topology::node(const std::string& name) const {
  for (const auto& n : nodes)
    if (n.name == name) return &n;
  return nullptr;
}

void validate(const Topology& topology) {
  std::set<std::string> nodes, pods;
  for (const auto& n : topology.nodes) {
    if (n.name.empty()) throw InvalidArgument("node without a name");
    if (!nodes.insert(n.name).second) throw InvalidArgument("duplicate node name " + n.name);
    for (const auto& p : n.pods) {
      if (p.name.empty()) throw InvalidArgument("pod without a name on node " + n.name);
      if (!pods.insert(p.name).second) throw InvalidArgument("duplicate pod name " + p.name);
    }
  }
}

Topology load_topology(const std::filesystem::path& path) {
  auto t = read_json_file(path).get<Topology>();
  validate(t);
  return t;
}

namespace {

constexpr std::pair<ScenarioKind, std::string_view> kKindNames[] = {
    {ScenarioKind::kExecUnlisted, "exec-unlisted"},
    {ScenarioKind::kOverwriteHostBinary, "overwrite-host-binary"},
    {ScenarioKind::kPreloadHijack, "preload-hijack"},
    {ScenarioKind::kUnknownPod, "unknown-pod"},
    {ScenarioKind::kModifyPodBinary, "modify-pod-binary"},
};

void manifest_to_json(json& j, const Manifest& m) {
  j = json::object();
  for (const auto& [path, d] : m) j[path] = d;
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  for (const auto& [path, d] : j.items()) m[path] = d.get<Digest>();
  return m;
}

}  // namespace

std::string_view to_string(ScenarioKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

std::optional<ScenarioKind> scenario_kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kKindNames)
    if (name == s) return kind;
  return std::nullopt;
}

void to_json(json& j, const PodSpec& p) {
  json m;
  manifest_to_json(m, p.manifest);
  j = json{{"name", p.name},
           {"manifest", m},
           {"cgroup_style", pod::to_string(p.cgroup_style)},
           {"qos", pod::to_string(p.qos)}};
}

void from_json(const json& j, PodSpec& p) {
  p = PodSpec();
  p.name = j.at("name").get<std::string>();
  if (j.contains("manifest")) p.manifest = manifest_from_json(j["manifest"]);
  if (j.contains("cgroup_style")) {
    auto s = pod::cgroup_style_from_string(j["cgroup_style"].get<std::string>());
    if (!s) throw InvalidArgument("pod " + p.name + ": unknown cgroup style");
    p.cgroup_style = *s;
  }
  if (j.contains("qos")) {
    auto q = pod::qos_from_string(j["qos"].get<std::string>());
    if (!q) throw InvalidArgument("pod " + p.name + ": unknown QoS class");
    p.qos = *q;
  }
}

void to_json(json& j, const NodeSpec& n) {
  json hb;
  manifest_to_json(hb, n.host_binaries);
  j = json{{"name", n.name}, {"agent_endpoint", n.agent_endpoint}, {"host_binaries", hb}, {"pods", n.pods}};
}

void from_json(const json& j, NodeSpec& n) {
  n = NodeSpec();
  n.name = j.at("name").get<std::string>();
  n.agent_endpoint = j.value("agent_endpoint", "");
  if (j.contains("host_binaries")) n.host_binaries = manifest_from_json(j["host_binaries"]);
  if (j.contains("pods")) n.pods = j["pods"].get<std::vector<PodSpec>>();
}

void to_json(json& j, const Topology& t) { j = json{{"nodes", t.nodes}}; }

void from_json(const json& j, Topology& t) {
  t = Topology();
  if (j.contains("nodes")) t.nodes = j["nodes"].get<std::vector<NodeSpec>>();
}

void to_json(json& j, const TamperScenario& s) {
  j = json{{"kind", to_string(s.kind)}};
  if (!s.pod.empty()) j["pod"] = s.pod;
  if (!s.node.empty()) j["node"] = s.node;
  if (!s.path.empty()) j["path"] = s.path;
}

void from_json(const json& j, TamperScenario& s) {
  auto kind = scenario_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw InvalidArgument("unknown scenario kind '" + j["kind"].get<std::string>() + "'");
  s.kind = *kind;
  s.pod = j.value("pod", "");
  s.node = j.value("node", "");
  s.path = j.value("path", "");
  bool needs_pod = s.kind == ScenarioKind::kExecUnlisted || s.kind == ScenarioKind::kPreloadHijack ||
                   s.kind == ScenarioKind::kModifyPodBinary;
  if (needs_pod && s.pod.empty()) throw InvalidArgument(std::string(to_string(s.kind)) + " needs a pod");
  if (!needs_pod && s.node.empty()) throw InvalidArgument(std::string(to_string(s.kind)) + " needs a node");
  if (s.kind != ScenarioKind::kUnknownPod && s.path.empty())
    throw InvalidArgument(std::string(to_string(s.kind)) + " needs a path");
}

std::vector<ScheduledScenario> load_scenarios(const std::filesystem::path& path) {
  std::vector<ScheduledScenario> out;
  for (const auto& item : read_json_file(path)) {
    ScheduledScenario s;
    s.at = std::chrono::milliseconds(item.value("at_ms", std::int64_t{0}));
    s.scenario = item.get<TamperScenario>();
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  return out;
}

void to_json(json& j, const PodInstance& p) {
  j = json{{"name", p.name},       {"node", p.node},         {"uid", p.uid}, {"container_id", p.container_id},
           {"cgpath", p.cgpath},   {"registered", p.registered}, {"running", p.running}};
}

void to_json(json& j, const SimEvent& e) {
  j = json{{"seq", e.seq}, {"kind", e.kind}, {"node", e.node}, {"pod", e.pod}, {"uid", e.uid}};
  if (e.kind == "exec") j["event"] = e.event;
}

HttpSink::HttpSink(std::string endpoint, std::string token) : client_(std::move(endpoint), std::move(token)) {}

void HttpSink::deliver(const ml::FileEvent& event) {
  auto res = client_.post("/v1/events", json(event).dump());
  if (!res.ok()) throw Error("agent " + client_.base_url() + " refused event: HTTP " + std::to_string(res.status));
}

Cluster::Cluster(Topology topology, SimOptions options, std::map<std::string, std::shared_ptr<EventSink>> sinks)
    : topology_(std::move(topology)), options_(std::move(options)), uid_rng_(options_.seed),
      work_rng_(options_.seed ^ 0x9e3779b97f4a7c15ULL) {
  validate(topology_);
  for (const auto& n : topology_.nodes) {
    auto it = sinks.find(n.name);
    if (it == sinks.end() || !it->second) throw InvalidArgument("no event sink for node " + n.name);
    auto stream = std::make_unique<NodeStream>();
    stream->sink = it->second;
    streams_[n.name] = std::move(stream);
  }
  if (options_.event_log) std::ofstream(*options_.event_log, std::ios::trunc);
}

Cluster::~Cluster() { stop(); }

std::string Cluster::fresh_uid() {
  while (true) {
    std::array<std::uint8_t, 16> b;
    for (std::size_t i = 0; i < b.size(); i += 8) {
      auto v = uid_rng_();
      for (std::size_t k = 0; k < 8; ++k) b[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
    }
    b[6] = static_cast<std::uint8_t>((b[6] & 0x0f) | 0x40);
    b[8] = static_cast<std::uint8_t>((b[8] & 0x3f) | 0x80);
    std::string hex = to_hex(b);
    std::string uid = hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" +
                      hex.substr(16, 4) + "-" + hex.substr(20);
    if (used_uids_.insert(uid).second) return uid;
  }
}

std::string Cluster::fresh_container_id() {
  std::string id;
  for (int i = 0; i < 4; ++i) {
    auto v = uid_rng_();
    std::array<std::uint8_t, 8> b;
    for (std::size_t k = 0; k < 8; ++k) b[k] = static_cast<std::uint8_t>(v >> (8 * k));
    id += to_hex(b);
  }
  return id;
}

PodInstance Cluster::make_pod(const PodSpec& spec, const std::string& node, bool registered) {
  PodInstance p;
  p.name = spec.name;
  p.node = node;
  p.uid = fresh_uid();
  p.container_id = fresh_container_id();
  p.cgpath = pod::cgroup_path_for(p.uid, spec.cgroup_style, spec.qos, p.container_id);
  p.manifest = spec.manifest;
  p.registered = registered;
  return p;
}

void Cluster::emit(const std::string& node, const std::string& pod, const std::string& uid, const std::string& kind,
                   ml::FileEvent event) {
  // Caller holds the node stream lock.
  SimEvent se;
  {
    std::lock_guard lock(mu_);
    if (!uid.empty() && kind == "exec") {
      bool running = false;
      for (const auto& p : pods_)
        if (p.uid == uid) running = p.running;
      if (!running) return;
    }
    se.seq = next_seq_++;
    se.kind = kind;
    se.node = node;
    se.pod = pod;
    se.uid = uid;
    event.timestamp = se.seq;
    se.event = event;
    events_.push_back(se);
    if (options_.event_log) std::ofstream(*options_.event_log, std::ios::app) << json(se).dump() << '\n';
  }
  if (kind == "exec") streams_.at(node)->sink->deliver(event);
}

void Cluster::emit_exec(const PodInstance& p, const std::string& path, const Digest& digest) {
  std::lock_guard lock(streams_.at(p.node)->mu);
  emit(p.node, p.name, p.uid, "exec", ml::FileEvent{path, digest, p.cgpath, 0});
}

void Cluster::launch(const PodInstance& p) {
  {
    std::lock_guard lock(streams_.at(p.node)->mu);
    emit(p.node, p.name, p.uid, "start", {});
  }
  for (const auto& [path, digest] : p.manifest) emit_exec(p, path, digest);
}

void Cluster::start() {
  std::vector<PodInstance> launched;
  {
    std::lock_guard lock(mu_);
    if (!pods_.empty()) throw Error("cluster already started");
    for (const auto& n : topology_.nodes)
      for (const auto& spec : n.pods) pods_.push_back(make_pod(spec, n.name, true));
    launched = pods_;
  }
  for (const auto& n : topology_.nodes) {
    std::lock_guard lock(streams_.at(n.name)->mu);
    for (const auto& [path, digest] : n.host_binaries)
      emit(n.name, {}, {}, "exec", ml::FileEvent{path, digest, std::string(kHostCgroup), 0});
  }
  for (const auto& p : launched) launch(p);
  if (options_.background) {
    std::lock_guard lock(bg_mu_);
    stopping_ = false;
    background_ = std::thread([this] { background_loop(); });
  }
}

void Cluster::stop() {
  {
    std::lock_guard lock(bg_mu_);
    stopping_ = true;
  }
  bg_cv_.notify_all();
  if (background_.joinable()) background_.join();
}

void Cluster::background_loop() {
  while (true) {
    std::chrono::milliseconds gap;
    {
      std::lock_guard lock(mu_);
      std::uniform_real_distribution<double> jitter(0.5, 1.5);
      gap = std::chrono::milliseconds(static_cast<std::int64_t>(options_.mean_gap.count() * jitter(work_rng_)));
    }
    {
      std::unique_lock lock(bg_mu_);
      if (bg_cv_.wait_for(lock, gap, [this] { return stopping_; })) return;
    }
    try {
      step(1);
    } catch (const std::exception&) {
      ++delivery_failures_;
    }
  }
}

void Cluster::step(std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    std::optional<PodInstance> target;
    const NodeSpec* host = nullptr;
    std::string path;
    Digest digest;
    {
      std::lock_guard lock(mu_);
      std::vector<const PodInstance*> running;
      for (const auto& p : pods_)
        if (p.running && !p.manifest.empty()) running.push_back(&p);
      std::vector<const NodeSpec*> hosts;
      for (const auto& n : topology_.nodes)
        if (!n.host_binaries.empty()) hosts.push_back(&n);
      std::size_t total = running.size() + hosts.size();
      if (total == 0) return;
      std::size_t pick = std::uniform_int_distribution<std::size_t>(0, total - 1)(work_rng_);
      const Manifest* m;
      if (pick < running.size()) {
        target = *running[pick];
        m = &target->manifest;
      } else {
        host = hosts[pick - running.size()];
        m = &host->host_binaries;
      }
      auto it = m->begin();
      std::advance(it, std::uniform_int_distribution<std::size_t>(0, m->size() - 1)(work_rng_));
      path = it->first;
      digest = it->second;
    }
    if (target) {
      emit_exec(*target, path, digest);
    } else {
      std::lock_guard lock(streams_.at(host->name)->mu);
      emit(host->name, {}, {}, "exec", ml::FileEvent{path, digest, std::string(kHostCgroup), 0});
    }
  }
}

PodInstance& Cluster::running_pod(const std::string& name) {
  for (auto& p : pods_)
    if (p.name == name && p.running) return p;
  throw InvalidArgument("no running pod named " + name);
}

void Cluster::inject(const TamperScenario& s) {
  auto tamper_digest = [this](const std::string& path) {
    std::lock_guard lock(mu_);
    return sha256("tamper:" + std::to_string(++tamper_counter_) + ":" + path);
  };
  switch (s.kind) {
    case ScenarioKind::kExecUnlisted:
    case ScenarioKind::kModifyPodBinary: {
      PodInstance p;
      {
        std::lock_guard lock(mu_);
        p = running_pod(s.pod);
      }
      emit_exec(p, s.path, tamper_digest(s.path));
      break;
    }
    case ScenarioKind::kPreloadHijack: {
      PodInstance p;
      {
        std::lock_guard lock(mu_);
        p = running_pod(s.pod);
      }
      emit_exec(p, s.path, tamper_digest(s.path));
      emit_exec(p, "/etc/ld.so.preload", tamper_digest("/etc/ld.so.preload"));
      break;
    }
    case ScenarioKind::kOverwriteHostBinary: {
      if (!topology_.node(s.node)) throw InvalidArgument("unknown node " + s.node);
      auto digest = tamper_digest(s.path);
      std::lock_guard lock(streams_.at(s.node)->mu);
      emit(s.node, {}, {}, "exec", ml::FileEvent{s.path, digest, std::string(kHostCgroup), 0});
      break;
    }
    case ScenarioKind::kUnknownPod: {
      if (!topology_.node(s.node)) throw InvalidArgument("unknown node " + s.node);
      PodInstance p;
      {
        std::lock_guard lock(mu_);
        PodSpec spec;
        spec.name = "unregistered-" + std::to_string(++unknown_counter_);
        spec.manifest = {{"/bin/sh", sha256(std::string_view("unregistered:/bin/sh"))},
                         {"/usr/local/bin/payload", sha256("unregistered:payload:" + spec.name)}};
        p = make_pod(spec, s.node, false);
        pods_.push_back(p);
      }
      launch(p);
      break;
    }
  }
}

void Cluster::play(const std::vector<ScheduledScenario>& schedule) {
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& item : schedule) {
    {
      std::unique_lock lock(bg_mu_);
      if (bg_cv_.wait_until(lock, t0 + item.at, [this] { return stopping_; })) return;
    }
    inject(item.scenario);
  }
}

std::optional<Restart> Cluster::handle_remediation(const RemediationEvent& event) {
  if (event.action != policy::RemediationAction::kEvictRestart || !event.scope.is_pod()) return std::nullopt;
  std::string node;
  {
    std::lock_guard lock(mu_);
    for (const auto& p : pods_)
      if (p.uid == event.scope.uid() && p.running) node = p.node;
  }
  if (node.empty()) return std::nullopt;

  Restart r;
  PodInstance fresh;
  {
    std::lock_guard stream_lock(streams_.at(node)->mu);
    {
      std::lock_guard lock(mu_);
      auto it = std::find_if(pods_.begin(), pods_.end(),
                             [&](const PodInstance& p) { return p.uid == event.scope.uid() && p.running; });
      if (it == pods_.end()) return std::nullopt;
      it->running = false;
      const NodeSpec* spec_node = topology_.node(node);
      PodSpec spec{it->name, it->manifest, pod::CgroupStyle::kSystemd, pod::QosClass::kBestEffort};
      if (spec_node)
        for (const auto& ps : spec_node->pods)
          if (ps.name == it->name) spec = ps;
      r = {it->name, it->uid, {}};
      fresh = make_pod(spec, node, it->registered);
      r.new_uid = fresh.uid;
    }
    emit(node, r.pod, r.old_uid, "terminate", {});
    {
      std::lock_guard lock(mu_);
      pods_.push_back(fresh);
      restarts_.push_back(r);
    }
  }
  launch(fresh);
  return r;
}

std::vector<PodInstance> Cluster::pods() const {
  std::lock_guard lock(mu_);
  return pods_;
}

std::optional<PodInstance> Cluster::pod(const std::string& name) const {
  std::lock_guard lock(mu_);
  for (const auto& p : pods_)
    if (p.name == name && p.running) return p;
  return std::nullopt;
}

std::vector<SimEvent> Cluster::events(std::uint64_t since) const {
  std::lock_guard lock(mu_);
  std::vector<SimEvent> out;
  for (const auto& e : events_)
    if (e.seq >= since) out.push_back(e);
  return out;
}

std::vector<Restart> Cluster::restarts() const {
  std::lock_guard lock(mu_);
  return restarts_;
}

SimServer::SimServer(Cluster& cluster, std::string token) : cluster_(cluster), server_(std::move(token)) {
  server_.route("POST", "/v1/remediate", [this](const http::Request& req) {
    auto restart = cluster_.handle_remediation(json::parse(req.body).get<RemediationEvent>());
    json out{{"restarted", restart.has_value()}};
    if (restart) {
      out["pod"] = restart->pod;
      out["old_uid"] = restart->old_uid;
      out["new_uid"] = restart->new_uid;
    }
    return http::Response{200, out.dump()};
  });
  server_.route("POST", "/v1/inject", [this](const http::Request& req) {
    auto body = json::parse(req.body);
    if (body.is_array()) {
      for (const auto& s : body) cluster_.inject(s.get<TamperScenario>());
    } else {
      cluster_.inject(body.get<TamperScenario>());
    }
    return http::Response{200, json{{"status", "injected"}}.dump()};
  });
  server_.route("GET", "/v1/pods", [this](const http::Request&) {
    return http::Response{200, json{{"pods", cluster_.pods()}}.dump()};
  });
  server_.route("GET", "/v1/events", [this](const http::Request& req) {
    std::uint64_t since = 0;
    if (auto it = req.params.find("since"); it != req.params.end()) {
      const auto& v = it->second;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), since);
      if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgument("invalid since");
    }
    return http::Response{200, json{{"events", cluster_.events(since)}}.dump()};
  });
  server_.route("GET", "/v1/restarts", [this](const http::Request&) {
    json out = json::array();
    for (const auto& r : cluster_.restarts())
      out.push_back({{"pod", r.pod}, {"old_uid", r.old_uid}, {"new_uid", r.new_uid}});
    return http::Response{200, json{{"restarts", out}}.dump()};
  });
}

}  // namespace podseal::sim
