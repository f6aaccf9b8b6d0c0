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

// podseal: operator CLI and service launcher.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "podseal/agent.hpp"
#include "podseal/cluster_sim.hpp"
#include "podseal/crypto.hpp"
#include "podseal/error.hpp"
#include "podseal/registrar.hpp"
#include "podseal/verifier.hpp"
#include "podseal/wire.hpp"

using namespace podseal;

namespace {

struct Common {
  std::string verifier = "http://127.0.0.1:8881";
  std::string registrar = "http://127.0.0.1:8890";
  std::string token;
  std::string output = "table";
};

json check(const http::Response& res) {
  json body;
  try {
    body = json::parse(res.body);
  } catch (const json::exception&) {
    throw Error("HTTP " + std::to_string(res.status) + ": " + res.body);
  }
  if (!res.ok()) throw Error(body.value("error", "HTTP " + std::to_string(res.status)));
  return body;
}

// Blocks SIGINT/SIGTERM for every thread started afterwards and waits for
// one of them.
class SignalWait {
 public:
  SignalWait() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, nullptr);
  }
  void wait() {
    int sig = 0;
    sigwait(&set_, &sig);
  }

 private:
  sigset_t set_;
};

void announce(const std::string& what, const std::string& url) {
  std::cout << what << " listening on " << url << std::endl;
}

// --- status -------------------------------------------------------------

std::string violation_summary(const trust::TrustState& s) {
  std::string out;
  for (const auto& r : s.reasons) out += (out.empty() ? "" : ",") + r;
  for (const auto& v : s.violations) out += " " + std::string(policy::to_string(v.reason)) + ":" + v.path;
  return out.empty() ? "-" : out;
}

void print_table(const std::vector<verifier::AgentStatus>& agents) {
  std::cout << std::left << std::setw(14) << "AGENT" << std::setw(14) << "NAME" << std::setw(38) << "SCOPE"
            << std::setw(11) << "STATE" << "DETAILS\n";
  for (const auto& a : agents) {
    std::cout << std::setw(14) << a.agent_id << std::setw(14) << "-" << std::setw(38) << "node" << std::setw(11)
              << trust::to_string(a.trust.node_state.level) << violation_summary(a.trust.node_state) << '\n';
    for (const auto& [uid, st] : a.trust.pod_states) {
      auto it = a.pod_names.find(uid);
      std::cout << std::setw(14) << a.agent_id << std::setw(14) << (it == a.pod_names.end() ? "-" : it->second)
                << std::setw(38) << uid << std::setw(11) << trust::to_string(st.level) << violation_summary(st)
                << '\n';
    }
  }
}

int status_exit_code(const std::vector<verifier::AgentStatus>& agents) {
  bool untrusted = false, pending = false;
  auto visit = [&](const trust::TrustState& s) {
    untrusted |= s.level == trust::TrustLevel::kUntrusted;
    pending |= s.level == trust::TrustLevel::kStart;
  };
  for (const auto& a : agents) {
    visit(a.trust.node_state);
    for (const auto& [uid, st] : a.trust.pod_states) visit(st);
  }
  if (untrusted) return 2;
  return pending ? 3 : 0;
}

int cmd_status(const Common& c, const std::string& agent_id, bool all) {
  if (agent_id.empty() && !all) throw InvalidArgument("give an agent id or --all");
  http::Client cli(c.verifier, c.token);
  std::vector<verifier::AgentStatus> agents;
  if (!agent_id.empty()) {
    agents.push_back(check(cli.get("/v1/status/" + agent_id)).get<verifier::AgentStatus>());
  } else {
    agents = check(cli.get("/v1/status")).at("agents").get<std::vector<verifier::AgentStatus>>();
  }
  if (c.output == "structured")
    std::cout << json{{"agents", agents}}.dump() << '\n';
  else
    print_table(agents);
  return status_exit_code(agents);
}

// --- allowlists -----------------------------------------------------------

std::vector<ml::MeasurementEntry> fetch_log(const Common& c, const std::string& agent_url) {
  http::Client cli(agent_url, c.token);
  Bytes nonce = crypto::random_bytes(20);
  auto report = check(cli.get("/v1/quote?nonce=" + to_hex(nonce) + "&mask=" +
                              tpm::PcrMask::only(tpm::kImaPcr).hex() + "&offset=0"))
                    .get<IntegrityReport>();
  return report.entries;
}

std::vector<ml::MeasurementEntry> read_log(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ml::parse_ascii_entries(ss.str());
}

int cmd_allowlist(const Common& c, const std::string& ml_file, const std::string& agent_url,
                  const std::string& scope, bool bundle, const std::vector<std::string>& excludes,
                  const std::string& sim_url, const std::string& out_file) {
  if (ml_file.empty() == agent_url.empty()) throw InvalidArgument("give exactly one of --ml or --agent");
  auto entries = ml_file.empty() ? fetch_log(c, agent_url) : read_log(ml_file);
  json out;
  if (!bundle) {
    out = policy::build_allowlist_from_log(entries, pod::PodRef::parse(scope));
  } else {
    policy::PolicyBundle b;
    b.node_allowlist = policy::build_allowlist_from_log(entries, pod::PodRef::node());
    for (const auto& e : entries) {
      auto ref = policy::attribute(e);
      if (ref.is_pod()) b.registered_pods.insert(ref.uid());
    }
    for (const auto& uid : b.registered_pods)
      b.pod_allowlists[uid] = policy::build_allowlist_from_log(entries, pod::PodRef::pod(uid));
    for (const auto& spec : excludes) {
      // "<regex>" or "<regex>@<scope>"
      auto at = spec.rfind('@');
      auto rs = at == std::string::npos ? std::optional(policy::RuleScope::kAll)
                                        : policy::rule_scope_from_string(spec.substr(at + 1));
      if (!rs) throw InvalidArgument("bad exclude scope in '" + spec + "'");
      b.exclude_rules.push_back(policy::ExcludeRule::regex(at == std::string::npos ? spec : spec.substr(0, at), *rs));
    }
    if (!sim_url.empty()) {
      http::Client sim(sim_url, c.token);
      json pods = check(sim.get("/v1/pods"));
      for (const auto& p : pods.at("pods"))
        if (b.registered_pods.count(p.at("uid").get<std::string>()))
          b.pod_names[p.at("uid").get<std::string>()] = p.at("name").get<std::string>();
    }
    policy::validate(b);
    out = b;
  }
  std::string text = out.dump(2) + "\n";
  if (out_file.empty())
    std::cout << text;
  else
    write_file_atomic(out_file, text);
  return 0;
}

// --- services -------------------------------------------------------------

int serve_registrar(const Common& c, const std::string& host, int port, const std::string& store,
                    const std::string& admin_token) {
  SignalWait signals;
  auto registry = store.empty() ? std::make_unique<registrar::Registry>()
                                : std::make_unique<registrar::Registry>(store);
  registrar::RegistrarServer server(*registry, c.token, admin_token);
  server.start(host, port);
  announce("registrar", server.base_url());
  signals.wait();
  server.stop();
  return 0;
}

int serve_agent(const Common& c, const std::string& id, const std::string& host, int port,
                std::optional<std::uint64_t> seed, std::string advertise) {
  SignalWait signals;
  agent::Agent agent(id, seed);
  agent::AgentServer server(agent, c.token);
  server.start(host, port);
  if (advertise.empty()) advertise = server.base_url();
  http::Client reg(c.registrar, c.token);
  for (int attempt = 0;; ++attempt) {
    try {
      agent::register_agent(agent, reg, advertise);
      break;
    } catch (const Unreachable&) {
      if (attempt >= 50) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }
  announce("agent " + id, server.base_url());
  signals.wait();
  server.stop();
  return 0;
}

int serve_verifier(const Common& c, const std::string& host, int port, const std::string& webhook,
                   const std::string& audit_file, int interval_ms) {
  SignalWait signals;
  auto audit = audit_file.empty() ? std::make_shared<AuditLog>() : std::make_shared<AuditLog>(audit_file);
  verifier::RemediationDispatcher::Options ropts;
  if (!webhook.empty()) ropts.webhook_url = webhook;
  ropts.webhook_token = c.token;
  auto dispatcher = std::make_shared<verifier::RemediationDispatcher>(audit, ropts);
  verifier::VerifierOptions opts;
  opts.default_interval = verifier::Millis(interval_ms);
  auto directory = std::make_shared<verifier::RemoteDirectory>(registrar::RegistrarClient(c.registrar, c.token));
  std::string token = c.token;
  verifier::Verifier v(opts, directory,
                       [token](const IdentityRecord& r) {
                         return std::make_unique<verifier::HttpAgentChannel>(r.endpoint, token);
                       },
                       audit, dispatcher);
  verifier::VerifierServer server(v, c.token);
  server.start(host, port);
  announce("verifier", server.base_url());
  signals.wait();
  server.stop();
  v.stop();
  return 0;
}

int serve_sim(const Common& c, const std::string& host, int port, const std::string& topology_file,
              std::uint64_t seed, int mean_gap_ms, const std::string& event_log, const std::string& scenario_file) {
  SignalWait signals;
  auto topology = sim::load_topology(topology_file);
  std::map<std::string, std::shared_ptr<sim::EventSink>> sinks;
  for (const auto& n : topology.nodes) {
    if (n.agent_endpoint.empty()) throw InvalidArgument("node " + n.name + " has no agent_endpoint");
    sinks[n.name] = std::make_shared<sim::HttpSink>(n.agent_endpoint, c.token);
  }
  sim::SimOptions opts;
  opts.seed = seed;
  opts.mean_gap = std::chrono::milliseconds(mean_gap_ms);
  if (!event_log.empty()) opts.event_log = event_log;
  sim::Cluster cluster(std::move(topology), opts, std::move(sinks));
  cluster.start();
  sim::SimServer server(cluster, c.token);
  server.start(host, port);
  announce("sim", server.base_url());
  std::thread player;
  if (!scenario_file.empty())
    player = std::thread([&cluster, schedule = sim::load_scenarios(scenario_file)] { cluster.play(schedule); });
  signals.wait();
  cluster.stop();
  if (player.joinable()) player.join();
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"podseal: pod-aware continuous attestation"};
  app.require_subcommand(1);
  Common c;
  app.add_option("--verifier", c.verifier, "Verifier URL")->envname("PODSEAL_VERIFIER");
  app.add_option("--registrar", c.registrar, "Registrar URL")->envname("PODSEAL_REGISTRAR");
  app.add_option("--token", c.token, "Cluster bearer token")->envname("PODSEAL_TOKEN");
  app.add_option("--output", c.output, "Output format")
      ->check(CLI::IsMember({"table", "structured"}))
      ->envname("PODSEAL_OUTPUT");

  std::function<int()> run;

  auto* enroll = app.add_subcommand("enroll", "Enroll an agent with a policy bundle");
  std::string agent_id, bundle_file;
  int interval_ms = 0;
  enroll->add_option("agent", agent_id, "Agent id")->required();
  enroll->add_option("--bundle", bundle_file, "Policy bundle file")->required()->check(CLI::ExistingFile);
  enroll->add_option("--interval-ms", interval_ms, "Polling interval in milliseconds");
  enroll->callback([&] {
    run = [&] {
      json body{{"agent_id", agent_id}, {"bundle", policy::load_bundle(bundle_file)}};
      if (interval_ms > 0) body["interval_ms"] = interval_ms;
      auto st = check(http::Client(c.verifier, c.token).post("/v1/enroll", body.dump()));
      if (c.output == "structured")
        std::cout << st.dump() << '\n';
      else
        std::cout << "enrolled " << agent_id << '\n';
      return 0;
    };
  });

  auto* status = app.add_subcommand("status", "Show trust states");
  bool all = false;
  std::string status_agent;
  status->add_option("agent", status_agent, "Agent id");
  status->add_flag("--all", all, "All enrolled agents");
  status->callback([&] { run = [&] { return cmd_status(c, status_agent, all); }; });

  auto* reset = app.add_subcommand("reset", "Return a scope to Start");
  std::string reset_agent, reset_scope = "node";
  reset->add_option("agent", reset_agent, "Agent id")->required();
  reset->add_option("--scope", reset_scope, "\"node\" or a pod UID");
  reset->callback([&] {
    run = [&] {
      json body{{"agent_id", reset_agent}, {"scope", reset_scope}};
      check(http::Client(c.verifier, c.token).post("/v1/reset", body.dump()));
      std::cout << "reset " << reset_agent << " " << reset_scope << '\n';
      return 0;
    };
  });

  auto* allowlist = app.add_subcommand("allowlist", "Allowlist tools");
  allowlist->require_subcommand(1);
  auto* generate = allowlist->add_subcommand("generate", "Build an allowlist from a clean measurement list");
  std::string ml_file, agent_url, scope = "node", sim_url, out_file;
  bool as_bundle = false;
  std::vector<std::string> excludes;
  generate->add_option("--ml", ml_file, "ascii_runtime_measurements file")->check(CLI::ExistingFile);
  generate->add_option("--agent", agent_url, "Agent URL to fetch the log from");
  generate->add_option("--scope", scope, "\"node\" or a pod UID");
  generate->add_flag("--bundle", as_bundle, "Emit a full policy bundle covering every observed scope");
  generate->add_option("--exclude", excludes, "Exclude regex, optionally suffixed with @all|@node|@pods");
  generate->add_option("--sim", sim_url, "Simulator URL used to name pods in the bundle");
  generate->add_option("-o,--out", out_file, "Write to a file instead of stdout");
  generate->callback([&] {
    run = [&] { return cmd_allowlist(c, ml_file, agent_url, scope, as_bundle, excludes, sim_url, out_file); };
  });

  auto* inject = app.add_subcommand("inject", "Inject tamper scenarios into the simulator");
  std::string inject_sim = "http://127.0.0.1:8900", kind, inject_pod, inject_node, inject_path, scenario_file;
  inject->add_option("--sim", inject_sim, "Simulator URL")->envname("PODSEAL_SIM");
  inject->add_option("--kind", kind, "Scenario kind");
  inject->add_option("--pod", inject_pod, "Pod name");
  inject->add_option("--node", inject_node, "Node name");
  inject->add_option("--path", inject_path, "Binary or library path");
  inject->add_option("--scenario", scenario_file, "Scenario file (offsets are ignored)")->check(CLI::ExistingFile);
  inject->callback([&] {
    run = [&] {
      json body = json::array();
      if (!scenario_file.empty()) {
        for (const auto& s : sim::load_scenarios(scenario_file)) body.push_back(s.scenario);
      } else {
        body.push_back(json{{"kind", kind}, {"pod", inject_pod}, {"node", inject_node}, {"path", inject_path}}
                           .get<sim::TamperScenario>());
      }
      check(http::Client(inject_sim, c.token).post("/v1/inject", body.dump()));
      std::cout << "injected " << body.size() << " scenario(s)\n";
      return 0;
    };
  });

  auto* serve = app.add_subcommand("serve", "Run a service");
  serve->require_subcommand(1);
  std::string host = "127.0.0.1";
  int port = 0;
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port (0 picks one)");

  auto* s_registrar = serve->add_subcommand("registrar", "Identity registrar");
  std::string store, admin_token;
  s_registrar->add_option("--store", store, "Registry file");
  s_registrar->add_option("--admin-token", admin_token, "Token for DELETE")->envname("PODSEAL_ADMIN_TOKEN");
  s_registrar->callback([&] { run = [&] { return serve_registrar(c, host, port, store, admin_token); }; });

  auto* s_agent = serve->add_subcommand("agent", "Node attestation agent");
  std::string id, advertise;
  std::uint64_t seed_value = 0;
  auto* seed_opt = s_agent->add_option("--seed", seed_value, "Deterministic TPM seed");
  s_agent->add_option("--id", id, "Agent id")->required();
  s_agent->add_option("--advertise", advertise, "Endpoint registered for the verifier");
  s_agent->callback([&] {
    run = [&] {
      std::optional<std::uint64_t> seed;
      if (seed_opt->count()) seed = seed_value;
      return serve_agent(c, id, host, port, seed, advertise);
    };
  });

  auto* s_verifier = serve->add_subcommand("verifier", "Continuous verifier");
  std::string webhook, audit_file;
  int default_interval = 2000;
  s_verifier->add_option("--webhook", webhook, "Remediation webhook URL");
  s_verifier->add_option("--audit", audit_file, "Audit log file (JSON lines)");
  s_verifier->add_option("--interval-ms", default_interval, "Default polling interval");
  s_verifier->callback(
      [&] { run = [&] { return serve_verifier(c, host, port, webhook, audit_file, default_interval); }; });

  auto* s_sim = serve->add_subcommand("sim", "Cluster simulator");
  std::string topology_file, event_log, sim_scenarios;
  std::uint64_t sim_seed = 1;
  int mean_gap = 200;
  s_sim->add_option("--topology", topology_file, "Topology file")->required()->check(CLI::ExistingFile);
  s_sim->add_option("--seed", sim_seed, "Simulation seed");
  s_sim->add_option("--mean-gap-ms", mean_gap, "Mean gap between workload events");
  s_sim->add_option("--event-log", event_log, "Event log file");
  s_sim->add_option("--scenario", sim_scenarios, "Scenario schedule to play")->check(CLI::ExistingFile);
  s_sim->callback([&] {
    run = [&] { return serve_sim(c, host, port, topology_file, sim_seed, mean_gap, event_log, sim_scenarios); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    return run();
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
}
