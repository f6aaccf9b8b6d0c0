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

#include "podseal/verifier.hpp"

#include <charconv>
#include <iostream>

#include "podseal/agent.hpp"
#include "podseal/error.hpp"

namespace podseal::verifier {

HttpAgentChannel::HttpAgentChannel(std::string endpoint, std::string token, Millis timeout)
    : client_(std::move(endpoint), std::move(token), timeout) {}

IntegrityReport HttpAgentChannel::request_report(ByteView nonce, tpm::PcrMask mask, std::size_t offset) {
  auto res = client_.get("/v1/quote?nonce=" + to_hex(nonce) + "&mask=" + mask.hex() +
                         "&offset=" + std::to_string(offset));
  if (res.status == 409) throw agent::OffsetOutOfRange(res.body);
  if (!res.ok()) throw Unreachable("agent " + client_.base_url() + " answered HTTP " + std::to_string(res.status));
  try {
    return json::parse(res.body).get<IntegrityReport>();
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("malformed integrity report: ") + e.what());
  }
}

struct Verifier::Session {
  std::string agent_id;
  IdentityRecord identity;
  std::unique_ptr<AgentChannel> channel;
  std::shared_ptr<const policy::CompiledPolicy> policy;
  Millis interval{0};

  std::mutex cycle_mu;  // one cycle at a time

  mutable std::mutex state_mu;
  Digest running_pcr;
  std::size_t verified_count = 0;
  std::set<std::string> observed_pods;
  std::set<std::tuple<pod::PodRef, std::string, std::optional<Digest>, policy::ViolationReason>> reported;
  std::optional<std::size_t> retired_horizon;
  trust::TrustMap trust;
  std::optional<CycleOutcome> last_outcome;
  std::string last_detail;
  trust::Timestamp last_cycle = 0;
  std::uint64_t cycles = 0;
  int misses = 0;

  std::mutex poll_mu;
  std::condition_variable poll_cv;
  bool stopping = false;
  std::thread poller;

  AgentStatus status() const {
    std::lock_guard lock(state_mu);
    AgentStatus st;
    st.agent_id = agent_id;
    st.trust = trust;
    st.pod_names = policy->bundle().pod_names;
    st.verified_count = verified_count;
    st.running_pcr = running_pcr;
    st.last_outcome = last_outcome;
    st.last_detail = last_detail;
    st.last_cycle = last_cycle;
    st.cycles = cycles;
    st.consecutive_misses = misses;
    st.interval = interval;
    return st;
  }

  void halt() {
    {
      std::lock_guard lock(poll_mu);
      stopping = true;
    }
    poll_cv.notify_all();
    if (poller.joinable() && poller.get_id() != std::this_thread::get_id()) poller.join();
  }
};

Verifier::Verifier(VerifierOptions options, std::shared_ptr<IdentityDirectory> directory, ChannelFactory channels,
                   std::shared_ptr<AuditLog> audit, std::shared_ptr<RemediationDispatcher> remediation)
    : options_(options),
      directory_(std::move(directory)),
      channels_(std::move(channels)),
      audit_(std::move(audit)),
      remediation_(std::move(remediation)) {
  if (!directory_ || !channels_ || !audit_) throw InvalidArgument("verifier needs a directory, channels and audit log");
  if (options_.nonce_size < 16 || options_.nonce_size > tpm::kMaxNonce)
    throw InvalidArgument("nonce size must be within 16..64 bytes");
  if (options_.unreachable_grace < 1) throw InvalidArgument("unreachable grace must be at least 1");
}

Verifier::~Verifier() { stop(); }

void Verifier::stop() {
  std::map<std::string, std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mu_);
    sessions.swap(sessions_);
  }
  for (auto& [id, s] : sessions) s->halt();
}

void Verifier::enroll(const std::string& agent_id, policy::PolicyBundle bundle, std::optional<Millis> interval,
                      bool poll) {
  Millis every = interval.value_or(options_.default_interval);
  if (every.count() <= 0) throw InvalidArgument("polling interval must be positive");
  auto identity = directory_->lookup(agent_id);
  if (!identity) throw NotFound("agent " + agent_id + " is not registered");
  if (!tpm::verify_ek_certificate(identity->ek) ||
      !tpm::verify_ak_certificate(identity->ak_cert, identity->ek.ek_public))
    throw Error("registrar record for " + agent_id + " has an AK certificate that does not verify");

  auto s = std::make_shared<Session>();
  s->agent_id = agent_id;
  s->policy = policy::compile_policy(std::move(bundle));
  s->identity = std::move(*identity);
  s->channel = channels_(s->identity);
  s->interval = every;
  s->trust = trust::TrustMap::initial(s->policy->bundle(), trust::now_ms());

  std::shared_ptr<Session> previous;
  {
    std::lock_guard lock(mu_);
    auto& slot = sessions_[agent_id];
    previous = std::move(slot);
    slot = s;
  }
  if (previous) previous->halt();
  if (poll) s->poller = std::thread([this, s] { poll_loop(s); });
}

void Verifier::unenroll(const std::string& agent_id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(agent_id);
    if (it == sessions_.end()) throw NotFound("agent " + agent_id + " is not enrolled");
    s = std::move(it->second);
    sessions_.erase(it);
  }
  s->halt();
}

std::shared_ptr<Verifier::Session> Verifier::session(const std::string& agent_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(agent_id);
  if (it == sessions_.end()) throw NotFound("agent " + agent_id + " is not enrolled");
  return it->second;
}

void Verifier::poll_loop(std::shared_ptr<Session> s) {
  while (true) {
    try {
      run_cycle(*s);
    } catch (const std::exception& e) {
      std::cerr << "verifier: cycle for " << s->agent_id << " failed: " << e.what() << '\n';
    }
    std::unique_lock lock(s->poll_mu);
    if (s->poll_cv.wait_for(lock, s->interval, [&] { return s->stopping; })) return;
  }
}

AuditRecord Verifier::attest_now(const std::string& agent_id) { return run_cycle(*session(agent_id)); }

namespace {

std::vector<policy::Violation> all_violations(const policy::EvaluationResult& eval) {
  std::vector<policy::Violation> out = eval.node_violations;
  for (const auto& [uid, vs] : eval.pod_violations) out.insert(out.end(), vs.begin(), vs.end());
  out.insert(out.end(), eval.unknown_pod_violations.begin(), eval.unknown_pod_violations.end());
  return out;
}

std::string summarize(const trust::TrustState& state) {
  std::string out;
  for (const auto& r : state.reasons) out += (out.empty() ? "" : ", ") + r;
  if (!state.violations.empty()) {
    out += ":";
    for (const auto& v : state.violations) out += " " + v.path;
  }
  return out;
}

Digest composite_of(const std::map<std::size_t, Digest>& values, tpm::PcrMask mask) {
  Bytes concat;
  for (auto i : mask.indices()) {
    auto it = values.find(i);
    if (it == values.end()) throw InvalidArgument("report lacks PCR " + std::to_string(i));
    concat.insert(concat.end(), it->second.bytes().begin(), it->second.bytes().end());
  }
  return sha256(concat);
}

}  // namespace

AuditRecord Verifier::run_cycle(Session& s) {
  std::lock_guard cycle_lock(s.cycle_mu);
  const auto& bundle = s.policy->bundle();
  const tpm::PcrMask mask = bundle.pcr_selection;
  Bytes nonce = crypto::random_bytes(options_.nonce_size);

  AuditRecord rec;
  rec.agent_id = s.agent_id;
  rec.nonce = to_hex(nonce);

  std::size_t offset;
  {
    std::lock_guard lock(s.state_mu);
    offset = s.verified_count;
  }

  // Everything that ends a cycle funnels through here: apply the trust
  // change, append the audit record, emit remediation for fresh Untrusted.
  auto finish = [&](CycleOutcome outcome, std::string detail, const std::function<void(trust::TrustMap&)>& update) {
    std::vector<trust::Transition> transitions;
    trust::TrustMap after;
    {
      std::lock_guard lock(s.state_mu);
      trust::TrustMap before = s.trust;
      update(s.trust);
      transitions = trust::diff(before, s.trust);
      after = s.trust;
      s.last_outcome = outcome;
      s.last_detail = detail;
      s.last_cycle = trust::now_ms();
      ++s.cycles;
    }
    rec.outcome = outcome;
    rec.detail = std::move(detail);
    for (const auto& t : transitions) rec.trust_delta.push_back({t.scope.to_string(), t.from, t.to});
    auto stored = audit_->append(rec);
    if (remediation_) {
      for (const auto& t : transitions) {
        if (t.to != trust::TrustLevel::kUntrusted) continue;
        RemediationEvent ev;
        ev.agent_id = s.agent_id;
        ev.scope = t.scope;
        ev.action = bundle.remediation_for(t.scope);
        ev.cause = summarize(after.state_of(t.scope));
        if (t.scope.is_pod()) {
          auto it = bundle.pod_names.find(t.scope.uid());
          if (it != bundle.pod_names.end()) ev.pod_name = it->second;
        }
        ev.transition_id = next_transition_++;
        remediation_->emit(std::move(ev));
      }
    }
    return stored;
  };

  auto fail_node = [&](CycleOutcome outcome, std::string_view reason, std::string detail) {
    return finish(outcome, std::move(detail), [&](trust::TrustMap& m) {
      trust::mark_untrusted(m.node_state, trust::now_ms(), reason);
    });
  };

  IntegrityReport report;
  try {
    try {
      report = s.channel->request_report(nonce, mask, offset);
    } catch (const agent::OffsetOutOfRange&) {
      // The agent's log is shorter than what we verified: start over.
      {
        std::lock_guard lock(s.state_mu);
        s.running_pcr = Digest::zero();
        s.verified_count = 0;
      }
      offset = 0;
      report = s.channel->request_report(nonce, mask, offset);
    }
  } catch (const Unreachable& e) {
    int misses;
    {
      std::lock_guard lock(s.state_mu);
      misses = ++s.misses;
    }
    std::string detail = std::string(e.what()) + " (miss " + std::to_string(misses) + ")";
    return finish(CycleOutcome::kAgentUnreachable, detail, [&](trust::TrustMap& m) {
      if (misses >= options_.unreachable_grace)
        trust::mark_untrusted(m.node_state, trust::now_ms(), trust::kReasonUnreachable);
    });
  } catch (const Error& e) {
    return fail_node(CycleOutcome::kQuoteInvalid, trust::kReasonQuoteInvalid, e.what());
  }
  {
    std::lock_guard lock(s.state_mu);
    s.misses = 0;
  }

  // (a) the quote is signed by the pinned AK over our nonce.
  auto verdict = tpm::verify_quote(report.quote, s.identity.ak_public(), nonce);
  std::string bad_quote;
  if (!verdict)
    bad_quote = "quote rejected: " + std::string(tpm::to_string(verdict.reason));
  else if (report.nonce != nonce)
    bad_quote = "report nonce differs from the challenge";
  else if (report.quote.pcr_selection != mask)
    bad_quote = "quote covers PCRs " + report.quote.pcr_selection.hex() + ", requested " + mask.hex();
  else if (report.agent_id != s.agent_id)
    bad_quote = "report claims agent " + report.agent_id;
  if (!bad_quote.empty()) return fail_node(CycleOutcome::kQuoteInvalid, trust::kReasonQuoteInvalid, bad_quote);
  rec.composite_digest = verdict.composite_digest;

  // (b) the new entries re-hash to the quoted PCR 10.
  Digest running;
  {
    std::lock_guard lock(s.state_mu);
    running = s.running_pcr;
  }
  std::string bad_replay;
  Digest next;
  try {
    if (report.offset != offset)
      bad_replay = "segment starts at " + std::to_string(report.offset) + ", requested " + std::to_string(offset);
    else if (report.total_count != offset + report.entries.size())
      bad_replay = "segment length does not match total count";
    else if (composite_of(report.pcr_values, mask) != verdict.composite_digest)
      bad_replay = "reported PCR values do not match the quoted composite";
    else if ((next = ml::replay(report.entries, running, offset)) != report.pcr_values.at(tpm::kImaPcr))
      bad_replay = "replay of the measurement list does not match the quoted PCR 10";
  } catch (const IntegrityError& e) {
    bad_replay = e.what();
  } catch (const InvalidArgument& e) {
    bad_replay = e.what();
  }
  if (!bad_replay.empty())
    return fail_node(CycleOutcome::kReplayMismatch, trust::kReasonReplayMismatch, bad_replay);

  std::size_t horizon;
  std::set<std::string> observed;
  {
    std::lock_guard lock(s.state_mu);
    s.running_pcr = next;
    s.verified_count = report.total_count;
    if (!s.retired_horizon) s.retired_horizon = report.total_count;
    horizon = *s.retired_horizon;
    observed = s.observed_pods;
  }

  // (c) policy, only on verified entries.
  ++policy_evaluations_;
  auto eval = policy::evaluate_entries(*s.policy, report.entries, offset, horizon);
  observed.insert(eval.observed_pods.begin(), eval.observed_pods.end());
  eval.observed_pods = observed;
  {
    std::lock_guard lock(s.state_mu);
    s.observed_pods = observed;
    for (auto& v : all_violations(eval))
      if (s.reported.emplace(v.scope, v.path, v.observed, v.reason).second) rec.new_violations.push_back(std::move(v));
  }
  std::string detail = std::to_string(report.entries.size()) + " new entries";
  if (!eval.clean()) detail += ", " + std::to_string(eval.violation_count()) + " violations";
  return finish(eval.clean() ? CycleOutcome::kOk : CycleOutcome::kPolicyViolations, detail,
                [&](trust::TrustMap& m) { m = trust::derive_trust(m, eval, trust::now_ms()); });
}

AgentStatus Verifier::status(const std::string& agent_id) const { return session(agent_id)->status(); }

std::vector<AgentStatus> Verifier::status_all() const {
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) sessions.push_back(s);
  }
  std::vector<AgentStatus> out;
  for (const auto& s : sessions) out.push_back(s->status());
  return out;
}

void Verifier::reset(const std::string& agent_id, const pod::PodRef& scope) {
  auto s = session(agent_id);
  AuditRecord rec;
  rec.kind = "reset";
  rec.agent_id = agent_id;
  rec.detail = "manual reset of " + scope.to_string();
  {
    std::lock_guard lock(s->state_mu);
    trust::TrustState* state = &s->trust.node_state;
    if (scope.is_pod()) {
      auto it = s->trust.pod_states.find(scope.uid());
      if (it == s->trust.pod_states.end())
        throw InvalidArgument("pod " + scope.uid() + " is not registered for agent " + agent_id);
      state = &it->second;
    }
    rec.trust_delta.push_back({scope.to_string(), state->level, trust::TrustLevel::kStart});
    *state = trust::TrustState::start(trust::now_ms());
  }
  audit_->append(std::move(rec));
}

void to_json(json& j, const AgentStatus& s) {
  j = json{{"agent_id", s.agent_id},
           {"trust", s.trust},
           {"pod_names", s.pod_names},
           {"verified_count", s.verified_count},
           {"running_pcr", s.running_pcr},
           {"last_outcome", s.last_outcome ? json(to_string(*s.last_outcome)) : json(nullptr)},
           {"last_detail", s.last_detail},
           {"last_cycle", s.last_cycle},
           {"cycles", s.cycles},
           {"consecutive_misses", s.consecutive_misses},
           {"interval_ms", s.interval.count()}};
}

void from_json(const json& j, AgentStatus& s) {
  s = AgentStatus();
  s.agent_id = j.at("agent_id").get<std::string>();
  s.trust = j.at("trust").get<trust::TrustMap>();
  s.pod_names = j.value("pod_names", std::map<std::string, std::string>{});
  s.verified_count = j.value("verified_count", std::size_t{0});
  if (j.contains("running_pcr")) s.running_pcr = j["running_pcr"].get<Digest>();
  if (j.contains("last_outcome") && !j["last_outcome"].is_null()) {
    auto o = cycle_outcome_from_string(j["last_outcome"].get<std::string>());
    if (!o) throw InvalidArgument("unknown cycle outcome");
    s.last_outcome = *o;
  }
  s.last_detail = j.value("last_detail", "");
  s.last_cycle = j.value("last_cycle", trust::Timestamp{0});
  s.cycles = j.value("cycles", std::uint64_t{0});
  s.consecutive_misses = j.value("consecutive_misses", 0);
  s.interval = Millis(j.value("interval_ms", std::int64_t{0}));
}

VerifierServer::VerifierServer(Verifier& verifier, std::string token)
    : verifier_(verifier), server_(std::move(token)) {
  server_.route("POST", "/v1/enroll", [this](const http::Request& req) {
    auto body = json::parse(req.body);
    auto agent_id = body.at("agent_id").get<std::string>();
    auto bundle = body.at("bundle").get<policy::PolicyBundle>();
    std::optional<Millis> interval;
    if (body.contains("interval_ms")) interval = Millis(body["interval_ms"].get<std::int64_t>());
    verifier_.enroll(agent_id, std::move(bundle), interval);
    return http::Response{200, json(verifier_.status(agent_id)).dump()};
  });
  server_.route("GET", "/v1/status", [this](const http::Request&) {
    return http::Response{200, json{{"agents", verifier_.status_all()}}.dump()};
  });
  server_.route("GET", R"(/v1/status/([^/]+))", [this](const http::Request& req) {
    return http::Response{200, json(verifier_.status(req.matches.at(0))).dump()};
  });
  server_.route("POST", "/v1/reset", [this](const http::Request& req) {
    auto body = json::parse(req.body);
    auto agent_id = body.at("agent_id").get<std::string>();
    auto scope = pod::PodRef::parse(body.value("scope", "node"));
    verifier_.reset(agent_id, scope);
    return http::Response{200, json(verifier_.status(agent_id)).dump()};
  });
  server_.route("GET", "/v1/audit", [this](const http::Request& req) {
    trust::Timestamp since = 0;
    if (auto it = req.params.find("since"); it != req.params.end()) {
      const auto& v = it->second;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), since);
      if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgument("invalid since timestamp");
    }
    auto records = verifier_.audit().since(since);
    if (auto it = req.params.find("agent"); it != req.params.end())
      std::erase_if(records, [&](const AuditRecord& r) { return r.agent_id != it->second; });
    return http::Response{200, json{{"records", records}}.dump()};
  });
}

}  // namespace podseal::verifier
