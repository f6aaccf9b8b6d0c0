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

#include "podseal/error.hpp"
#include "podseal/verifier.hpp"

namespace podseal::verifier {

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw InvalidArgument("URL '" + url + "' has no scheme");
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

RemediationDispatcher::RemediationDispatcher(std::shared_ptr<AuditLog> audit, Options options)
    : audit_(std::move(audit)), options_(std::move(options)) {
  if (options_.max_attempts < 1) throw InvalidArgument("max_attempts must be at least 1");
  if (options_.webhook_url) split_url(*options_.webhook_url);
  worker_ = std::thread([this] { run(); });
}

RemediationDispatcher::~RemediationDispatcher() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

bool RemediationDispatcher::emit(RemediationEvent event) {
  {
    std::lock_guard lock(mu_);
    if (!seen_.emplace(event.agent_id, event.scope.to_string(), event.transition_id).second) return false;
    emitted_.push_back(event);
    queue_.push_back(std::move(event));
  }
  cv_.notify_all();
  return true;
}

void RemediationDispatcher::flush() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

std::vector<RemediationEvent> RemediationDispatcher::emitted() const {
  std::lock_guard lock(mu_);
  return emitted_;
}

void RemediationDispatcher::run() {
  std::unique_lock lock(mu_);
  while (true) {
    cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) break;
    auto event = std::move(queue_.front());
    queue_.pop_front();
    busy_ = true;
    lock.unlock();
    deliver(event);
    lock.lock();
    busy_ = false;
    if (queue_.empty()) idle_cv_.notify_all();
  }
  idle_cv_.notify_all();
}

void RemediationDispatcher::deliver(const RemediationEvent& event) {
  AuditRecord rec;
  rec.kind = "remediation";
  rec.agent_id = event.agent_id;
  std::string what = std::string(policy::to_string(event.action)) + " for " + event.scope.to_string();

  if (!options_.webhook_url) {
    rec.detail = what + ": audit only, no webhook configured";
    audit_->append(std::move(rec));
    return;
  }

  auto [base, path] = split_url(*options_.webhook_url);
  http::Client client(base, options_.webhook_token, options_.timeout);
  std::string body = json(event).dump();
  std::string last_error;
  Millis backoff = options_.initial_backoff;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    try {
      auto res = client.post(path, body);
      if (res.ok()) {
        ++delivered_;
        rec.detail = what + ": delivered on attempt " + std::to_string(attempt);
        audit_->append(std::move(rec));
        return;
      }
      last_error = "HTTP " + std::to_string(res.status);
    } catch (const Unreachable& e) {
      last_error = e.what();
    }
    if (attempt < options_.max_attempts) {
      std::unique_lock lock(mu_);
      if (cv_.wait_for(lock, backoff, [this] { return stopping_; })) break;
      backoff *= 2;
    }
  }
  ++failed_;
  rec.detail = what + ": delivery failed: " + last_error;
  audit_->append(std::move(rec));
}

}  // namespace podseal::verifier
