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

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace podseal::http {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  bool ok() const { return status >= 200 && status < 300; }
};

Response json_error(int status, const std::string& message);

/// Blocking HTTP client bound to one base URL ("http://host:port").
/// Transport failures throw podseal::Unreachable.
class Client {
 public:
  Client(std::string base_url, std::string token = {},
         std::chrono::milliseconds timeout = std::chrono::milliseconds(3000));
  ~Client();
  Client(Client&&) noexcept;
  Client& operator=(Client&&) noexcept;

  Response get(const std::string& path) const;
  Response post(const std::string& path, const std::string& body) const;
  Response del(const std::string& path) const;

  const std::string& base_url() const { return base_url_; }

 private:
  struct Impl;
  std::string base_url_;
  std::unique_ptr<Impl> impl_;
};

enum class Auth { kNone, kToken, kAdmin };

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> params;
  std::vector<std::string> matches;  // regex captures of the route pattern
  std::string body;
};

using Handler = std::function<Response(const Request&)>;

/// Threaded HTTP server. Handlers may throw: podseal::NotFound maps to 404,
/// podseal::InvalidArgument/PolicyError/ParseError and JSON errors to 400,
/// anything else to 500.
class Server {
 public:
  explicit Server(std::string token = {}, std::string admin_token = {});
  ~Server();

  void route(const std::string& method, const std::string& pattern, Handler handler, Auth auth = Auth::kToken);

  /// Binds (port 0 picks a free port), starts serving on a background
  /// thread and returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  int port() const { return port_; }
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string host_;
  int port_ = 0;
};

}  // namespace podseal::http
