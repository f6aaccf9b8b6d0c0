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

#include <thread>

#include "httplib.h"
#include "podseal/error.hpp"
#include "podseal/http.hpp"
#include "podseal/wire.hpp"

namespace podseal::http {

Response json_error(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

struct Client::Impl {
  httplib::Client cli;
  httplib::Headers headers;

  explicit Impl(const std::string& url) : cli(url) {}
};

Client::Client(std::string base_url, std::string token, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), impl_(std::make_unique<Impl>(base_url_)) {
  if (!impl_->cli.is_valid()) throw InvalidArgument("invalid URL '" + base_url_ + "'");
  impl_->cli.set_connection_timeout(timeout);
  impl_->cli.set_read_timeout(timeout);
  impl_->cli.set_write_timeout(timeout);
  if (!token.empty()) impl_->headers.emplace("Authorization", "Bearer " + token);
}

Client::~Client() = default;
Client::Client(Client&&) noexcept = default;
Client& Client::operator=(Client&&) noexcept = default;

namespace {

Response convert(const httplib::Result& res, const std::string& what) {
  if (!res) throw Unreachable(what + ": " + httplib::to_string(res.error()));
  return {res->status, res->body, res->get_header_value("Content-Type")};
}

}  // namespace

Response Client::get(const std::string& path) const {
  return convert(impl_->cli.Get(path, impl_->headers), "GET " + base_url_ + path);
}

Response Client::post(const std::string& path, const std::string& body) const {
  return convert(impl_->cli.Post(path, impl_->headers, body, "application/json"), "POST " + base_url_ + path);
}

Response Client::del(const std::string& path) const {
  return convert(impl_->cli.Delete(path, impl_->headers), "DELETE " + base_url_ + path);
}

struct Server::Impl {
  httplib::Server srv;
  std::string token;
  std::string admin_token;
  std::thread thread;
};

Server::Server(std::string token, std::string admin_token) : impl_(std::make_unique<Impl>()) {
  impl_->token = std::move(token);
  impl_->admin_token = std::move(admin_token);
}

Server::~Server() { stop(); }

namespace {

bool authorized(const httplib::Request& req, const std::string& expected) {
  if (expected.empty()) return true;
  return req.get_header_value("Authorization") == "Bearer " + expected;
}

}  // namespace

void Server::route(const std::string& method, const std::string& pattern, Handler handler, Auth auth) {
  Impl* impl = impl_.get();
  auto wrapped = [impl, handler = std::move(handler), auth, method](const httplib::Request& req,
                                                                     httplib::Response& res) {
    Response out;
    const std::string& needed = auth == Auth::kAdmin ? impl->admin_token : impl->token;
    if (auth != Auth::kNone && (!authorized(req, needed) || (auth == Auth::kAdmin && needed.empty()))) {
      out = json_error(401, "unauthorized");
    } else {
      Request r{method, req.path, {}, {}, req.body};
      for (const auto& [k, v] : req.params) r.params[k] = v;
      for (std::size_t i = 1; i < req.matches.size(); ++i) r.matches.push_back(req.matches[i]);
      try {
        out = handler(r);
      } catch (const NotFound& e) {
        out = json_error(404, e.what());
      } catch (const InvalidArgument& e) {
        out = json_error(400, e.what());
      } catch (const PolicyError& e) {
        out = json_error(400, e.what());
      } catch (const ParseError& e) {
        out = json_error(400, e.what());
      } catch (const json::exception& e) {
        out = json_error(400, e.what());
      } catch (const std::exception& e) {
        out = json_error(500, e.what());
      }
    }
    res.status = out.status;
    res.set_content(out.body, out.content_type.c_str());
  };
  if (method == "GET")
    impl_->srv.Get(pattern, wrapped);
  else if (method == "POST")
    impl_->srv.Post(pattern, wrapped);
  else if (method == "DELETE")
    impl_->srv.Delete(pattern, wrapped);
  else
    throw InvalidArgument("unsupported method " + method);
}

int Server::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = impl_->srv.bind_to_any_port(host);
  } else {
    port_ = impl_->srv.bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->srv.listen_after_bind(); });
  impl_->srv.wait_until_ready();
  return port_;
}

void Server::stop() {
  if (!impl_) return;
  impl_->srv.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string Server::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace podseal::http
