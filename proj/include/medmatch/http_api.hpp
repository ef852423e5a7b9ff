// Copyright 2026 The MedMatch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "medmatch/service.hpp"

namespace medmatch {

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> params;
  std::string body;
  std::string authorization;  // raw Authorization header
};

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

/// Transport-free /v1 routing. An empty token disables authentication.
class ApiRouter {
 public:
  ApiRouter(MappingService& service, std::string token);
  HttpResponse handle(const HttpRequest& request) const;

 private:
  HttpResponse dispatch(const HttpRequest& request) const;

  MappingService& service_;
  std::string token_;
};

nlohmann::json error_body(int status, const std::string& message);

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Parses "host:port", "host" or ":port".
BindAddress parse_bind_address(const std::string& text);

/// Blocking HTTP server around an ApiRouter.
class HttpServer {
 public:
  HttpServer(MappingService& service, std::string token);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket; port 0 picks a free port. Returns the bound port.
  int bind(const BindAddress& address);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace medmatch
