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

#include "medmatch/http_api.hpp"

#include <charconv>
#include <regex>

#include <httplib.h>

namespace medmatch {

nlohmann::json error_body(int status, const std::string& message) {
  return {{"code", status}, {"message", message}};
}

namespace {

std::size_t parse_count(const std::map<std::string, std::string>& params, const std::string& name,
                        std::size_t fallback) {
  auto it = params.find(name);
  if (it == params.end() || it->second.empty()) return fallback;
  std::size_t value = 0;
  const auto* first = it->second.data();
  const auto* last = first + it->second.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw ServiceError(400, "'" + name + "' must be a non-negative integer");
  return value;
}

nlohmann::json parse_body(const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw ServiceError(400, "request body is not valid JSON");
  }
}

std::string string_field(const nlohmann::json& j, const char* name, bool required = true) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) {
    if (required) throw ServiceError(400, std::string("missing field '") + name + "'");
    return {};
  }
  if (!it->is_string()) throw ServiceError(400, std::string("field '") + name + "' must be a string");
  return it->get<std::string>();
}

ChosenRank rank_field(const nlohmann::json& j) {
  auto it = j.find("chosen_rank");
  if (it == j.end()) throw ServiceError(400, "missing field 'chosen_rank'");
  if (it->is_string() && it->get<std::string>() == "manual") return std::nullopt;
  if (it->is_number_integer() && it->get<std::int64_t>() >= 1) return it->get<std::size_t>();
  throw ServiceError(400, "chosen_rank must be an integer >= 1 or \"manual\"");
}

}  // namespace

ApiRouter::ApiRouter(MappingService& service, std::string token) : service_(service), token_(std::move(token)) {}

HttpResponse ApiRouter::handle(const HttpRequest& request) const {
  if (!token_.empty() && request.authorization != "Bearer " + token_) {
    return {401, error_body(401, "missing or invalid bearer token")};
  }
  try {
    return dispatch(request);
  } catch (const ServiceError& e) {
    return {e.status(), error_body(e.status(), e.what())};
  } catch (const UnembeddableError& e) {
    return {422, error_body(422, e.what())};
  } catch (const std::invalid_argument& e) {
    return {400, error_body(400, e.what())};
  } catch (const std::exception& e) {
    return {500, error_body(500, e.what())};
  }
}

HttpResponse ApiRouter::dispatch(const HttpRequest& request) const {
  static const std::regex item_skip(R"(^/v1/items/([^/]+)/skip$)");
  static const std::regex masterlist(R"(^/v1/masterlist/([^/]+)$)");
  const auto& path = request.path;
  const bool get = request.method == "GET";
  const bool post = request.method == "POST";
  std::smatch match;

  if (path == "/v1/suggest" && get) {
    auto q = request.params.find("q");
    if (q == request.params.end()) throw ServiceError(400, "missing query parameter 'q'");
    const auto mode_it = request.params.find("mode");
    const RetrievalMode mode = mode_it == request.params.end() || mode_it->second.empty()
                                   ? RetrievalMode::hybrid
                                   : parse_retrieval_mode(mode_it->second);
    return {200, to_json(service_.suggest(q->second, parse_count(request.params, "k", 5), mode))};
  }
  if (path == "/v1/queue" && get) {
    auto status_it = request.params.find("status");
    std::optional<ItemStatus> status = ItemStatus::pending;
    if (status_it != request.params.end()) {
      status = status_it->second == "all" ? std::nullopt : std::optional(parse_item_status(status_it->second));
    }
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : service_.queue(status, parse_count(request.params, "limit", 50))) {
      items.push_back(to_json(item));
    }
    return {200, {{"items", items}}};
  }
  if (path == "/v1/queue" && post) {
    const auto body = parse_body(request.body);
    if (!body.is_array()) throw ServiceError(400, "body must be a JSON list of clinic texts");
    std::vector<std::string> texts;
    for (const auto& t : body) {
      if (!t.is_string()) throw ServiceError(400, "body must be a JSON list of clinic texts");
      texts.push_back(t.get<std::string>());
    }
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : service_.enqueue(texts)) items.push_back(to_json(item));
    return {201, {{"items", items}}};
  }
  if (path == "/v1/mappings" && post) {
    const auto body = parse_body(request.body);
    if (!body.is_object()) throw ServiceError(400, "body must be a JSON object");
    const auto item = service_.accept_mapping(string_field(body, "item_id"), string_field(body, "masterlist_id"),
                                              rank_field(body), string_field(body, "reviewer", false));
    return {200, to_json(item)};
  }
  if (post && std::regex_match(path, match, item_skip)) {
    return {200, to_json(service_.skip(match[1].str()))};
  }
  if (get && std::regex_match(path, match, masterlist)) {
    const auto entry = service_.masterlist_entry(match[1].str());
    if (!entry) throw ServiceError(404, "unknown masterlist id '" + match[1].str() + "'");
    return {200, {{"id", entry->id}, {"text", entry->text}}};
  }
  if (path == "/v1/stats" && get) return {200, to_json(service_.stats())};
  if (path == "/v1/index/rebuild" && post) return {200, {{"snapshot_version", service_.rebuild()}}};

  const bool known = path == "/v1/suggest" || path == "/v1/queue" || path == "/v1/mappings" ||
                     path == "/v1/stats" || path == "/v1/index/rebuild" || std::regex_match(path, item_skip) ||
                     std::regex_match(path, masterlist);
  if (known) return {405, error_body(405, "method not allowed")};
  return {404, error_body(404, "no route for " + path)};
}

BindAddress parse_bind_address(const std::string& text) {
  BindAddress out;
  if (text.empty()) return out;
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    out.host = text;
    return out;
  }
  if (colon > 0) out.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc{} || ptr != port.data() + port.size() || value < 0 || value > 65535) {
    throw std::invalid_argument("bad bind address '" + text + "'");
  }
  out.port = value;
  return out;
}

struct HttpServer::Impl {
  Impl(MappingService& service, std::string token) : router(service, std::move(token)) {}
  ApiRouter router;
  httplib::Server server;
};

HttpServer::HttpServer(MappingService& service, std::string token)
    : impl_(std::make_unique<Impl>(service, std::move(token))) {
  const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest request{req.method, req.path, {}, req.body, req.get_header_value("Authorization")};
    for (const auto& [key, value] : req.params) request.params.emplace(key, value);
    const HttpResponse response = impl_->router.handle(request);
    res.status = response.status;
    res.set_content(response.body.dump(), "application/json");
  };
  impl_->server.Get(R"(/.*)", handler);
  impl_->server.Post(R"(/.*)", handler);
  impl_->server.Put(R"(/.*)", handler);
  impl_->server.Delete(R"(/.*)", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const BindAddress& address) {
  int port = address.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(address.host);
  } else if (!impl_->server.bind_to_port(address.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error("cannot bind " + address.host + ":" + std::to_string(address.port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace medmatch
