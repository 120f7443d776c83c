#include "kt/llm/http_backend.hpp"

#include <cstdlib>

#include "httplib.h"

namespace kt::llm {

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("HTTP backend requires a base URL");
  for (const auto& name : config_.api_key_env) {
    if (const char* value = std::getenv(name.c_str()); value && *value) {
      api_key_ = value;
      break;
    }
  }
}

Json HttpBackend::post(Endpoint endpoint, const Json& body) {
  httplib::Client client(config_.base_url);
  if (!client.is_valid()) {
    throw ConfigError("HTTP backend: unusable base URL (unsupported scheme or TLS not built in)");
  }
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto res = client.Post(endpoint_path(endpoint), headers, body.dump(), "application/json");
  if (!res) throw TransportError("HTTP request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("HTTP status " + std::to_string(res->status));
  }
  if (res->status != 200) {
    std::string detail;
    try {
      detail = Json::parse(res->body).at("error").at("message").get<std::string>();
    } catch (const Json::exception&) {
    }
    throw BackendError("HTTP status " + std::to_string(res->status) +
                       (detail.empty() ? "" : ": " + detail.substr(0, 200)));
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::exception&) {
    throw BackendError("HTTP response body is not JSON");
  }
}

}  // namespace kt::llm
