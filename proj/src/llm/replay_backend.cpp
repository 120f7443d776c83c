#include "kt/llm/replay_backend.hpp"

#include "kt/hash.hpp"
#include "kt/llm/wire.hpp"

namespace kt::llm {
namespace {

Endpoint endpoint_from_path(const std::string& path) {
  if (path == endpoint_path(Endpoint::kCompletions)) return Endpoint::kCompletions;
  if (path == endpoint_path(Endpoint::kChatCompletions)) return Endpoint::kChatCompletions;
  throw DataError("replay record names unknown endpoint '" + path + "'");
}

}  // namespace

ReplayBackend::ReplayBackend(const std::filesystem::path& capture) {
  std::ifstream in(capture);
  if (!in) throw DataError("cannot open replay file " + capture.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto record = Json::parse(line);
      const Endpoint endpoint = endpoint_from_path(record.at("endpoint").get<std::string>());
      (endpoint == Endpoint::kCompletions ? capabilities_.completion_logprobs
                                          : capabilities_.chat) = true;
      responses_[canonical_request(endpoint, record.at("request"))] = record.at("response");
    } catch (const Json::exception& e) {
      throw DataError(capture.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

Json ReplayBackend::post(Endpoint endpoint, const Json& body) {
  const auto it = responses_.find(canonical_request(endpoint, body));
  if (it == responses_.end()) {
    throw BackendError("replay miss for request " + hex64(request_hash(endpoint, body)));
  }
  return it->second;
}

RecordingBackend::RecordingBackend(std::shared_ptr<LlmBackend> inner,
                                   const std::filesystem::path& capture)
    : inner_(std::move(inner)), out_(capture, std::ios::app) {
  if (!out_) throw DataError("cannot open capture file " + capture.string());
}

Json RecordingBackend::post(Endpoint endpoint, const Json& body) {
  Json response = inner_->post(endpoint, body);
  Json record;
  record["hash"] = hex64(request_hash(endpoint, body));
  record["endpoint"] = endpoint_path(endpoint);
  record["request"] = body;
  record["response"] = response;
  std::lock_guard lock(mutex_);
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw DataError("failed writing capture file");
  return response;
}

}  // namespace kt::llm
