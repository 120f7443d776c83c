#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "kt/llm/backend.hpp"

namespace kt::llm {

/// Answers from a capture file: one JSON object per line with fields
/// "hash", "endpoint", "request" and "response". A request absent from the
/// file is a BackendError.
class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& capture);

  Capabilities capabilities() const override { return capabilities_; }
  Json post(Endpoint endpoint, const Json& body) override;

  std::size_t size() const { return responses_.size(); }

 private:
  Capabilities capabilities_;
  std::unordered_map<std::string, Json> responses_;  // canonical request -> response
};

/// Forwards to `inner` and appends every successful exchange to a capture
/// file readable by ReplayBackend.
class RecordingBackend final : public LlmBackend {
 public:
  RecordingBackend(std::shared_ptr<LlmBackend> inner, const std::filesystem::path& capture);

  Capabilities capabilities() const override { return inner_->capabilities(); }
  Json post(Endpoint endpoint, const Json& body) override;

 private:
  std::shared_ptr<LlmBackend> inner_;
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace kt::llm
