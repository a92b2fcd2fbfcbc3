#pragma once

#include <string>

#include "synthset/quality.hpp"
#include "synthset/synthesis.hpp"

namespace synthset {

struct HttpEndpoint {
  std::string base_url;  // e.g. "http://127.0.0.1:8188"
  double timeout_seconds = 120.0;
};

/// Client for POST /v1/txt2img and /v1/img2img.
///
/// Connection failures, timeouts, 429 and 5xx are Transport errors (retried by
/// callers); other 4xx are Request errors; unparseable bodies are Protocol
/// errors. Each call opens its own connection, so one instance can be shared
/// by all workers.
class HttpSynthesisBackend final : public SynthesisBackend {
 public:
  explicit HttpSynthesisBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  SynthResult generate(const SynthRequest& req) override;
  void health_check() override;
  std::string name() const override { return "http:" + endpoint_.base_url; }

 private:
  HttpEndpoint endpoint_;
};

/// Client for POST /v1/detect.
class HttpDetectionBackend final : public DetectionBackend {
 public:
  explicit HttpDetectionBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  std::vector<Detection> run(const ImageBuf& image) override;
  void health_check() override;
  std::string name() const override { return "http:" + endpoint_.base_url; }

 private:
  HttpEndpoint endpoint_;
};

/// POSTs a JSON body and returns the parsed 200 response, mapping failures to
/// Transport / Request / Protocol errors as above.
nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& path,
                         const nlohmann::json& body);

}  // namespace synthset
