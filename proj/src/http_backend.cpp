#include "synthset/http_backend.hpp"

#include <cmath>

#include <httplib.h>

namespace synthset {

using nlohmann::json;

json post_json(const HttpEndpoint& endpoint, const std::string& path, const json& body) {
  httplib::Client client(endpoint.base_url);
  if (!client.is_valid())
    throw Error(ErrorKind::Config, "invalid backend url '" + endpoint.base_url + "'");
  const auto secs = static_cast<time_t>(endpoint.timeout_seconds);
  const auto usecs = static_cast<time_t>((endpoint.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  const auto res = client.Post(path, body.dump(), "application/json");
  if (!res)
    throw Error(ErrorKind::Transport,
                endpoint.base_url + path + ": " + httplib::to_string(res.error()));

  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::exception&) {
    if (res->status == 429 || res->status >= 500)
      throw Error(ErrorKind::Transport, path + ": HTTP " + std::to_string(res->status));
    throw Error(ErrorKind::Protocol, path + ": response is not JSON (HTTP " +
                                         std::to_string(res->status) + ")");
  }
  if (res->status == 200) return reply;

  const std::string message =
      reply.is_object() && reply.contains("error") && reply["error"].is_string()
          ? reply["error"].get<std::string>()
          : res->body;
  if (res->status == 429 || res->status >= 500)
    throw Error(ErrorKind::Transport, path + ": HTTP " + std::to_string(res->status) + ": " + message);
  if (res->status >= 400)
    throw Error(ErrorKind::Request, path + ": HTTP " + std::to_string(res->status) + ": " + message);
  throw Error(ErrorKind::Protocol, path + ": unexpected HTTP " + std::to_string(res->status));
}

SynthResult HttpSynthesisBackend::generate(const SynthRequest& req) {
  const json reply = post_json(endpoint_, endpoint_for(req.mode), to_wire(req));
  SynthResult result;
  try {
    result.image = decode_png(base64_decode(reply.at("image").get<std::string>()));
    result.info.model_name = reply.value("model", std::string{});
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Protocol, std::string("malformed synthesis response: ") + e.what());
  }
  return result;
}

void HttpSynthesisBackend::health_check() {
  SynthRequest probe = SynthRequest::defaults_for(Mode::TextToImage);
  probe.prompt.text = "health check";
  probe.steps = 1;
  probe.width = probe.height = 64;
  (void)generate(probe);
}

std::vector<Detection> HttpDetectionBackend::run(const ImageBuf& image) {
  const json body = {{"image", base64_encode(encode_png(image))}};
  return detections_from_wire(post_json(endpoint_, "/v1/detect", body));
}

void HttpDetectionBackend::health_check() {
  ImageBuf probe(8, 8);
  probe.fill(128, 128, 128);
  (void)run(probe);
}

}  // namespace synthset
