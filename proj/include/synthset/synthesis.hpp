#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthset/common.hpp"
#include "synthset/imaging.hpp"
#include "synthset/sampler.hpp"

namespace synthset {

inline constexpr int kBaseImageSize = 720;
inline constexpr int kDefaultOutputSize = 720;

/// One image synthesis call. Exactly one image is produced per request.
struct SynthRequest {
  Mode mode = Mode::TextToImage;
  PromptText prompt;
  int steps = 4;
  double guidance = 0.0;
  double strength = 0.6;  // ImageToImage only
  int width = kDefaultOutputSize;
  int height = kDefaultOutputSize;
  std::uint64_t seed = 0;
  std::optional<ImageBuf> base_image;  // required iff ImageToImage

  /// Defaults per mode: t2i 4 steps / guidance 0; i2i 10 steps / guidance
  /// 0.4 / strength 0.6.
  static SynthRequest defaults_for(Mode mode);
};

/// Throws Input for requests that break the request invariants.
void validate(const SynthRequest& req);

/// Endpoint path for the request's mode ("/v1/txt2img" or "/v1/img2img").
std::string endpoint_for(Mode mode);

/// Request body on the wire. Only the prompt text travels.
nlohmann::json to_wire(const SynthRequest& req);
SynthRequest from_wire(Mode mode, const nlohmann::json& body);

/// Equality over everything the wire carries.
bool wire_equal(const SynthRequest& a, const SynthRequest& b);

struct BackendInfo {
  std::string model_name;
  double latency_seconds = 0.0;
};

struct SynthResult {
  ImageBuf image;
  BackendInfo info;
};

/// A synthesis service. Implementations must tolerate concurrent calls.
class SynthesisBackend {
 public:
  virtual ~SynthesisBackend() = default;

  virtual SynthResult generate(const SynthRequest& req) = 0;
  virtual void health_check() = 0;
  virtual std::string name() const = 0;

  /// Model-side latency to record instead of the wall clock, if any.
  virtual std::optional<double> simulated_latency(Mode) const { return std::nullopt; }
};

/// Validates, calls the backend once and checks the response dimensions.
/// latency_seconds is the wall clock around the call unless the backend
/// simulates latency.
SynthResult synthesize(SynthesisBackend& backend, const SynthRequest& req);

struct RetryPolicy {
  double base_seconds = 0.5;
  double factor = 2.0;
  int max_attempts = 5;
};

using Sleeper = std::function<void(std::chrono::duration<double>)>;
Sleeper real_sleeper();

/// Runs fn, retrying retryable (transport) errors with exponential backoff.
/// Other errors propagate at once.
template <typename Fn>
auto with_retry(Fn&& fn, const RetryPolicy& policy, const Sleeper& sleep) -> decltype(fn()) {
  double delay = policy.base_seconds;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= policy.max_attempts) throw;
    }
    sleep(std::chrono::duration<double>(delay));
    delay *= policy.factor;
  }
}

// ---------------------------------------------------------------------------
// Base images for image-to-image.

struct BaseImage {
  ImageBuf image;  // already prepared, kBaseImageSize square
  std::string source_id;
  std::string brand;
};

struct BasePool {
  std::vector<BaseImage> images;
  double padding_fraction = 0.1;
};

/// Crop rect for prepare_base: bbox grown by padding_fraction of its own
/// size on each side, clipped to the image, edges rounded half-up.
PixelRect padded_pixel_rect(int width, int height, const Rect& bbox, double padding_fraction);

/// Crop to the padded bbox and resize to 720x720. Throws Input if the clipped
/// rect has zero area.
ImageBuf prepare_base(const ImageBuf& image, const Rect& bbox, double padding_fraction);

/// Base pool document:
///   {"padding_fraction": 0.1,
///    "images": [{"path": "a.png", "bbox": [x,y,w,h], "brand": "Peugeot",
///                "source_id": "cam3-0012"}]}
/// Paths are relative to the document. Brands in `excluded_brands` are a
/// Config error.
BasePool load_base_pool(const std::string& path, const std::vector<std::string>& excluded_brands);

/// Deterministic stand-in pool of gradient "road" images.
BasePool procedural_base_pool(std::size_t count, double padding_fraction);

// ---------------------------------------------------------------------------
// Procedural mock.

struct FaultProfile {
  double p_zero_cars = 0.0;
  double p_two_cars = 0.0;
};

inline constexpr const char* kGroundTruthKey = "synthset-gt";

struct GroundTruthBlob {
  Rect bbox;
  std::string color;
};

/// Parses the `synthset-gt` metadata entry of a mock image.
std::vector<GroundTruthBlob> read_ground_truth(const ImageBuf& image);

/// RGB used for a color word by the mock renderer.
std::array<std::uint8_t, 3> mock_color(std::string_view color);

/// Pure function of (prompt text, seed, faults, size, base image): a low
/// saturation textured background with 0, 1 or 2 rectangular "cars". Each car
/// is filled with the prompt's color and framed by a saturated border.
ImageBuf mock_render(const PromptText& prompt, std::uint64_t seed, const FaultProfile& faults,
                     int width = kDefaultOutputSize, int height = kDefaultOutputSize,
                     const ImageBuf* base = nullptr);

struct MockBackendConfig {
  FaultProfile faults;
  /// When set, reported latency comes from here instead of the wall clock.
  std::optional<double> simulated_t2i_seconds = 0.85;
  std::optional<double> simulated_i2i_seconds = 2.33;
  std::string model_name = "mock-procedural-v1";
};

class MockSynthesisBackend final : public SynthesisBackend {
 public:
  explicit MockSynthesisBackend(MockBackendConfig cfg = {}) : cfg_(std::move(cfg)) {}

  SynthResult generate(const SynthRequest& req) override;
  void health_check() override {}
  std::string name() const override { return cfg_.model_name; }
  std::optional<double> simulated_latency(Mode mode) const override;

 private:
  MockBackendConfig cfg_;
};

}  // namespace synthset
