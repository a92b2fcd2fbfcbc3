#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "synthset/common.hpp"
#include "synthset/imaging.hpp"

namespace synthset {

struct Detection {
  std::string label;
  double confidence = 0.0;
  Rect bbox;

  bool operator==(const Detection&) const = default;
};

/// Label in a known class name, confidence in [0,1], normalized bbox.
bool is_valid(const Detection& d);

enum class Verdict { Accept, Reject };
enum class RejectReason { NoCar, MultipleCars, LowConfidence };

std::string_view to_string(RejectReason reason);
RejectReason parse_reject_reason(std::string_view text);

struct GateDecision {
  Verdict verdict = Verdict::Reject;
  std::optional<Rect> bbox;           // Accept only
  std::optional<double> score;        // Accept only
  std::optional<RejectReason> reason; // Reject only

  static GateDecision accept(const Rect& bbox, double score) {
    return {Verdict::Accept, bbox, score, std::nullopt};
  }
  static GateDecision reject(RejectReason reason) {
    return {Verdict::Reject, std::nullopt, std::nullopt, reason};
  }
};

struct GateConfig {
  double min_confidence = 0.25;
  std::set<std::string> vehicle_labels = {"car"};
};

void validate(const GateConfig& cfg);

/// Exactly one confident vehicle detection is accepted.
///
/// V = detections with a vehicle label and confidence >= min_confidence.
/// |V| == 1 accepts that detection; |V| >= 2 rejects with MultipleCars;
/// |V| == 0 rejects with LowConfidence if some vehicle-labeled detection fell
/// below the threshold, NoCar otherwise. Other labels never count.
GateDecision assess(const std::vector<Detection>& detections, const GateConfig& cfg);

/// Pixel rect of a normalized bbox: each of x*W, y*H, w*W, h*H rounded
/// half-up, then clipped to the image.
PixelRect bbox_pixel_rect(int width, int height, const Rect& bbox);

/// Pixels inside bbox_pixel_rect. Throws Input on a zero-area rect.
ImageBuf crop_to_bbox(const ImageBuf& image, const Rect& bbox);

/// A detector service. Implementations must tolerate concurrent calls.
class DetectionBackend {
 public:
  virtual ~DetectionBackend() = default;
  virtual std::vector<Detection> run(const ImageBuf& image) = 0;
  virtual void health_check() = 0;
  virtual std::string name() const = 0;
};

/// Calls the backend, checks every detection and orders by confidence,
/// highest first (stable for ties). Off-contract detections are a Protocol
/// error.
std::vector<Detection> detect(DetectionBackend& backend, const ImageBuf& image);

/// Reads the mock renderer's ground truth: one "car" per blob, confidence 1.
class OracleDetector final : public DetectionBackend {
 public:
  std::vector<Detection> run(const ImageBuf& image) override;
  void health_check() override {}
  std::string name() const override { return "mock-oracle"; }
};

/// Connected components (4-neighbour) of pixels with HSV saturation above a
/// threshold; components smaller than min_area_fraction of the image are
/// dropped. Each component becomes one "car" detection.
class BlobDetector final : public DetectionBackend {
 public:
  explicit BlobDetector(double saturation_threshold = 0.5, double min_area_fraction = 0.005)
      : threshold_(saturation_threshold), min_area_(min_area_fraction) {}

  std::vector<Detection> run(const ImageBuf& image) override;
  void health_check() override {}
  std::string name() const override { return "mock-blob"; }

 private:
  double threshold_;
  double min_area_;
};

nlohmann::json to_wire(const std::vector<Detection>& detections);
std::vector<Detection> detections_from_wire(const nlohmann::json& body);

}  // namespace synthset
