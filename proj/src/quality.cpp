#include "synthset/quality.hpp"

#include <algorithm>
#include <cmath>

#include "synthset/synthesis.hpp"

namespace synthset {

using nlohmann::json;

bool is_valid(const Detection& d) {
  return !d.label.empty() && d.confidence >= 0.0 && d.confidence <= 1.0 &&
         is_valid_normalized(d.bbox);
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::NoCar: return "no_car";
    case RejectReason::MultipleCars: return "multiple_cars";
    case RejectReason::LowConfidence: return "low_confidence";
  }
  return "unknown";
}

RejectReason parse_reject_reason(std::string_view text) {
  if (text == "no_car") return RejectReason::NoCar;
  if (text == "multiple_cars") return RejectReason::MultipleCars;
  if (text == "low_confidence") return RejectReason::LowConfidence;
  throw Error(ErrorKind::Parse, "unknown reject reason '" + std::string(text) + "'");
}

void validate(const GateConfig& cfg) {
  if (!(cfg.min_confidence >= 0.0 && cfg.min_confidence <= 1.0))
    throw Error(ErrorKind::Config, "min_confidence must be in [0, 1]");
  if (cfg.vehicle_labels.empty()) throw Error(ErrorKind::Config, "vehicle_labels is empty");
}

GateDecision assess(const std::vector<Detection>& detections, const GateConfig& cfg) {
  const Detection* chosen = nullptr;
  std::size_t confident = 0;
  bool weak_vehicle = false;
  for (const auto& d : detections) {
    if (!cfg.vehicle_labels.contains(d.label)) continue;
    if (d.confidence >= cfg.min_confidence) {
      ++confident;
      chosen = &d;
    } else {
      weak_vehicle = true;
    }
  }
  if (confident == 1) return GateDecision::accept(chosen->bbox, chosen->confidence);
  if (confident >= 2) return GateDecision::reject(RejectReason::MultipleCars);
  return GateDecision::reject(weak_vehicle ? RejectReason::LowConfidence : RejectReason::NoCar);
}

PixelRect bbox_pixel_rect(int width, int height, const Rect& bbox) {
  long x = round_half_up(bbox.x * width);
  long y = round_half_up(bbox.y * height);
  long w = round_half_up(bbox.w * width);
  long h = round_half_up(bbox.h * height);
  const long x1 = std::clamp(x + w, 0L, static_cast<long>(width));
  const long y1 = std::clamp(y + h, 0L, static_cast<long>(height));
  x = std::clamp(x, 0L, static_cast<long>(width));
  y = std::clamp(y, 0L, static_cast<long>(height));
  return {static_cast<int>(x), static_cast<int>(y), static_cast<int>(std::max(0L, x1 - x)),
          static_cast<int>(std::max(0L, y1 - y))};
}

ImageBuf crop_to_bbox(const ImageBuf& image, const Rect& bbox) {
  const PixelRect rect = bbox_pixel_rect(image.width(), image.height(), bbox);
  if (rect.w <= 0 || rect.h <= 0) throw Error(ErrorKind::Input, "degenerate bbox: zero pixel area");
  return crop_pixels(image, rect);
}

std::vector<Detection> detect(DetectionBackend& backend, const ImageBuf& image) {
  auto detections = backend.run(image);
  for (const auto& d : detections)
    if (!is_valid(d)) throw Error(ErrorKind::Protocol, "detector returned an invalid detection");
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
  return detections;
}

std::vector<Detection> OracleDetector::run(const ImageBuf& image) {
  std::vector<Detection> out;
  for (const auto& blob : read_ground_truth(image)) out.push_back({"car", 1.0, blob.bbox});
  return out;
}

std::vector<Detection> BlobDetector::run(const ImageBuf& image) {
  const int w = image.width(), h = image.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<std::uint8_t> mask(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      mask[static_cast<std::size_t>(y) * w + x] = saturation(image.pixel(x, y)) > threshold_;

  std::vector<Detection> out;
  std::vector<std::size_t> stack;
  const auto min_pixels = static_cast<std::size_t>(std::ceil(min_area_ * static_cast<double>(n)));
  for (std::size_t start = 0; start < n; ++start) {
    if (!mask[start]) continue;
    mask[start] = 0;
    stack.assign(1, start);
    std::size_t count = 0;
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++count;
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
      auto visit = [&](std::size_t j) {
        if (mask[j]) {
          mask[j] = 0;
          stack.push_back(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < w) visit(i + 1);
      if (y > 0) visit(i - w);
      if (y + 1 < h) visit(i + w);
    }
    if (count < min_pixels) continue;
    const Rect box{static_cast<double>(x0) / w, static_cast<double>(y0) / h,
                   static_cast<double>(x1 - x0 + 1) / w, static_cast<double>(y1 - y0 + 1) / h};
    // Confidence rises with the component's share of the image and saturates.
    const double share = static_cast<double>(count) / static_cast<double>(n);
    out.push_back({"car", std::min(1.0, 1.0 - std::exp(-share / min_area_)), box});
  }
  return out;
}

json to_wire(const std::vector<Detection>& detections) {
  json arr = json::array();
  for (const auto& d : detections)
    arr.push_back({{"label", d.label},
                   {"confidence", d.confidence},
                   {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}});
  return {{"detections", arr}};
}

std::vector<Detection> detections_from_wire(const json& body) {
  std::vector<Detection> out;
  try {
    for (const auto& d : body.at("detections")) {
      const auto& b = d.at("bbox");
      if (!b.is_array() || b.size() != 4) throw Error(ErrorKind::Protocol, "bbox must have 4 numbers");
      out.push_back({d.at("label").get<std::string>(), d.at("confidence").get<double>(),
                     {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()}});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Protocol, std::string("malformed detect response: ") + e.what());
  }
  return out;
}

}  // namespace synthset
