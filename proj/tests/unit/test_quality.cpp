#include <doctest.h>

#include "oracles.hpp"
#include "synthset/quality.hpp"
#include "synthset/synthesis.hpp"

using namespace synthset;

namespace {

PromptText prompt_for(const std::string& color) {
  const std::string subject = color + " Audi A4 2015";
  return {"a photograph of a " + subject, subject};
}

ImageBuf noise_image(int w, int h, std::uint64_t seed) {
  ImageBuf img(w, h);
  Rng rng(seed);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

class FixedDetector final : public DetectionBackend {
 public:
  explicit FixedDetector(std::vector<Detection> d) : d_(std::move(d)) {}
  std::vector<Detection> run(const ImageBuf&) override { return d_; }
  void health_check() override {}
  std::string name() const override { return "fixed"; }

 private:
  std::vector<Detection> d_;
};

// The gate rule restated directly.
GateDecision expected_decision(const std::vector<Detection>& ds, const GateConfig& cfg) {
  int confident = 0, weak = 0;
  const Detection* only = nullptr;
  for (const auto& d : ds) {
    if (!cfg.vehicle_labels.count(d.label)) continue;
    if (d.confidence >= cfg.min_confidence) {
      ++confident;
      only = &d;
    } else {
      ++weak;
    }
  }
  if (confident == 1) return GateDecision::accept(only->bbox, only->confidence);
  if (confident >= 2) return GateDecision::reject(RejectReason::MultipleCars);
  return GateDecision::reject(weak > 0 ? RejectReason::LowConfidence : RejectReason::NoCar);
}

}  // namespace

TEST_CASE("gate examples") {
  const GateConfig cfg;
  const Rect b1{0.1, 0.1, 0.3, 0.3}, b2{0.5, 0.5, 0.3, 0.3};

  const auto one = assess({{"car", 0.95, b1}}, cfg);
  CHECK(one.verdict == Verdict::Accept);
  CHECK(*one.bbox == b1);
  CHECK(*one.score == 0.95);
  CHECK_FALSE(one.reason);

  const auto two = assess({{"car", 0.9, b1}, {"car", 0.8, b2}}, cfg);
  CHECK(two.verdict == Verdict::Reject);
  CHECK(*two.reason == RejectReason::MultipleCars);

  CHECK(*assess({{"car", 0.10, b1}}, cfg).reason == RejectReason::LowConfidence);
  CHECK(*assess({{"person", 0.99, b1}}, cfg).reason == RejectReason::NoCar);
  CHECK(*assess({}, cfg).reason == RejectReason::NoCar);

  // Only confident vehicles count toward "more than one".
  const auto mixed = assess({{"car", 0.9, b1}, {"car", 0.1, b2}, {"person", 0.9, b2}}, cfg);
  CHECK(mixed.verdict == Verdict::Accept);
  CHECK(*mixed.bbox == b1);
}

TEST_CASE("vehicle label set is configurable") {
  const Rect b1{0.1, 0.1, 0.3, 0.3}, b2{0.5, 0.5, 0.3, 0.3};
  const std::vector<Detection> ds = {{"car", 0.9, b1}, {"truck", 0.8, b2}};
  CHECK(assess(ds, {}).verdict == Verdict::Accept);
  GateConfig wide;
  wide.vehicle_labels = {"car", "truck", "van"};
  CHECK(*assess(ds, wide).reason == RejectReason::MultipleCars);
}

TEST_CASE("gate is total and agrees with the rule on random inputs") {
  Rng rng(31);
  const std::vector<std::string> labels = {"car", "truck", "person", "bus"};
  for (int i = 0; i < 5000; ++i) {
    GateConfig cfg;
    cfg.min_confidence = rng.uniform01();
    if (rng.below(2)) cfg.vehicle_labels = {"car", "truck"};
    std::vector<Detection> ds(rng.below(5));
    for (auto& d : ds) {
      d.label = labels[rng.below(labels.size())];
      d.confidence = rng.below(10) == 0 ? cfg.min_confidence : rng.uniform01();
      const double x = rng.uniform(0, 0.9), y = rng.uniform(0, 0.9);
      d.bbox = {x, y, rng.uniform(0.01, 1 - x), rng.uniform(0.01, 1 - y)};
    }
    const auto got = assess(ds, cfg);
    const auto want = expected_decision(ds, cfg);
    CHECK(got.verdict == want.verdict);
    CHECK(got.reason == want.reason);
    CHECK(got.bbox == want.bbox);
    CHECK(got.score == want.score);
    CHECK((got.verdict == Verdict::Accept) == (got.bbox.has_value() && got.score.has_value()));
    CHECK((got.verdict == Verdict::Reject) == got.reason.has_value());
  }
}

TEST_CASE("gate config validation") {
  GateConfig cfg;
  cfg.min_confidence = 1.5;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg.min_confidence = 0.25;
  cfg.vehicle_labels.clear();
  CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("crop examples") {
  const ImageBuf img = noise_image(100, 100, 1);
  CHECK(crop_to_bbox(img, {0, 0, 1, 1}).same_pixels(img));

  const ImageBuf c = crop_to_bbox(img, {0.25, 0.25, 0.5, 0.5});
  REQUIRE(c.width() == 50);
  REQUIRE(c.height() == 50);
  for (int y = 0; y < 50; ++y)
    for (int x = 0; x < 50; ++x)
      for (int k = 0; k < 3; ++k) CHECK(c.pixel(x, y)[k] == img.pixel(x + 25, y + 25)[k]);

  const ImageBuf odd = crop_to_bbox(noise_image(101, 101, 2), {0, 0, 0.5, 0.5});
  CHECK(odd.width() == 51);
  CHECK(odd.height() == 51);
}

TEST_CASE("degenerate crops") {
  const ImageBuf img = noise_image(100, 100, 3);
  try {
    crop_to_bbox(img, {0.5, 0.5, 0.004, 0.3});
    FAIL("expected an input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
  }
}

TEST_CASE("crop size equals the oracle rect on random boxes") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const int W = 1 + static_cast<int>(rng.below(400)), H = 1 + static_cast<int>(rng.below(400));
    const double x = rng.uniform01(), y = rng.uniform01();
    const Rect b{x, y, rng.uniform01() * (1 - x), rng.uniform01() * (1 - y)};
    const auto o = oracle::bbox_rect(W, H, b.x, b.y, b.w, b.h);
    const auto r = bbox_pixel_rect(W, H, b);
    CHECK(r.x == o.x0);
    CHECK(r.y == o.y0);
    CHECK(r.w == o.w());
    CHECK(r.h == o.h());
  }
}

TEST_CASE("oracle detector reads the ground truth") {
  const ImageBuf img = mock_render(prompt_for("blue"), 0, {0.0, 1.0});
  const auto gt = read_ground_truth(img);
  REQUIRE(gt.size() == 2);
  OracleDetector det;
  const auto ds = detect(det, img);
  REQUIRE(ds.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(ds[i].label == "car");
    CHECK(ds[i].confidence == 1.0);
    CHECK(ds[i].bbox == gt[i].bbox);
  }
  CHECK_THROWS_AS(det.run(ImageBuf(8, 8)), Error);
}

TEST_CASE("blob detector finds the single car") {
  BlobDetector det;
  for (const std::string color : {"red", "black", "white", "gray", "silver", "blue", "green", "brown"}) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const ImageBuf img = mock_render(prompt_for(color), s, {});
      const auto gt = read_ground_truth(img);
      const auto ds = detect(det, img);
      REQUIRE_MESSAGE(ds.size() == 1, color);
      CHECK(ds[0].label == "car");
      CHECK_MESSAGE(iou(ds[0].bbox, gt[0].bbox) >= 0.9, color);
    }
  }
}

TEST_CASE("blob detector sees nothing on a flat image") {
  ImageBuf flat(200, 150);
  flat.fill(120, 120, 120);
  BlobDetector det;
  CHECK(detect(det, flat).empty());
  flat.fill(0, 200, 0);  // saturated but one component spanning the frame
  CHECK(detect(det, flat).size() == 1);
}

TEST_CASE("blob and oracle detectors agree on clean mock images") {
  BlobDetector blob;
  OracleDetector truth;
  const GateConfig cfg;
  int agree = 0;
  const int n = 300;
  for (int s = 0; s < n; ++s) {
    const ImageBuf img = mock_render(prompt_for(default_colors()[s % 8]), s, {0.1, 0.2});
    agree += assess(detect(blob, img), cfg).verdict == assess(detect(truth, img), cfg).verdict;
  }
  CHECK(agree >= n * 99 / 100);
}

TEST_CASE("detect orders by confidence and rejects off-contract output") {
  const Rect b{0.1, 0.1, 0.2, 0.2};
  FixedDetector ok({{"car", 0.3, b}, {"person", 0.9, b}, {"car", 0.3, {0.5, 0.5, 0.1, 0.1}}});
  const auto ds = detect(ok, ImageBuf(4, 4));
  REQUIRE(ds.size() == 3);
  CHECK(ds[0].label == "person");
  CHECK(ds[1].bbox == b);  // ties keep their order

  for (const auto& bad : std::vector<Detection>{{"car", 1.5, b}, {"car", 0.5, {0.9, 0.1, 0.2, 0.1}}, {"", 0.5, b}}) {
    FixedDetector det({bad});
    try {
      detect(det, ImageBuf(4, 4));
      FAIL("expected a protocol error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Protocol);
    }
  }
}

TEST_CASE("gate acceptance rate over mock images") {
  const FaultProfile faults{0.1, 0.2};
  OracleDetector det;
  const std::size_t n = 2000;
  std::size_t accepted = 0;
  for (std::uint64_t s = 0; s < n; ++s)
    accepted += assess(detect(det, mock_render(prompt_for("red"), s, faults, 64, 64)), {}).verdict == Verdict::Accept;
  CHECK(oracle::within_sigma(static_cast<double>(accepted), n, 0.7));
}

TEST_CASE("reject reason names") {
  for (auto r : {RejectReason::NoCar, RejectReason::MultipleCars, RejectReason::LowConfidence})
    CHECK(parse_reject_reason(to_string(r)) == r);
  CHECK(to_string(RejectReason::MultipleCars) == "multiple_cars");
  CHECK_THROWS_AS(parse_reject_reason("blurry"), Error);
}
