#include <doctest.h>

#include <chrono>
#include <set>

#include "oracles.hpp"
#include "synthset/synthesis.hpp"

using namespace synthset;

namespace {

PromptText prompt_for(const std::string& color, const std::string& rest = "Volkswagen Golf 2015") {
  const std::string subject = color + " " + rest;
  return {"a photograph of a " + subject + ", on a road", subject};
}

ImageBuf noise_image(int w, int h, std::uint64_t seed) {
  ImageBuf img(w, h);
  Rng rng(seed);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

// Reports a fixed wrong size.
class WrongSizeBackend final : public SynthesisBackend {
 public:
  SynthResult generate(const SynthRequest&) override { return {ImageBuf(10, 10), {"wrong", 0}}; }
  void health_check() override {}
  std::string name() const override { return "wrong"; }
};

}  // namespace

TEST_CASE("mode defaults") {
  const auto t = SynthRequest::defaults_for(Mode::TextToImage);
  CHECK(t.steps == 4);
  CHECK(t.guidance == 0.0);
  CHECK(t.width == 720);
  CHECK(t.height == 720);
  const auto i = SynthRequest::defaults_for(Mode::ImageToImage);
  CHECK(i.steps == 10);
  CHECK(i.guidance == 0.4);
  CHECK(i.strength == 0.6);
}

TEST_CASE("request validation") {
  auto t = SynthRequest::defaults_for(Mode::TextToImage);
  t.prompt = prompt_for("red");
  CHECK_NOTHROW(validate(t));
  t.base_image = ImageBuf(720, 720);
  CHECK_THROWS_AS(validate(t), Error);

  auto i = SynthRequest::defaults_for(Mode::ImageToImage);
  i.prompt = prompt_for("red");
  CHECK_THROWS_AS(validate(i), Error);  // no base image
  i.base_image = ImageBuf(640, 720);
  CHECK_THROWS_AS(validate(i), Error);
  i.base_image = ImageBuf(720, 720);
  CHECK_NOTHROW(validate(i));
  i.strength = 1.5;
  CHECK_THROWS_AS(validate(i), Error);
}

TEST_CASE("image-to-image wire body carries the mode settings") {
  auto req = SynthRequest::defaults_for(Mode::ImageToImage);
  req.prompt = prompt_for("gray");
  req.base_image = ImageBuf(720, 720);
  req.seed = 9;
  const auto body = to_wire(req);
  CHECK(endpoint_for(req.mode) == "/v1/img2img");
  CHECK(body.at("steps") == 10);
  CHECK(body.at("guidance").get<double>() == 0.4);
  CHECK(body.at("strength").get<double>() == 0.6);
  CHECK(body.at("seed") == 9);
  CHECK_FALSE(body.contains("width"));
  CHECK(oracle::schema_errors("img2img_request.schema.json", body).empty());
  const ImageBuf sent = decode_png(base64_decode(body.at("image").get<std::string>()));
  CHECK(sent.same_pixels(*req.base_image));
}

TEST_CASE("text-to-image wire body matches the golden file") {
  auto req = SynthRequest::defaults_for(Mode::TextToImage);
  req.prompt.text =
      "a photograph of a gray Volkswagen Golf VII 2015, on a road, shot from the front, from above, centered";
  req.seed = 42;
  const auto golden = oracle::load_json(oracle::fixture("wire/txt2img_request.json"));
  CHECK(to_wire(req) == golden);
  CHECK(endpoint_for(req.mode) == "/v1/txt2img");
  CHECK(oracle::schema_errors("txt2img_request.schema.json", golden).empty());
  CHECK(wire_equal(from_wire(Mode::TextToImage, golden), req));
}

TEST_CASE("wire round trip over random requests") {
  Rng rng(77);
  const ImageBuf base = noise_image(720, 720, 5);
  for (int i = 0; i < 300; ++i) {
    const Mode mode = rng.below(2) ? Mode::TextToImage : Mode::ImageToImage;
    auto req = SynthRequest::defaults_for(mode);
    req.prompt.text = "prompt " + std::to_string(rng.next()) + " \"quoted\" \\ unicode \xc3\xa4";
    req.steps = 1 + static_cast<int>(rng.below(50));
    req.guidance = rng.uniform(0, 12);
    req.seed = rng.next();
    if (mode == Mode::TextToImage) {
      req.width = 64 + static_cast<int>(rng.below(1024));
      req.height = 64 + static_cast<int>(rng.below(1024));
    } else {
      req.strength = rng.uniform01();
      if (i < 3) req.base_image = base;  // PNG encoding of 720^2 is slow; a few suffice
      else req.base_image = ImageBuf(720, 720);
    }
    const auto body = to_wire(req);
    const auto back = from_wire(mode, nlohmann::json::parse(body.dump()));
    CHECK(wire_equal(back, req));
    CHECK(to_wire(back) == body);
  }
}

TEST_CASE("malformed wire bodies") {
  auto golden = oracle::load_json(oracle::fixture("wire/txt2img_request.json"));
  auto missing = golden;
  missing.erase("steps");
  CHECK_THROWS_AS(from_wire(Mode::TextToImage, missing), Error);
  auto wrong = golden;
  wrong["steps"] = "four";
  CHECK_THROWS_AS(from_wire(Mode::TextToImage, wrong), Error);
  CHECK_THROWS_AS(from_wire(Mode::ImageToImage, golden), Error);
}

TEST_CASE("mock rendering is deterministic") {
  const FaultProfile faults{0.1, 0.2};
  const auto p = prompt_for("blue");
  const ImageBuf a = mock_render(p, 5, faults);
  const ImageBuf b = mock_render(p, 5, faults);
  CHECK(encode_png(a) == encode_png(b));

  std::set<std::uint64_t> hashes;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const ImageBuf img = mock_render(p, s, faults, 48, 48);
    const auto px = img.pixels();
    hashes.insert(fnv1a64({reinterpret_cast<const char*>(px.data()), px.size()}));
  }
  CHECK(hashes.size() == 1000);
}

TEST_CASE("clean mock image holds exactly one car") {
  MockSynthesisBackend backend;
  auto req = SynthRequest::defaults_for(Mode::TextToImage);
  req.prompt = prompt_for("silver");
  for (std::uint64_t s = 0; s < 20; ++s) {
    req.seed = s;
    const auto result = synthesize(backend, req);
    CHECK(result.image.width() == 720);
    CHECK(result.image.height() == 720);
    const auto gt = read_ground_truth(result.image);
    REQUIRE(gt.size() == 1);
    CHECK(is_valid_normalized(gt[0].bbox));
    CHECK(gt[0].color == "silver");
  }
  // Ground truth survives PNG transport.
  const ImageBuf img = decode_png(encode_png(mock_render(req.prompt, 1, {})));
  CHECK(read_ground_truth(img).size() == 1);
}

TEST_CASE("blob count frequencies follow the fault profile") {
  const FaultProfile faults{0.1, 0.2};
  const std::size_t n = 10000;
  std::size_t counts[3] = {0, 0, 0};
  const auto p = prompt_for("green");
  for (std::uint64_t s = 0; s < n; ++s) ++counts[read_ground_truth(mock_render(p, s, faults, 32, 32)).size()];
  CHECK(oracle::within_sigma(static_cast<double>(counts[0]), n, 0.1));
  CHECK(oracle::within_sigma(static_cast<double>(counts[1]), n, 0.7));
  CHECK(oracle::within_sigma(static_cast<double>(counts[2]), n, 0.2));
}

TEST_CASE("the prompt color fills the car") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ImageBuf img = mock_render(prompt_for("red"), s, {});
    const auto gt = read_ground_truth(img);
    REQUIRE(gt.size() == 1);
    const int cx = static_cast<int>((gt[0].bbox.x + gt[0].bbox.w / 2) * img.width());
    const int cy = static_cast<int>((gt[0].bbox.y + gt[0].bbox.h / 2) * img.height());
    const auto* px = img.pixel(cx, cy);
    CHECK(px[0] > px[1]);
    CHECK(px[0] > px[2]);
  }
  CHECK(mock_color("white")[0] > 200);
  CHECK(mock_color("black")[0] < 60);
}

TEST_CASE("image-to-image mock keeps the base size") {
  MockSynthesisBackend backend;
  auto req = SynthRequest::defaults_for(Mode::ImageToImage);
  req.prompt = prompt_for("brown");
  req.base_image = procedural_base_pool(1, 0.1).images.at(0).image;
  const auto result = synthesize(backend, req);
  CHECK(result.image.width() == 720);
  CHECK(result.info.latency_seconds == 2.33);
  CHECK(read_ground_truth(result.image).size() == 1);
}

TEST_CASE("latency is the wall clock around the call") {
  MockBackendConfig cfg;
  cfg.simulated_t2i_seconds.reset();
  MockSynthesisBackend backend(cfg);
  auto req = SynthRequest::defaults_for(Mode::TextToImage);
  req.prompt = prompt_for("blue");
  for (int i = 0; i < 5; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const auto result = synthesize(backend, req);
    const std::chrono::duration<double> outer = std::chrono::steady_clock::now() - start;
    CHECK(result.info.latency_seconds >= 0.0);
    CHECK(result.info.latency_seconds <= outer.count());
    CHECK(outer.count() - result.info.latency_seconds < 0.005);
  }
  MockSynthesisBackend simulated;
  CHECK(synthesize(simulated, req).info.latency_seconds == 0.85);
}

TEST_CASE("backend answering with the wrong size is off-contract") {
  WrongSizeBackend backend;
  auto req = SynthRequest::defaults_for(Mode::TextToImage);
  req.prompt = prompt_for("blue");
  try {
    synthesize(backend, req);
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }
}

TEST_CASE("retry backs off on transport errors only") {
  std::vector<double> sleeps;
  const Sleeper record = [&](std::chrono::duration<double> d) { sleeps.push_back(d.count()); };
  const RetryPolicy policy;

  int calls = 0;
  const int value = with_retry(
      [&] {
        if (++calls < 3) throw Error(ErrorKind::Transport, "down");
        return 7;
      },
      policy, record);
  CHECK(value == 7);
  CHECK(sleeps == std::vector<double>{0.5, 1.0});

  sleeps.clear();
  calls = 0;
  CHECK_THROWS_AS(with_retry([&]() -> int { ++calls; throw Error(ErrorKind::Transport, "down"); }, policy, record),
                  Error);
  CHECK(calls == 5);
  CHECK(sleeps == std::vector<double>{0.5, 1.0, 2.0, 4.0});

  sleeps.clear();
  calls = 0;
  CHECK_THROWS_AS(with_retry([&]() -> int { ++calls; throw Error(ErrorKind::Request, "bad"); }, policy, record),
                  Error);
  CHECK(calls == 1);
  CHECK(sleeps.empty());
}

TEST_CASE("prepare_base geometry") {
  SUBCASE("full frame without padding is a pure resize") {
    const ImageBuf img = noise_image(300, 200, 1);
    CHECK(prepare_base(img, {0, 0, 1, 1}, 0.0).same_pixels(resize(img, 720, 720)));
    const ImageBuf square = noise_image(720, 720, 2);
    CHECK(prepare_base(square, {0, 0, 1, 1}, 0.0).same_pixels(square));
  }
  SUBCASE("padding grows the crop on every side") {
    const ImageBuf img = noise_image(1000, 1000, 3);
    CHECK(padded_pixel_rect(1000, 1000, {0.25, 0.25, 0.5, 0.5}, 0.1) == PixelRect{200, 200, 600, 600});
    CHECK(prepare_base(img, {0.25, 0.25, 0.5, 0.5}, 0.1)
              .same_pixels(resize(crop_pixels(img, {200, 200, 600, 600}), 720, 720)));
  }
  SUBCASE("padding past the border is clipped") {
    const ImageBuf img = noise_image(500, 400, 4);
    CHECK(padded_pixel_rect(500, 400, {0.9, 0.9, 0.2, 0.2}, 0.1) == PixelRect{440, 352, 60, 48});
    const ImageBuf out = prepare_base(img, {0.9, 0.9, 0.2, 0.2}, 0.1);
    CHECK(out.width() == 720);
    CHECK(out.height() == 720);
  }
  SUBCASE("zero area is an input error") {
    try {
      prepare_base(noise_image(100, 100, 5), {1.0, 0.2, 0.0, 0.3}, 0.0);
      FAIL("expected an input error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Input);
    }
  }
  SUBCASE("random cases agree with the arithmetic oracle") {
    Rng rng(12);
    for (int i = 0; i < 1000; ++i) {
      const int W = 1 + static_cast<int>(rng.below(1500)), H = 1 + static_cast<int>(rng.below(1500));
      const double x = rng.uniform01(), y = rng.uniform01();
      const Rect b{x, y, rng.uniform01() * (1 - x), rng.uniform01() * (1 - y)};
      const double pad = rng.uniform(0, 0.5);
      const auto o = oracle::padded_rect(W, H, b.x, b.y, b.w, b.h, pad);
      const auto r = padded_pixel_rect(W, H, b, pad);
      CHECK(r.x == o.x0);
      CHECK(r.y == o.y0);
      CHECK(r.w == o.w());
      CHECK(r.h == o.h());
    }
  }
}

TEST_CASE("base pool documents") {
  oracle::TempDir dir("pool");
  ImageBuf img = noise_image(160, 90, 8);
  write_png_file(dir.sub("a.png"), img);
  {
    std::ofstream out(dir.sub("pool.json"));
    out << R"({"images":[{"path":"a.png","bbox":[0.25,0.2,0.5,0.6],"brand":"Peugeot","source_id":"cam1-1"}]})";
  }
  const auto pool = load_base_pool(dir.sub("pool.json"), {"Volkswagen", "Ford"});
  REQUIRE(pool.images.size() == 1);
  CHECK(pool.images[0].image.width() == 720);
  CHECK(pool.images[0].brand == "Peugeot");
  CHECK(pool.images[0].image.same_pixels(prepare_base(img, {0.25, 0.2, 0.5, 0.6}, 0.1)));
  CHECK_THROWS_AS(load_base_pool(dir.sub("pool.json"), {"Peugeot"}), Error);
  CHECK_THROWS_AS(load_base_pool(dir.sub("missing.json"), {}), Error);

  const auto proc = procedural_base_pool(4, 0.1);
  REQUIRE(proc.images.size() == 4);
  for (const auto& b : proc.images) {
    CHECK(b.image.width() == 720);
    CHECK(b.image.height() == 720);
  }
}
