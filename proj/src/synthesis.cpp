#include "synthset/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace synthset {

using nlohmann::json;

SynthRequest SynthRequest::defaults_for(Mode mode) {
  SynthRequest req;
  req.mode = mode;
  if (mode == Mode::TextToImage) {
    req.steps = 4;
    req.guidance = 0.0;
  } else {
    req.steps = 10;
    req.guidance = 0.4;
    req.strength = 0.6;
    req.width = kBaseImageSize;
    req.height = kBaseImageSize;
  }
  return req;
}

void validate(const SynthRequest& req) {
  if (req.prompt.text.empty()) throw Error(ErrorKind::Input, "empty prompt");
  if (req.steps <= 0) throw Error(ErrorKind::Input, "steps must be positive");
  if (!(req.guidance >= 0.0)) throw Error(ErrorKind::Input, "guidance must be non-negative");
  if (req.width <= 0 || req.height <= 0)
    throw Error(ErrorKind::Input, "output dimensions must be positive");
  if (req.mode == Mode::ImageToImage) {
    if (!(req.strength >= 0.0 && req.strength <= 1.0))
      throw Error(ErrorKind::Input, "strength must be in [0, 1]");
    if (!req.base_image) throw Error(ErrorKind::Input, "image-to-image needs a base image");
    if (req.base_image->width() != kBaseImageSize || req.base_image->height() != kBaseImageSize)
      throw Error(ErrorKind::Input, "base image must be 720x720");
    if (req.width != req.base_image->width() || req.height != req.base_image->height())
      throw Error(ErrorKind::Input, "image-to-image output size follows the base image");
  } else if (req.base_image) {
    throw Error(ErrorKind::Input, "text-to-image takes no base image");
  }
}

std::string endpoint_for(Mode mode) {
  return mode == Mode::TextToImage ? "/v1/txt2img" : "/v1/img2img";
}

json to_wire(const SynthRequest& req) {
  json body;
  body["prompt"] = req.prompt.text;
  body["steps"] = req.steps;
  body["guidance"] = req.guidance;
  body["seed"] = req.seed;
  if (req.mode == Mode::TextToImage) {
    body["width"] = req.width;
    body["height"] = req.height;
  } else {
    body["strength"] = req.strength;
    body["image"] = base64_encode(encode_png(*req.base_image));
  }
  return body;
}

namespace {

template <typename T>
T field(const json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end()) throw Error(ErrorKind::Parse, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Parse, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

SynthRequest from_wire(Mode mode, const json& body) {
  if (!body.is_object()) throw Error(ErrorKind::Parse, "request body must be an object");
  SynthRequest req = SynthRequest::defaults_for(mode);
  req.prompt.text = field<std::string>(body, "prompt");
  req.steps = field<int>(body, "steps");
  req.guidance = field<double>(body, "guidance");
  req.seed = field<std::uint64_t>(body, "seed");
  if (mode == Mode::TextToImage) {
    req.width = field<int>(body, "width");
    req.height = field<int>(body, "height");
  } else {
    req.strength = field<double>(body, "strength");
    const auto bytes = base64_decode(field<std::string>(body, "image"));
    req.base_image = decode_png(bytes);
    req.width = req.base_image->width();
    req.height = req.base_image->height();
  }
  return req;
}

bool wire_equal(const SynthRequest& a, const SynthRequest& b) {
  if (a.mode != b.mode || a.prompt.text != b.prompt.text || a.steps != b.steps ||
      a.guidance != b.guidance || a.seed != b.seed)
    return false;
  if (a.mode == Mode::TextToImage) return a.width == b.width && a.height == b.height;
  return a.strength == b.strength && a.base_image.has_value() == b.base_image.has_value() &&
         (!a.base_image || a.base_image->same_pixels(*b.base_image));
}

SynthResult synthesize(SynthesisBackend& backend, const SynthRequest& req) {
  validate(req);
  const auto start = std::chrono::steady_clock::now();
  SynthResult result = backend.generate(req);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  if (result.image.width() != req.width || result.image.height() != req.height)
    throw Error(ErrorKind::Protocol,
                "backend returned " + std::to_string(result.image.width()) + "x" +
                    std::to_string(result.image.height()) + ", requested " +
                    std::to_string(req.width) + "x" + std::to_string(req.height));
  result.info.latency_seconds = backend.simulated_latency(req.mode).value_or(elapsed.count());
  if (result.info.model_name.empty()) result.info.model_name = backend.name();
  return result;
}

Sleeper real_sleeper() {
  return [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

// ---------------------------------------------------------------------------

PixelRect padded_pixel_rect(int width, int height, const Rect& bbox, double padding_fraction) {
  if (!(padding_fraction >= 0.0)) throw Error(ErrorKind::Input, "padding must be non-negative");
  const double pad_x = bbox.w * padding_fraction;
  const double pad_y = bbox.h * padding_fraction;
  const double x0 = std::clamp(bbox.x - pad_x, 0.0, 1.0);
  const double y0 = std::clamp(bbox.y - pad_y, 0.0, 1.0);
  const double x1 = std::clamp(bbox.x + bbox.w + pad_x, 0.0, 1.0);
  const double y1 = std::clamp(bbox.y + bbox.h + pad_y, 0.0, 1.0);
  const long px0 = round_half_up(x0 * width), px1 = round_half_up(x1 * width);
  const long py0 = round_half_up(y0 * height), py1 = round_half_up(y1 * height);
  return {static_cast<int>(px0), static_cast<int>(py0), static_cast<int>(px1 - px0),
          static_cast<int>(py1 - py0)};
}

ImageBuf prepare_base(const ImageBuf& image, const Rect& bbox, double padding_fraction) {
  const PixelRect rect = padded_pixel_rect(image.width(), image.height(), bbox, padding_fraction);
  if (rect.w <= 0 || rect.h <= 0)
    throw Error(ErrorKind::Input, "base bbox has zero area after clipping");
  return resize(crop_pixels(image, rect), kBaseImageSize, kBaseImageSize);
}

BasePool load_base_pool(const std::string& path, const std::vector<std::string>& excluded_brands) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open base pool '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, "base pool '" + path + "': " + e.what());
  }
  BasePool pool;
  pool.padding_fraction = doc.value("padding_fraction", 0.1);
  const auto dir = std::filesystem::path(path).parent_path();
  for (const auto& item : doc.at("images")) {
    const std::string brand = item.value("brand", "");
    if (std::find(excluded_brands.begin(), excluded_brands.end(), brand) != excluded_brands.end())
      throw Error(ErrorKind::Config, "base image brand '" + brand +
                                         "' is one of the classified brands");
    const auto b = item.at("bbox");
    const Rect bbox{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                    b.at(3).get<double>()};
    const auto image_path = dir / item.at("path").get<std::string>();
    BaseImage base;
    base.image = prepare_base(read_png_file(image_path.string()), bbox, pool.padding_fraction);
    base.source_id = item.value("source_id", image_path.filename().string());
    base.brand = brand;
    pool.images.push_back(std::move(base));
  }
  if (pool.images.empty()) throw Error(ErrorKind::Config, "base pool is empty");
  return pool;
}

BasePool procedural_base_pool(std::size_t count, double padding_fraction) {
  BasePool pool;
  pool.padding_fraction = padding_fraction;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(0xBA5E, i));
    ImageBuf photo(960, 540);
    for (int y = 0; y < photo.height(); ++y) {
      const auto v = static_cast<std::uint8_t>(70 + y * 90 / photo.height());
      for (int x = 0; x < photo.width(); ++x) {
        auto* p = photo.pixel(x, y);
        p[0] = p[1] = p[2] = static_cast<std::uint8_t>(v + ((x / 24 + y / 24) % 2) * 6);
      }
    }
    const Rect bbox{rng.uniform(0.1, 0.5), rng.uniform(0.2, 0.5), 0.3, 0.35};
    const PixelRect car{static_cast<int>(bbox.x * 960), static_cast<int>(bbox.y * 540),
                        static_cast<int>(bbox.w * 960), static_cast<int>(bbox.h * 540)};
    photo.fill_rect(car, 60, 60, 64);
    BaseImage base;
    base.image = prepare_base(photo, bbox, padding_fraction);
    base.source_id = "procedural-" + std::to_string(i);
    base.brand = "unlisted";
    pool.images.push_back(std::move(base));
  }
  return pool;
}

// ---------------------------------------------------------------------------

std::array<std::uint8_t, 3> mock_color(std::string_view color) {
  if (color == "black") return {25, 25, 28};
  if (color == "white") return {236, 236, 236};
  if (color == "gray" || color == "grey") return {128, 128, 128};
  if (color == "silver") return {192, 192, 200};
  if (color == "blue") return {30, 60, 200};
  if (color == "red") return {205, 30, 30};
  if (color == "green") return {40, 150, 60};
  if (color == "brown") return {125, 72, 30};
  if (color == "yellow") return {225, 200, 30};
  if (color == "orange") return {230, 120, 20};
  return {128, 128, 128};
}

namespace {

constexpr std::array<std::uint8_t, 3> kFrameColor = {250, 190, 20};

bool is_known_color(std::string_view word) {
  static const std::vector<std::string> known = {"black", "white", "gray",   "grey",
                                                 "silver", "blue", "red",    "green",
                                                 "brown",  "yellow", "orange"};
  return std::find(known.begin(), known.end(), word) != known.end();
}

std::string color_word(const PromptText& prompt) {
  const auto subject_words = split(prompt.subject_substring, ' ');
  if (!subject_words.empty() && is_known_color(subject_words.front()))
    return subject_words.front();
  std::string word;
  for (char c : prompt.text + " ") {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      if (is_known_color(word)) return word;
      word.clear();
    }
  }
  return "gray";
}

// Blob placed inside [x_lo, x_hi) x [0, height), width a fraction of the image.
PixelRect place_blob(Rng& rng, int x_lo, int x_hi, int width, int height, double w_lo,
                     double w_hi) {
  const int margin = std::max(1, width / 100);
  int bw = static_cast<int>(rng.uniform(w_lo, w_hi) * width);
  int bh = static_cast<int>(rng.uniform(0.2, 0.4) * height);
  bw = std::clamp(bw, 1, std::max(1, x_hi - x_lo - 2 * margin));
  bh = std::clamp(bh, 1, std::max(1, height - 2 * margin));
  const int x_span = std::max(1, x_hi - x_lo - 2 * margin - bw + 1);
  const int y_span = std::max(1, height - 2 * margin - bh + 1);
  const int x = x_lo + margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(x_span)));
  const int y = margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(y_span)));
  return {x, y, bw, bh};
}

void draw_car(ImageBuf& img, const PixelRect& r, const std::array<std::uint8_t, 3>& body) {
  const int t = std::max(2, std::min(r.w, r.h) / 12);
  img.fill_rect(r, kFrameColor[0], kFrameColor[1], kFrameColor[2]);
  if (r.w > 2 * t && r.h > 2 * t)
    img.fill_rect({r.x + t, r.y + t, r.w - 2 * t, r.h - 2 * t}, body[0], body[1], body[2]);
}

}  // namespace

ImageBuf mock_render(const PromptText& prompt, std::uint64_t seed, const FaultProfile& faults,
                     int width, int height, const ImageBuf* base) {
  Rng rng(derive_seed(fnv1a64(prompt.text), seed));
  const double u = rng.uniform01();
  const int blob_count = u < faults.p_zero_cars ? 0 : u < faults.p_zero_cars + faults.p_two_cars ? 2 : 1;

  ImageBuf img(width, height);
  const int level = 90 + static_cast<int>(rng.below(70));
  const int tint[3] = {static_cast<int>(rng.below(13)) - 6, static_cast<int>(rng.below(13)) - 6,
                       static_cast<int>(rng.below(13)) - 6};
  const int phase = static_cast<int>(rng.below(17));
  const ImageBuf* background = base;
  ImageBuf resized;
  if (base && (base->width() != width || base->height() != height)) {
    resized = resize(*base, width, height);
    background = &resized;
  }
  for (int y = 0; y < height; ++y) {
    auto* row = img.pixel(0, y);
    for (int x = 0; x < width; ++x) {
      int v = level + ((x * 3 + y * 5 + phase) % 17) - 8;
      if (background) {
        const auto* b = background->pixel(x, y);
        const int luma = (b[0] * 77 + b[1] * 150 + b[2] * 29) >> 8;
        v = (v + 80 + luma * 100 / 255) / 2;
      }
      for (int c = 0; c < 3; ++c) row[x * 3 + c] = static_cast<std::uint8_t>(std::clamp(v + tint[c], 0, 255));
    }
  }

  const std::string color = color_word(prompt);
  const auto body = mock_color(color);
  std::vector<PixelRect> blobs;
  if (blob_count == 1) {
    blobs.push_back(place_blob(rng, 0, width, width, height, 0.25, 0.5));
  } else if (blob_count == 2) {
    const int half = width / 2;
    blobs.push_back(place_blob(rng, 0, half - width / 50, width, height, 0.15, 0.3));
    blobs.push_back(place_blob(rng, half + width / 50, width, width, height, 0.15, 0.3));
  }

  json gt;
  gt["blobs"] = json::array();
  for (const auto& r : blobs) {
    draw_car(img, r, body);
    gt["blobs"].push_back({{"bbox",
                            {static_cast<double>(r.x) / width, static_cast<double>(r.y) / height,
                             static_cast<double>(r.w) / width, static_cast<double>(r.h) / height}},
                           {"color", color}});
  }
  img.metadata()[kGroundTruthKey] = gt.dump();
  return img;
}

std::vector<GroundTruthBlob> read_ground_truth(const ImageBuf& image) {
  const auto it = image.metadata().find(kGroundTruthKey);
  if (it == image.metadata().end())
    throw Error(ErrorKind::Protocol, "image carries no ground-truth metadata");
  std::vector<GroundTruthBlob> out;
  try {
    const json gt = json::parse(it->second);
    for (const auto& b : gt.at("blobs")) {
      const auto& box = b.at("bbox");
      out.push_back({{box.at(0).get<double>(), box.at(1).get<double>(), box.at(2).get<double>(),
                      box.at(3).get<double>()},
                     b.at("color").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Protocol, std::string("bad ground-truth metadata: ") + e.what());
  }
  return out;
}

SynthResult MockSynthesisBackend::generate(const SynthRequest& req) {
  const ImageBuf* base = req.base_image ? &*req.base_image : nullptr;
  return {mock_render(req.prompt, req.seed, cfg_.faults, req.width, req.height, base),
          {cfg_.model_name, 0.0}};
}

std::optional<double> MockSynthesisBackend::simulated_latency(Mode mode) const {
  return mode == Mode::TextToImage ? cfg_.simulated_t2i_seconds : cfg_.simulated_i2i_seconds;
}

}  // namespace synthset
