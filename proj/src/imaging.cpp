#include "synthset/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace synthset {

ImageBuf::ImageBuf(int width, int height) : ImageBuf(width, height, {}) {}

ImageBuf::ImageBuf(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0)
    throw Error(ErrorKind::Input, "image dimensions must be positive");
  const std::size_t expected = static_cast<std::size_t>(width) * height * kChannels;
  if (pixels_.empty()) pixels_.assign(expected, 0);
  if (pixels_.size() != expected)
    throw Error(ErrorKind::Input, "pixel buffer length does not match dimensions");
}

void ImageBuf::fill(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (std::size_t i = 0; i < pixels_.size(); i += kChannels) {
    pixels_[i] = r;
    pixels_[i + 1] = g;
    pixels_[i + 2] = b;
  }
}

void ImageBuf::fill_rect(const PixelRect& rect, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int x0 = std::max(0, rect.x), y0 = std::max(0, rect.y);
  const int x1 = std::min(width_, rect.x + rect.w), y1 = std::min(height_, rect.y + rect.h);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      auto* p = pixel(x, y);
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
  }
}

ImageBuf crop_pixels(const ImageBuf& image, const PixelRect& rect) {
  if (rect.w <= 0 || rect.h <= 0 || rect.x < 0 || rect.y < 0 ||
      rect.x + rect.w > image.width() || rect.y + rect.h > image.height())
    throw Error(ErrorKind::Input, "crop rectangle outside image");
  ImageBuf out(rect.w, rect.h);
  const std::size_t row_bytes = static_cast<std::size_t>(rect.w) * ImageBuf::kChannels;
  for (int y = 0; y < rect.h; ++y)
    std::copy_n(image.pixel(rect.x, rect.y + y), row_bytes, out.pixel(0, y));
  return out;
}

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(round_half_up(v), 0, 255));
}

// Bilinear sample with coordinates clamped to the pixel grid (edge replication).
void sample_bilinear(const ImageBuf& img, double sx, double sy, std::uint8_t* out) {
  sx = std::clamp(sx, 0.0, static_cast<double>(img.width() - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = sx - x0, fy = sy - y0;
  const auto* p00 = img.pixel(x0, y0);
  const auto* p10 = img.pixel(x1, y0);
  const auto* p01 = img.pixel(x0, y1);
  const auto* p11 = img.pixel(x1, y1);
  for (int c = 0; c < ImageBuf::kChannels; ++c) {
    const double top = p00[c] + (p10[c] - p00[c]) * fx;
    const double bottom = p01[c] + (p11[c] - p01[c]) * fx;
    out[c] = to_byte(top + (bottom - top) * fy);
  }
}

}  // namespace

ImageBuf resize(const ImageBuf& image, int w, int h) {
  if (w < 1 || h < 1) throw Error(ErrorKind::Input, "resize target must be at least 1x1");
  if (w == image.width() && h == image.height()) return ImageBuf(w, h, {image.pixels().begin(), image.pixels().end()});
  ImageBuf out(w, h);
  const double scale_x = static_cast<double>(image.width()) / w;
  const double scale_y = static_cast<double>(image.height()) / h;
  for (int y = 0; y < h; ++y) {
    const double sy = (y + 0.5) * scale_y - 0.5;
    for (int x = 0; x < w; ++x) sample_bilinear(image, (x + 0.5) * scale_x - 0.5, sy, out.pixel(x, y));
  }
  return out;
}

ImageBuf rotate(const ImageBuf& image, double degrees) {
  if (!(std::abs(degrees) < 90.0))
    throw Error(ErrorKind::Input, "rotation must be strictly within (-90, 90) degrees");
  if (degrees == 0.0) return ImageBuf(image.width(), image.height(), {image.pixels().begin(), image.pixels().end()});
  ImageBuf out(image.width(), image.height());
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cx = (image.width() - 1) / 2.0, cy = (image.height() - 1) / 2.0;
  // Inverse map each output pixel back into the source. With y pointing down,
  // a counter-clockwise on-screen rotation maps source (u,v) to
  // (c*u + s*v, -s*u + c*v); its inverse is applied here.
  for (int y = 0; y < image.height(); ++y) {
    const double dy = y - cy;
    for (int x = 0; x < image.width(); ++x) {
      const double dx = x - cx;
      const double sx = c * dx - s * dy + cx;
      const double sy = s * dx + c * dy + cy;
      sample_bilinear(image, sx, sy, out.pixel(x, y));
    }
  }
  return out;
}

void validate(const AugmentConfig& cfg) {
  if (cfg.target_size < 8) throw Error(ErrorKind::Config, "target_size must be at least 8");
  if (!(cfg.rotation_max_degrees >= 0.0 && cfg.rotation_max_degrees < 90.0))
    throw Error(ErrorKind::Config, "rotation_max_degrees must be in [0, 90)");
}

double augment_angle(const AugmentConfig& cfg, std::uint64_t index) {
  if (cfg.rotation_max_degrees == 0.0) return 0.0;
  Rng rng(derive_seed(cfg.rotation_seed, index));
  return rng.uniform(-cfg.rotation_max_degrees, cfg.rotation_max_degrees);
}

ImageBuf augment(const ImageBuf& image, const AugmentConfig& cfg, std::uint64_t index) {
  validate(cfg);
  const double angle = augment_angle(cfg, index);
  if (angle == 0.0) return resize(image, cfg.target_size, cfg.target_size);
  return resize(rotate(image, angle), cfg.target_size, cfg.target_size);
}

double saturation(const std::uint8_t* rgb) {
  const int mx = std::max({rgb[0], rgb[1], rgb[2]});
  const int mn = std::min({rgb[0], rgb[1], rgb[2]});
  return mx == 0 ? 0.0 : static_cast<double>(mx - mn) / mx;
}

}  // namespace synthset
