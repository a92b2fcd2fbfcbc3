#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "synthset/common.hpp"

namespace synthset {

/// 8-bit RGB image, row-major, interleaved. Text metadata travels with the
/// pixels and is written as PNG tEXt chunks.
class ImageBuf {
 public:
  static constexpr int kChannels = 3;

  ImageBuf() = default;
  ImageBuf(int width, int height);
  ImageBuf(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t* pixel(int x, int y) {
    return pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }
  const std::uint8_t* pixel(int x, int y) const {
    return pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }

  std::span<std::uint8_t> pixels() { return pixels_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }

  void fill(std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void fill_rect(const PixelRect& rect, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  /// Pixel equality; metadata is ignored.
  bool same_pixels(const ImageBuf& other) const {
    return width_ == other.width_ && height_ == other.height_ && pixels_ == other.pixels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::map<std::string, std::string> metadata_;
};

/// PNG with one tEXt chunk per metadata entry. Deterministic output.
std::vector<std::uint8_t> encode_png(const ImageBuf& image);
ImageBuf decode_png(std::span<const std::uint8_t> bytes);

void write_png_file(const std::string& path, const ImageBuf& image);
ImageBuf read_png_file(const std::string& path);

/// Copy of the pixels inside rect; rect must lie within the image.
ImageBuf crop_pixels(const ImageBuf& image, const PixelRect& rect);

/// Bilinear resample to w x h, pixel-center aligned, aspect ratio not kept.
/// Same-size resize returns the input pixels unchanged.
ImageBuf resize(const ImageBuf& image, int w, int h);

/// Rotation about the image center by `degrees` (counter-clockwise on screen),
/// bilinear sampling, edge replication outside the source. |degrees| < 90.
ImageBuf rotate(const ImageBuf& image, double degrees);

struct AugmentConfig {
  int target_size = 64;
  double rotation_max_degrees = 15.0;
  std::uint64_t rotation_seed = 0;
};

void validate(const AugmentConfig& cfg);

/// Angle for sample `index`, uniform on [-max, +max].
double augment_angle(const AugmentConfig& cfg, std::uint64_t index);

/// rotate(augment_angle) then resize to target_size x target_size.
ImageBuf augment(const ImageBuf& image, const AugmentConfig& cfg, std::uint64_t index);

/// HSV saturation of one RGB pixel in [0, 1].
double saturation(const std::uint8_t* rgb);

}  // namespace synthset
