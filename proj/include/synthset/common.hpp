#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace synthset {

enum class ErrorKind {
  Parse,        // malformed input document
  Config,       // invalid configuration or unsatisfiable plan
  Input,        // invalid argument to an operation
  Template,     // bad prompt template
  Transport,    // backend unreachable or timed out (retryable)
  Request,      // backend rejected the request (permanent)
  Protocol,     // backend answered with something off-contract
  Consistency,  // on-disk state disagrees with itself
  Quota,        // a slot ran out of attempts
  Interrupted,  // run stopped on request
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return kind_ == ErrorKind::Transport; }

 private:
  ErrorKind kind_;
};

// Process exit code for an error kind: 2 config, 3 backend, 4 quota, 1 otherwise.
int exit_code_for(ErrorKind kind);

/// Synthesis mode. Serialized as "t2i" / "i2i".
enum class Mode { TextToImage, ImageToImage };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// Seedable generator with a portable output sequence.
///
/// The engine is std::mt19937_64, whose output is fixed by the standard. The
/// mapping to bounded integers and doubles is done here rather than through
/// std distributions so results match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Independent substream seed for (seed, stream...) tuples.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Axis-aligned rectangle in normalized image coordinates, (x, y) top-left.
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const Rect&) const = default;
};

/// All coordinates in [0,1], x+w <= 1, y+h <= 1, positive extent.
bool is_valid_normalized(const Rect& r, double tolerance = 1e-9);

double iou(const Rect& a, const Rect& b);

/// Integer rectangle in pixel coordinates.
struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const PixelRect&) const = default;
  long area() const { return static_cast<long>(w) * h; }
};

/// floor(v + 0.5); the only rounding convention used for pixel geometry.
long round_half_up(double v);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace synthset
