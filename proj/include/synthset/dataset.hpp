#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "synthset/common.hpp"
#include "synthset/quality.hpp"

namespace synthset {

/// One accepted sample with its label and provenance.
struct SampleRecord {
  std::string id;  // zero-padded position in the manifest
  std::uint64_t slot = 0;  // label draw index that produced it
  std::string image_path;  // relative to the dataset root
  std::string brand;
  int brand_index = 0;
  std::string model;
  int year = 0;
  std::string color;
  Mode mode = Mode::TextToImage;
  std::string prompt;
  Rect bbox;  // in the synthesized image, before cropping
  double gate_score = 0.0;
  std::string backend_model;
  double latency_seconds = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const SampleRecord&) const = default;
};

std::string format_record_id(std::size_t index);

/// Directory-safe form of a brand name.
std::string brand_dir(std::string_view brand);
std::string image_rel_path(std::string_view brand, std::string_view id);
std::string label_rel_path(std::string_view brand, std::string_view id);

nlohmann::json to_json(const SampleRecord& r);
SampleRecord record_from_json(const nlohmann::json& j);

inline constexpr std::string_view kManifestFormat = "synthset-manifest/1";

struct DatasetManifest {
  std::string config_digest;
  std::vector<SampleRecord> records;
  std::map<std::string, std::size_t> rejected_counts;
};

/// In-memory append; record.id must equal the current count.
void append_record(DatasetManifest& manifest, SampleRecord record);

/// Header line followed by one compact JSON object per record.
std::string serialize_manifest(const DatasetManifest& manifest);

struct ManifestReadResult {
  DatasetManifest manifest;
  bool truncated_tail = false;  // an unterminated last line was ignored
};

/// Parses manifest.jsonl text. A final line without '\n' is a write cut short
/// by a crash and is skipped.
ManifestReadResult parse_manifest(std::string_view text);
ManifestReadResult read_manifest_file(const std::string& path);

/// Line-delimited append-only file, flushed after every line.
class JsonlAppender {
 public:
  JsonlAppender() = default;
  explicit JsonlAppender(const std::string& path, bool truncate = false);
  JsonlAppender(JsonlAppender&& other) noexcept;
  JsonlAppender& operator=(JsonlAppender&& other) noexcept;
  JsonlAppender(const JsonlAppender&) = delete;
  JsonlAppender& operator=(const JsonlAppender&) = delete;
  ~JsonlAppender();

  void append_line(std::string_view line);

 private:
  std::FILE* file_ = nullptr;
  std::string path_;
};

/// Durable manifest writer. Opening an existing manifest drops an unterminated
/// tail line and continues after the last complete record.
class ManifestWriter {
 public:
  static ManifestWriter create(const std::string& path, const std::string& config_digest);
  static ManifestWriter open_existing(const std::string& path);

  void append(const SampleRecord& record);
  std::size_t size() const { return count_; }
  const std::string& config_digest() const { return digest_; }

 private:
  ManifestWriter(JsonlAppender out, std::string digest, std::size_t count)
      : out_(std::move(out)), digest_(std::move(digest)), count_(count) {}

  JsonlAppender out_;
  std::string digest_;
  std::size_t count_;
};

// ---------------------------------------------------------------------------
// Detector-style label files: "<class> <cx> <cy> <w> <h>", 6 decimals.

struct LabelLine {
  int class_index = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

LabelLine label_from_record(const SampleRecord& record);
std::string format_label_line(const LabelLine& label);
std::string write_label_file(const SampleRecord& record);
LabelLine parse_label_line(std::string_view line);

// ---------------------------------------------------------------------------
// Rejected attempts, one JSON object per line.

struct RejectionEvent {
  std::uint64_t slot = 0;
  int attempt = 0;
  std::string brand;
  std::string model;
  RejectReason reason = RejectReason::NoCar;

  bool operator==(const RejectionEvent&) const = default;
};

nlohmann::json to_json(const RejectionEvent& e);
RejectionEvent rejection_from_json(const nlohmann::json& j);
std::vector<RejectionEvent> read_rejections_file(const std::string& path);

// ---------------------------------------------------------------------------
// Real evaluation data and the camera/time split.

enum class Split { Validation, Test };

std::string_view to_string(Split s);

struct RealSample {
  std::string image_path;
  std::string brand;
  std::string camera_id;
  std::int64_t recorded_at = 0;  // UTC seconds

  bool operator==(const RealSample&) const = default;
};

struct SplitRule {
  std::int64_t bucket_seconds = 3600;
  std::map<std::pair<std::string, std::int64_t>, Split> assignment;
};

std::int64_t time_bucket(std::int64_t recorded_at, std::int64_t bucket_seconds);

/// {"bucket_seconds": 3600,
///  "assignments": [{"camera": "c1", "bucket": 0, "split": "validation"}]}
SplitRule parse_split_rule(const nlohmann::json& doc);
SplitRule read_split_rule_file(const std::string& path);

/// CSV with header image_path,brand,camera_id,recorded_at.
std::vector<RealSample> parse_real_samples(std::string_view text,
                                           const std::vector<std::string>& brands);
std::vector<RealSample> read_real_samples_file(const std::string& path,
                                               const std::vector<std::string>& brands);

struct BrandSplitCount {
  std::string brand;
  std::size_t validation = 0;
  std::size_t test = 0;
};

struct SplitResult {
  std::vector<RealSample> validation;
  std::vector<RealSample> test;
  std::vector<BrandSplitCount> table;  // one row per configured brand
};

/// Partitions samples by (camera, time bucket). Throws Config naming every
/// unassigned key.
SplitResult split_real(const std::vector<RealSample>& samples, const SplitRule& rule,
                       const std::vector<std::string>& brands);

std::string render_split_table(const SplitResult& result);

// ---------------------------------------------------------------------------

struct DatasetStats {
  std::size_t total = 0;
  std::vector<std::pair<std::string, std::size_t>> per_brand;  // configured order
  std::map<std::string, std::size_t> per_mode;
  std::map<std::string, std::size_t> per_color;
  std::map<std::string, std::size_t> per_model;  // "brand model"
  bool balanced = false;  // every configured brand has the same count
};

DatasetStats dataset_stats(const std::vector<SampleRecord>& records,
                           const std::vector<std::string>& brands);

std::string render_stats(const DatasetStats& stats);

/// What a dataset directory is checked against.
struct DatasetExpectations {
  std::vector<std::string> brands;
  std::optional<std::size_t> quota_per_brand;  // quota runs only
  std::size_t planned_total = 0;
  int image_size = 64;
  std::string config_digest;
};

struct ValidationReport {
  std::size_t records = 0;
  std::size_t rejections = 0;
  bool complete = false;
  bool truncated_tail = false;  // an interrupted append, ignored by readers
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
};

/// Checks manifest structure, ids, labels, files and quotas under `dir`.
ValidationReport validate_dataset(const std::string& dir, const DatasetExpectations& expect,
                                  bool check_images = true);

}  // namespace synthset
