#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "synthset/catalog.hpp"
#include "synthset/dataset.hpp"
#include "synthset/imaging.hpp"
#include "synthset/quality.hpp"
#include "synthset/sampler.hpp"
#include "synthset/synthesis.hpp"

namespace synthset {

struct SynthesisConfig {
  std::string backend = "mock";  // mock | http
  std::string url;
  double timeout_seconds = 120.0;
  int size = kDefaultOutputSize;  // text-to-image output edge length

  int t2i_steps = 4;
  double t2i_guidance = 0.0;
  int i2i_steps = 10;
  double i2i_guidance = 0.4;
  double i2i_strength = 0.6;

  std::string base_pool_path;  // empty: procedural pool
  double padding_fraction = 0.1;
  RetryPolicy retry;

  // mock only
  FaultProfile faults;
  std::string latency = "simulated";  // simulated | wall
  double simulated_t2i_seconds = 0.85;
  double simulated_i2i_seconds = 2.33;
};

struct DetectorConfig {
  std::string kind = "mock-oracle";  // mock-oracle | mock-blob | http
  std::string url;
  double timeout_seconds = 60.0;
  GateConfig gate;
};

struct PipelineConfig {
  std::string catalog_path;
  CatalogFilter filter;
  SamplePlan plan;
  std::string prompt_template = default_prompt_template();
  SynthesisConfig synthesis;
  DetectorConfig detector;
  AugmentConfig augment;
  bool augment_enabled = true;
  std::string output_dir = "dataset";
  int workers = 1;
  int max_attempts_per_slot = 10;
  bool keep_rejected = false;
};

/// Reads a config document. Relative paths resolve against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
PipelineConfig load_config_file(const std::string& path);
nlohmann::json to_json(const PipelineConfig& cfg);

/// Throws Config on invalid values or missing referenced files.
void validate(const PipelineConfig& cfg);

/// The snapshot stored as <output>/config.json: everything that shapes the
/// dataset content plus the catalog's digest. Output directory and worker
/// count are left out, so they may change between a run and its resume.
nlohmann::json config_snapshot(const PipelineConfig& cfg);
std::string snapshot_text(const nlohmann::json& snapshot);
std::string digest_of(std::string_view text);

struct RunStats {
  std::size_t accepted = 0;
  std::map<std::string, std::size_t> rejected;  // reason -> count
  std::size_t attempts = 0;
  double wall_seconds = 0.0;
  std::map<Mode, double> mean_latency_seconds;
};

nlohmann::json to_json(const RunStats& stats);

struct RunResult {
  DatasetManifest manifest;
  RunStats stats;
};

struct RunControl {
  /// Stop with an Interrupted error once this many records were written by
  /// this invocation.
  std::optional<std::size_t> stop_after_records;
  /// Backends to use instead of the ones the config names.
  std::shared_ptr<SynthesisBackend> synthesis;
  std::shared_ptr<DetectionBackend> detection;
  Sleeper sleeper = real_sleeper();
  /// Receives a progress line every 100 accepted images; null silences it.
  std::function<void(const std::string&)> progress;
};

/// Generates a dataset into cfg.output_dir, which must not hold a manifest.
RunResult run(const PipelineConfig& cfg, const RunControl& control = {});

/// Continues the run stored in output_dir. Refuses (Config error) when the
/// config snapshot, its digest or the catalog no longer match the data on
/// disk. A completed run is a no-op.
RunResult resume(const std::string& output_dir, const RunControl& control = {},
                 std::optional<int> workers = std::nullopt);

/// Reads <dir>/config.json and checks the directory against it.
ValidationReport validate_output_dir(const std::string& dir, bool check_images = true);

/// Loads the config snapshot stored in a dataset directory.
PipelineConfig load_snapshot(const std::string& dir);

}  // namespace synthset
