#include "synthset/orchestrator.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "synthset/http_backend.hpp"
#include "synthset/metrics.hpp"

namespace synthset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kind, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Input, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Input, "short write to '" + path.string() + "'");
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_absolute() ? p.lexically_normal().string()
                         : fs::absolute(fs::path(base_dir) / p).lexically_normal().string();
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.is_object() || !obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Config, std::string("config field '") + key + "' has the wrong type");
  }
}

const json& section(const json& doc, const char* key) {
  static const json empty = json::object();
  return doc.contains(key) ? doc[key] : empty;
}

}  // namespace

PipelineConfig config_from_json(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
  PipelineConfig cfg;

  const json& cat = section(doc, "catalog");
  cfg.catalog_path = resolve(get_or<std::string>(cat, "path", ""), base_dir);
  cfg.filter.brand_whitelist = get_or(cat, "brands", cfg.filter.brand_whitelist);
  cfg.filter.min_year = get_or(cat, "min_year", cfg.filter.min_year);

  const json& plan = section(doc, "plan");
  cfg.plan.total = get_or<std::size_t>(plan, "total", 0);
  cfg.plan.balance = parse_balance(get_or<std::string>(plan, "balance", "quota"));
  cfg.plan.seed = get_or<std::uint64_t>(plan, "seed", 0);
  cfg.plan.colors = get_or(plan, "colors", cfg.plan.colors);
  if (plan.contains("mode_mix")) {
    cfg.plan.mode_mix.clear();
    for (const auto& [k, v] : plan["mode_mix"].items()) cfg.plan.mode_mix[parse_mode(k)] = v.get<double>();
  }

  if (doc.contains("template_path")) {
    cfg.prompt_template =
        read_file(resolve(doc["template_path"].get<std::string>(), base_dir), ErrorKind::Config);
    while (!cfg.prompt_template.empty() &&
           (cfg.prompt_template.back() == '\n' || cfg.prompt_template.back() == '\r'))
      cfg.prompt_template.pop_back();
  }
  cfg.prompt_template = get_or(doc, "template", cfg.prompt_template);

  const json& syn = section(doc, "synthesis");
  auto& s = cfg.synthesis;
  s.backend = get_or(syn, "backend", s.backend);
  s.url = get_or(syn, "url", s.url);
  s.timeout_seconds = get_or(syn, "timeout_secs", s.timeout_seconds);
  s.size = get_or(syn, "size", s.size);
  const json& t2i = section(syn, "t2i");
  s.t2i_steps = get_or(t2i, "steps", s.t2i_steps);
  s.t2i_guidance = get_or(t2i, "guidance", s.t2i_guidance);
  const json& i2i = section(syn, "i2i");
  s.i2i_steps = get_or(i2i, "steps", s.i2i_steps);
  s.i2i_guidance = get_or(i2i, "guidance", s.i2i_guidance);
  s.i2i_strength = get_or(i2i, "strength", s.i2i_strength);
  s.base_pool_path = resolve(get_or<std::string>(syn, "base_pool", ""), base_dir);
  s.padding_fraction = get_or(syn, "padding_fraction", s.padding_fraction);
  const json& retry = section(syn, "retry");
  s.retry.base_seconds = get_or(retry, "base_seconds", s.retry.base_seconds);
  s.retry.factor = get_or(retry, "factor", s.retry.factor);
  s.retry.max_attempts = get_or(retry, "max_attempts", s.retry.max_attempts);
  const json& mock = section(syn, "mock");
  s.faults.p_zero_cars = get_or(mock, "p_zero_cars", s.faults.p_zero_cars);
  s.faults.p_two_cars = get_or(mock, "p_two_cars", s.faults.p_two_cars);
  s.latency = get_or(mock, "latency", s.latency);
  s.simulated_t2i_seconds = get_or(mock, "simulated_t2i_seconds", s.simulated_t2i_seconds);
  s.simulated_i2i_seconds = get_or(mock, "simulated_i2i_seconds", s.simulated_i2i_seconds);

  const json& det = section(doc, "detector");
  cfg.detector.kind = get_or(det, "kind", cfg.detector.kind);
  cfg.detector.url = get_or(det, "url", cfg.detector.url);
  cfg.detector.timeout_seconds = get_or(det, "timeout_secs", cfg.detector.timeout_seconds);
  cfg.detector.gate.min_confidence = get_or(det, "min_confidence", cfg.detector.gate.min_confidence);
  cfg.detector.gate.vehicle_labels = get_or(det, "vehicle_labels", cfg.detector.gate.vehicle_labels);

  const json& aug = section(doc, "augment");
  cfg.augment_enabled = get_or(aug, "enabled", cfg.augment_enabled);
  cfg.augment.target_size = get_or(aug, "target_size", cfg.augment.target_size);
  cfg.augment.rotation_max_degrees = get_or(aug, "rotation_max_degrees", cfg.augment.rotation_max_degrees);
  cfg.augment.rotation_seed = get_or(aug, "rotation_seed", cfg.augment.rotation_seed);

  cfg.output_dir = resolve(get_or(doc, "output_dir", cfg.output_dir), base_dir);
  cfg.workers = get_or(doc, "workers", cfg.workers);
  cfg.max_attempts_per_slot = get_or(doc, "max_attempts_per_slot", cfg.max_attempts_per_slot);
  cfg.keep_rejected = get_or(doc, "keep_rejected", cfg.keep_rejected);
  return cfg;
}

PipelineConfig load_config_file(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path, ErrorKind::Config));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, "config '" + path + "': " + e.what());
  }
  return config_from_json(doc, fs::path(path).parent_path().string().empty()
                                   ? "."
                                   : fs::path(path).parent_path().string());
}

json to_json(const PipelineConfig& cfg) {
  json mix = json::object();
  for (const auto& [mode, frac] : cfg.plan.mode_mix) mix[std::string(to_string(mode))] = frac;
  const auto& s = cfg.synthesis;
  return {
      {"catalog",
       {{"path", cfg.catalog_path}, {"brands", cfg.filter.brand_whitelist}, {"min_year", cfg.filter.min_year}}},
      {"plan",
       {{"total", cfg.plan.total},
        {"balance", std::string(to_string(cfg.plan.balance))},
        {"seed", cfg.plan.seed},
        {"mode_mix", mix},
        {"colors", cfg.plan.colors}}},
      {"template", cfg.prompt_template},
      {"synthesis",
       {{"backend", s.backend},
        {"url", s.url},
        {"timeout_secs", s.timeout_seconds},
        {"size", s.size},
        {"t2i", {{"steps", s.t2i_steps}, {"guidance", s.t2i_guidance}}},
        {"i2i", {{"steps", s.i2i_steps}, {"guidance", s.i2i_guidance}, {"strength", s.i2i_strength}}},
        {"base_pool", s.base_pool_path},
        {"padding_fraction", s.padding_fraction},
        {"retry",
         {{"base_seconds", s.retry.base_seconds},
          {"factor", s.retry.factor},
          {"max_attempts", s.retry.max_attempts}}},
        {"mock",
         {{"p_zero_cars", s.faults.p_zero_cars},
          {"p_two_cars", s.faults.p_two_cars},
          {"latency", s.latency},
          {"simulated_t2i_seconds", s.simulated_t2i_seconds},
          {"simulated_i2i_seconds", s.simulated_i2i_seconds}}}}},
      {"detector",
       {{"kind", cfg.detector.kind},
        {"url", cfg.detector.url},
        {"timeout_secs", cfg.detector.timeout_seconds},
        {"min_confidence", cfg.detector.gate.min_confidence},
        {"vehicle_labels", cfg.detector.gate.vehicle_labels}}},
      {"augment",
       {{"enabled", cfg.augment_enabled},
        {"target_size", cfg.augment.target_size},
        {"rotation_max_degrees", cfg.augment.rotation_max_degrees},
        {"rotation_seed", cfg.augment.rotation_seed}}},
      {"output_dir", cfg.output_dir},
      {"workers", cfg.workers},
      {"max_attempts_per_slot", cfg.max_attempts_per_slot},
      {"keep_rejected", cfg.keep_rejected}};
}

void validate(const PipelineConfig& cfg) {
  if (cfg.catalog_path.empty()) throw Error(ErrorKind::Config, "no catalog path configured");
  if (!fs::exists(cfg.catalog_path))
    throw Error(ErrorKind::Config, "catalog '" + cfg.catalog_path + "' does not exist");
  if (!cfg.synthesis.base_pool_path.empty() && !fs::exists(cfg.synthesis.base_pool_path))
    throw Error(ErrorKind::Config, "base pool '" + cfg.synthesis.base_pool_path + "' does not exist");
  if (cfg.workers < 1) throw Error(ErrorKind::Config, "workers must be at least 1");
  if (cfg.max_attempts_per_slot < 1) throw Error(ErrorKind::Config, "max_attempts_per_slot must be at least 1");
  if (cfg.synthesis.size < 1) throw Error(ErrorKind::Config, "output size must be positive");
  if (cfg.synthesis.backend != "mock" && cfg.synthesis.backend != "http")
    throw Error(ErrorKind::Config, "unknown synthesis backend '" + cfg.synthesis.backend + "'");
  if (cfg.synthesis.backend == "http" && cfg.synthesis.url.empty())
    throw Error(ErrorKind::Config, "http synthesis backend needs a url");
  if (cfg.synthesis.latency != "simulated" && cfg.synthesis.latency != "wall")
    throw Error(ErrorKind::Config, "mock latency must be 'simulated' or 'wall'");
  const auto& f = cfg.synthesis.faults;
  if (f.p_zero_cars < 0 || f.p_two_cars < 0 || f.p_zero_cars + f.p_two_cars > 1.0)
    throw Error(ErrorKind::Config, "fault probabilities must be non-negative and sum to at most 1");
  if (cfg.synthesis.retry.max_attempts < 1) throw Error(ErrorKind::Config, "retry max_attempts must be at least 1");
  const auto& k = cfg.detector.kind;
  if (k != "mock-oracle" && k != "mock-blob" && k != "http")
    throw Error(ErrorKind::Config, "unknown detector '" + k + "'");
  if (k == "http" && cfg.detector.url.empty()) throw Error(ErrorKind::Config, "http detector needs a url");
  validate(cfg.detector.gate);
  validate(cfg.augment);
}

json config_snapshot(const PipelineConfig& cfg) {
  json snap = to_json(cfg);
  snap.erase("output_dir");
  snap.erase("workers");
  snap["catalog"]["digest"] = digest_of(read_file(cfg.catalog_path, ErrorKind::Config));
  return snap;
}

std::string snapshot_text(const json& snapshot) { return snapshot.dump(2) + "\n"; }

std::string digest_of(std::string_view text) { return hex64(fnv1a64(text)); }

json to_json(const RunStats& stats) {
  json lat = json::object();
  for (const auto& [mode, v] : stats.mean_latency_seconds) lat[std::string(to_string(mode))] = v;
  return {{"accepted", stats.accepted},
          {"rejected", stats.rejected},
          {"attempts", stats.attempts},
          {"wall_seconds", stats.wall_seconds},
          {"mean_latency_seconds", lat}};
}

// ---------------------------------------------------------------------------

namespace {

struct AcceptedSample {
  SampleRecord record;  // id/image_path filled in by the writer
  std::vector<std::uint8_t> png;
};

struct RejectedImage {
  RejectionEvent event;
  std::vector<std::uint8_t> png;
};

struct SlotOutcome {
  std::optional<AcceptedSample> accepted;
  std::vector<RejectionEvent> rejections;
  std::vector<RejectedImage> kept_rejects;
};

class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, const RunControl& control)
      : cfg_(std::move(cfg)),
        control_(control),
        loaded_(load_catalog_file(cfg_.catalog_path, cfg_.filter)),
        catalog_(loaded_.catalog) {
    labels_ = sample_labels(catalog_, cfg_.plan);
    synth_ = control.synthesis ? control.synthesis : make_synthesis_backend();
    detector_ = control.detection ? control.detection : make_detection_backend();
  }

  const std::vector<LabelSpec>& labels() const { return labels_; }
  const VehicleCatalog& catalog() const { return catalog_; }

  void health_check() {
    try {
      synth_->health_check();
      detector_->health_check();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Transport || e.kind() == ErrorKind::Request ||
          e.kind() == ErrorKind::Protocol)
        throw Error(e.kind(), std::string("backend health check failed: ") + e.what());
      throw;
    }
  }

  // Runs the given slots and appends results through the writer.
  void execute(const std::vector<std::uint64_t>& slots, ManifestWriter& manifest,
               JsonlAppender& rejections, const fs::path& root) {
    if (std::any_of(slots.begin(), slots.end(),
                    [&](auto s) { return labels_[s].mode == Mode::ImageToImage; }))
      load_pool();

    std::mutex write_mu;
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::size_t written = 0;

    auto commit = [&](SlotOutcome&& out) {
      std::lock_guard lock(write_mu);
      if (stop.load()) return;
      for (const auto& r : out.kept_rejects) {
        const fs::path dir = root / "rejected" / std::string(to_string(r.event.reason));
        fs::create_directories(dir);
        const std::string name =
            std::to_string(r.event.slot) + "_" + std::to_string(r.event.attempt) + ".png";
        write_file(dir / name, {reinterpret_cast<const char*>(r.png.data()), r.png.size()});
      }
      for (const auto& e : out.rejections) rejections.append_line(to_json(e).dump());
      if (!out.accepted) return;
      auto& sample = *out.accepted;
      sample.record.id = format_record_id(manifest.size());
      sample.record.image_path = image_rel_path(sample.record.brand, sample.record.id);
      const fs::path image_path = root / sample.record.image_path;
      const fs::path label_path = root / label_rel_path(sample.record.brand, sample.record.id);
      fs::create_directories(image_path.parent_path());
      fs::create_directories(label_path.parent_path());
      write_file(image_path, {reinterpret_cast<const char*>(sample.png.data()), sample.png.size()});
      write_file(label_path, write_label_file(sample.record));
      manifest.append(sample.record);
      ++written;
      if (control_.progress && manifest.size() % 100 == 0)
        control_.progress("accepted " + std::to_string(manifest.size()) + "/" +
                          std::to_string(cfg_.plan.total));
      if (control_.stop_after_records && written >= *control_.stop_after_records) {
        stop.store(true);
        throw Error(ErrorKind::Interrupted,
                    "stopped after " + std::to_string(written) + " records");
      }
    };

    auto fail = [&](std::exception_ptr e) {
      std::lock_guard lock(write_mu);
      if (!failure) failure = e;
      stop.store(true);
    };

    const auto workers = static_cast<std::size_t>(std::max(1, cfg_.workers));
    if (workers == 1) {
      for (const auto slot : slots) {
        if (stop.load()) break;
        try {
          commit(process_slot(slot, stop));
        } catch (...) {
          fail(std::current_exception());
        }
      }
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < std::min(workers, slots.size()); ++w) {
        pool.emplace_back([&] {
          while (!stop.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= slots.size()) break;
            try {
              auto out = process_slot(slots[i], stop);
              commit(std::move(out));
            } catch (...) {
              fail(std::current_exception());
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

 private:
  std::shared_ptr<SynthesisBackend> make_synthesis_backend() const {
    const auto& s = cfg_.synthesis;
    if (s.backend == "http") return std::make_shared<HttpSynthesisBackend>(HttpEndpoint{s.url, s.timeout_seconds});
    MockBackendConfig mock;
    mock.faults = s.faults;
    if (s.latency == "wall") {
      mock.simulated_t2i_seconds.reset();
      mock.simulated_i2i_seconds.reset();
    } else {
      mock.simulated_t2i_seconds = s.simulated_t2i_seconds;
      mock.simulated_i2i_seconds = s.simulated_i2i_seconds;
    }
    return std::make_shared<MockSynthesisBackend>(mock);
  }

  std::shared_ptr<DetectionBackend> make_detection_backend() const {
    const auto& d = cfg_.detector;
    if (d.kind == "http") return std::make_shared<HttpDetectionBackend>(HttpEndpoint{d.url, d.timeout_seconds});
    if (d.kind == "mock-blob") return std::make_shared<BlobDetector>();
    return std::make_shared<OracleDetector>();
  }

  void load_pool() {
    if (!pool_.images.empty()) return;
    pool_ = cfg_.synthesis.base_pool_path.empty()
                ? procedural_base_pool(8, cfg_.synthesis.padding_fraction)
                : load_base_pool(cfg_.synthesis.base_pool_path, cfg_.filter.brand_whitelist);
  }

  SynthRequest make_request(const LabelSpec& label, std::uint64_t slot, int attempt) const {
    SynthRequest req = SynthRequest::defaults_for(label.mode);
    req.prompt = build_prompt(label, cfg_.prompt_template);
    req.seed = derive_seed(cfg_.plan.seed ^ 0x5EED5EED5EED5EEDULL, slot, static_cast<std::uint64_t>(attempt));
    const auto& s = cfg_.synthesis;
    if (label.mode == Mode::TextToImage) {
      req.steps = s.t2i_steps;
      req.guidance = s.t2i_guidance;
      req.width = req.height = s.size;
    } else {
      req.steps = s.i2i_steps;
      req.guidance = s.i2i_guidance;
      req.strength = s.i2i_strength;
      const auto pick = derive_seed(cfg_.plan.seed ^ 0xBA5EBA5EULL, slot, static_cast<std::uint64_t>(attempt));
      req.base_image = pool_.images[pick % pool_.images.size()].image;
    }
    return req;
  }

  SlotOutcome process_slot(std::uint64_t slot, const std::atomic<bool>& stop) {
    SlotOutcome out;
    LabelSpec label = labels_[slot];
    for (int attempt = 0; attempt < cfg_.max_attempts_per_slot; ++attempt) {
      if (stop.load()) return out;
      if (attempt > 0) {
        // Redraw within the same brand and mode so quotas survive rejection.
        Rng rng(derive_seed(cfg_.plan.seed, slot, static_cast<std::uint64_t>(attempt)));
        label = draw_within_brand(catalog_, label.brand, label.mode, cfg_.plan.colors, slot, rng);
      }
      const SynthRequest req = make_request(label, slot, attempt);
      const SynthResult result = with_retry([&] { return synthesize(*synth_, req); },
                                            cfg_.synthesis.retry, control_.sleeper);
      const auto detections = with_retry([&] { return detect(*detector_, result.image); },
                                         cfg_.synthesis.retry, control_.sleeper);
      GateDecision decision = assess(detections, cfg_.detector.gate);

      std::optional<ImageBuf> crop;
      if (decision.verdict == Verdict::Accept) {
        const PixelRect rect = bbox_pixel_rect(result.image.width(), result.image.height(), *decision.bbox);
        if (rect.area() > 0) {
          crop = crop_to_bbox(result.image, *decision.bbox);
        } else {
          decision = GateDecision::reject(RejectReason::NoCar);  // degenerate bbox
        }
      }

      if (decision.verdict == Verdict::Reject) {
        RejectionEvent ev{slot, attempt, label.brand, label.model, *decision.reason};
        if (cfg_.keep_rejected) out.kept_rejects.push_back({ev, encode_png(result.image)});
        out.rejections.push_back(std::move(ev));
        continue;
      }

      const ImageBuf final_image = cfg_.augment_enabled
                                       ? augment(*crop, cfg_.augment, slot)
                                       : resize(*crop, cfg_.augment.target_size, cfg_.augment.target_size);
      AcceptedSample sample;
      auto& r = sample.record;
      r.slot = slot;
      r.brand = label.brand;
      r.brand_index = catalog_.brand_index(label.brand);
      r.model = label.model;
      r.year = label.year;
      r.color = label.color;
      r.mode = label.mode;
      r.prompt = req.prompt.text;
      r.bbox = *decision.bbox;
      r.gate_score = *decision.score;
      r.backend_model = result.info.model_name;
      r.latency_seconds = result.info.latency_seconds;
      r.seed = req.seed;
      sample.png = encode_png(final_image);
      out.accepted = std::move(sample);
      return out;
    }

    std::map<std::string, std::size_t> failures;
    for (const auto& e : out.rejections)
      ++failures[e.brand + " " + e.model + " (" + std::string(to_string(e.reason)) + ")"];
    std::vector<std::string> parts;
    for (const auto& [k, n] : failures) parts.push_back(k + " x" + std::to_string(n));
    throw Error(ErrorKind::Quota, "slot " + std::to_string(slot) + " (brand " + labels_[slot].brand +
                                      ") exhausted " + std::to_string(cfg_.max_attempts_per_slot) +
                                      " attempts: " + join(parts, ", "));
  }

  PipelineConfig cfg_;
  const RunControl& control_;
  LoadResult loaded_;
  const VehicleCatalog& catalog_;
  std::vector<LabelSpec> labels_;
  std::shared_ptr<SynthesisBackend> synth_;
  std::shared_ptr<DetectionBackend> detector_;
  BasePool pool_;
};

RunResult finish(const fs::path& root, double wall_seconds) {
  RunResult result;
  result.manifest = read_manifest_file((root / "manifest.jsonl").string()).manifest;
  const auto rejections = read_rejections_file((root / "rejections.jsonl").string());
  for (const auto& e : rejections) {
    ++result.manifest.rejected_counts[std::string(to_string(e.reason))];
    ++result.stats.rejected[std::string(to_string(e.reason))];
  }
  result.stats.accepted = result.manifest.records.size();
  result.stats.attempts = result.stats.accepted + rejections.size();
  result.stats.wall_seconds = wall_seconds;
  for (const auto& [mode, m] : throughput_report(result.manifest.records).per_mode)
    result.stats.mean_latency_seconds[mode] = m.mean_seconds;
  write_file(root / "run_stats.json", to_json(result.stats).dump(2) + "\n");
  return result;
}

}  // namespace

RunResult run(const PipelineConfig& cfg, const RunControl& control) {
  const auto start = std::chrono::steady_clock::now();
  validate(cfg);
  const fs::path root(cfg.output_dir);
  if (fs::exists(root / "manifest.jsonl"))
    throw Error(ErrorKind::Config, "'" + root.string() + "' already holds a dataset; resume it instead");

  Pipeline pipeline(cfg, control);
  validate_plan(pipeline.catalog(), cfg.plan);
  (void)build_prompt(pipeline.labels().front(), cfg.prompt_template);
  pipeline.health_check();

  fs::create_directories(root);
  const std::string snapshot = snapshot_text(config_snapshot(cfg));
  write_file(root / "config.json", snapshot);
  JsonlAppender rejections((root / "rejections.jsonl").string(), true);
  ManifestWriter manifest = ManifestWriter::create((root / "manifest.jsonl").string(), digest_of(snapshot));

  std::vector<std::uint64_t> slots(cfg.plan.total);
  for (std::uint64_t i = 0; i < slots.size(); ++i) slots[i] = i;
  pipeline.execute(slots, manifest, rejections, root);

  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
  return finish(root, wall.count());
}

PipelineConfig load_snapshot(const std::string& dir) {
  const fs::path root(dir);
  const std::string text = read_file((root / "config.json").string(), ErrorKind::Config);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, std::string("config snapshot is not JSON: ") + e.what());
  }
  PipelineConfig cfg = config_from_json(doc, root.string());
  cfg.output_dir = root.string();
  return cfg;
}

RunResult resume(const std::string& output_dir, const RunControl& control, std::optional<int> workers) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path root(output_dir);
  const std::string text = read_file((root / "config.json").string(), ErrorKind::Config);
  PipelineConfig cfg = load_snapshot(output_dir);
  if (workers) cfg.workers = *workers;
  validate(cfg);

  const auto manifest_path = (root / "manifest.jsonl").string();
  const auto on_disk = read_manifest_file(manifest_path);
  if (on_disk.manifest.config_digest != digest_of(text))
    throw Error(ErrorKind::Config, "config snapshot does not match the manifest; refusing to resume");
  const json stored = json::parse(text);
  if (stored != config_snapshot(cfg))
    throw Error(ErrorKind::Config, "config snapshot does not match the catalog on disk; refusing to resume");

  Pipeline pipeline(cfg, control);
  std::set<std::uint64_t> done;
  for (const auto& r : on_disk.manifest.records) {
    if (r.slot >= pipeline.labels().size() || pipeline.labels()[r.slot].brand != r.brand ||
        !done.insert(r.slot).second)
      throw Error(ErrorKind::Config, "record " + r.id + " does not belong to this run's plan; refusing to resume");
  }

  // Rejections of unfinished slots are replayed, so drop them first.
  const auto rejections_path = (root / "rejections.jsonl").string();
  std::vector<RejectionEvent> kept;
  for (auto& e : read_rejections_file(rejections_path))
    if (done.contains(e.slot)) kept.push_back(std::move(e));
  {
    JsonlAppender rewrite(rejections_path, true);
    for (const auto& e : kept) rewrite.append_line(to_json(e).dump());
  }

  std::vector<std::uint64_t> remaining;
  for (std::uint64_t i = 0; i < pipeline.labels().size(); ++i)
    if (!done.contains(i)) remaining.push_back(i);

  if (!remaining.empty()) {
    pipeline.health_check();
    ManifestWriter manifest = ManifestWriter::open_existing(manifest_path);
    JsonlAppender rejections(rejections_path);
    pipeline.execute(remaining, manifest, rejections, root);
  }
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
  return finish(root, wall.count());
}

ValidationReport validate_output_dir(const std::string& dir, bool check_images) {
  const fs::path root(dir);
  ValidationReport report;
  std::string text;
  PipelineConfig cfg;
  try {
    text = read_file((root / "config.json").string(), ErrorKind::Config);
    cfg = load_snapshot(dir);
  } catch (const Error& e) {
    report.problems.push_back(std::string("config.json: ") + e.what());
    return report;
  }
  DatasetExpectations expect;
  expect.brands = cfg.filter.brand_whitelist;
  expect.planned_total = cfg.plan.total;
  if (cfg.plan.balance == Balance::ExactQuota && !expect.brands.empty())
    expect.quota_per_brand = cfg.plan.total / expect.brands.size();
  expect.image_size = cfg.augment.target_size;
  expect.config_digest = digest_of(text);
  return validate_dataset(dir, expect, check_images);
}

}  // namespace synthset
