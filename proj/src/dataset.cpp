#include "synthset/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "synthset/imaging.hpp"

namespace synthset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Input, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string format_record_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

std::string brand_dir(std::string_view brand) {
  std::string out;
  for (char c : brand) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    out += keep ? c : '_';
  }
  return out.empty() ? "_" : out;
}

std::string image_rel_path(std::string_view brand, std::string_view id) {
  return "images/" + brand_dir(brand) + "/" + std::string(id) + ".png";
}

std::string label_rel_path(std::string_view brand, std::string_view id) {
  return "labels/" + brand_dir(brand) + "/" + std::string(id) + ".txt";
}

json to_json(const SampleRecord& r) {
  return {{"id", r.id},
          {"slot", r.slot},
          {"image", r.image_path},
          {"brand", r.brand},
          {"brand_index", r.brand_index},
          {"model", r.model},
          {"year", r.year},
          {"color", r.color},
          {"mode", std::string(to_string(r.mode))},
          {"prompt", r.prompt},
          {"bbox", {r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h}},
          {"gate_score", r.gate_score},
          {"backend_model", r.backend_model},
          {"latency_seconds", r.latency_seconds},
          {"seed", r.seed}};
}

SampleRecord record_from_json(const json& j) {
  try {
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.slot = j.at("slot").get<std::uint64_t>();
    r.image_path = j.at("image").get<std::string>();
    r.brand = j.at("brand").get<std::string>();
    r.brand_index = j.at("brand_index").get<int>();
    r.model = j.at("model").get<std::string>();
    r.year = j.at("year").get<int>();
    r.color = j.at("color").get<std::string>();
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.prompt = j.at("prompt").get<std::string>();
    const auto& b = j.at("bbox");
    if (!b.is_array() || b.size() != 4) throw Error(ErrorKind::Parse, "bbox must have 4 numbers");
    r.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    r.gate_score = j.at("gate_score").get<double>();
    r.backend_model = j.at("backend_model").get<std::string>();
    r.latency_seconds = j.at("latency_seconds").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bad record: ") + e.what());
  }
}

void append_record(DatasetManifest& manifest, SampleRecord record) {
  const std::string expected = format_record_id(manifest.records.size());
  if (record.id != expected)
    throw Error(ErrorKind::Consistency,
                "record id '" + record.id + "' does not continue the manifest (expected '" +
                    expected + "')");
  manifest.records.push_back(std::move(record));
}

namespace {

std::string header_line(const std::string& digest) {
  return json{{"format", kManifestFormat}, {"config_digest", digest}}.dump();
}

}  // namespace

std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out = header_line(manifest.config_digest) + "\n";
  for (const auto& r : manifest.records) out += to_json(r).dump() + "\n";
  return out;
}

ManifestReadResult parse_manifest(std::string_view text) {
  ManifestReadResult result;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header = false;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      result.truncated_tail = true;
      break;
    }
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw Error(ErrorKind::Parse, "manifest line " + std::to_string(line_no) + " is not JSON");
    }
    if (!header) {
      if (!j.is_object() || j.value("format", "") != kManifestFormat)
        throw Error(ErrorKind::Parse, "manifest has no header line");
      result.manifest.config_digest = j.value("config_digest", "");
      header = true;
      continue;
    }
    append_record(result.manifest, record_from_json(j));
  }
  if (!header) throw Error(ErrorKind::Consistency, "manifest is empty");
  return result;
}

ManifestReadResult read_manifest_file(const std::string& path) {
  return parse_manifest(read_text_file(path));
}

JsonlAppender::JsonlAppender(const std::string& path, bool truncate) : path_(path) {
  file_ = std::fopen(path.c_str(), truncate ? "wb" : "ab");
  if (!file_) throw Error(ErrorKind::Input, "cannot open '" + path + "' for writing");
}

JsonlAppender::JsonlAppender(JsonlAppender&& other) noexcept
    : file_(std::exchange(other.file_, nullptr)), path_(std::move(other.path_)) {}

JsonlAppender& JsonlAppender::operator=(JsonlAppender&& other) noexcept {
  if (this != &other) {
    if (file_) std::fclose(file_);
    file_ = std::exchange(other.file_, nullptr);
    path_ = std::move(other.path_);
  }
  return *this;
}

JsonlAppender::~JsonlAppender() {
  if (file_) std::fclose(file_);
}

void JsonlAppender::append_line(std::string_view line) {
  if (!file_) throw Error(ErrorKind::Input, "appender is closed");
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() ||
      std::fputc('\n', file_) == EOF || std::fflush(file_) != 0)
    throw Error(ErrorKind::Input, "write to '" + path_ + "' failed");
}

ManifestWriter ManifestWriter::create(const std::string& path, const std::string& config_digest) {
  JsonlAppender out(path, true);
  out.append_line(header_line(config_digest));
  return ManifestWriter(std::move(out), config_digest, 0);
}

ManifestWriter ManifestWriter::open_existing(const std::string& path) {
  const std::string text = read_text_file(path);
  auto parsed = parse_manifest(text);
  if (parsed.truncated_tail) fs::resize_file(path, text.rfind('\n') + 1);
  return ManifestWriter(JsonlAppender(path), parsed.manifest.config_digest,
                        parsed.manifest.records.size());
}

void ManifestWriter::append(const SampleRecord& record) {
  const std::string expected = format_record_id(count_);
  if (record.id != expected)
    throw Error(ErrorKind::Consistency,
                "record id '" + record.id + "' does not continue the manifest (expected '" +
                    expected + "')");
  out_.append_line(to_json(record).dump());
  ++count_;
}

// ---------------------------------------------------------------------------

LabelLine label_from_record(const SampleRecord& r) {
  return {r.brand_index, r.bbox.x + r.bbox.w / 2.0, r.bbox.y + r.bbox.h / 2.0, r.bbox.w, r.bbox.h};
}

std::string format_label_line(const LabelLine& l) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f", l.class_index, l.cx, l.cy, l.w, l.h);
  return buf;
}

std::string write_label_file(const SampleRecord& record) {
  return format_label_line(label_from_record(record)) + "\n";
}

LabelLine parse_label_line(std::string_view line) {
  std::istringstream in{std::string(trim(line))};
  LabelLine l;
  std::string extra;
  if (!(in >> l.class_index >> l.cx >> l.cy >> l.w >> l.h) || (in >> extra))
    throw Error(ErrorKind::Parse, "bad label line '" + std::string(line) + "'");
  return l;
}

// ---------------------------------------------------------------------------

json to_json(const RejectionEvent& e) {
  return {{"slot", e.slot},
          {"attempt", e.attempt},
          {"brand", e.brand},
          {"model", e.model},
          {"reason", std::string(to_string(e.reason))}};
}

RejectionEvent rejection_from_json(const json& j) {
  try {
    return {j.at("slot").get<std::uint64_t>(), j.at("attempt").get<int>(),
            j.at("brand").get<std::string>(), j.at("model").get<std::string>(),
            parse_reject_reason(j.at("reason").get<std::string>())};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bad rejection event: ") + e.what());
  }
}

std::vector<RejectionEvent> read_rejections_file(const std::string& path) {
  std::vector<RejectionEvent> out;
  if (!fs::exists(path)) return out;
  const std::string text = read_text_file(path);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // unterminated tail from a crash
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (trim(line).empty()) continue;
    try {
      out.push_back(rejection_from_json(json::parse(line)));
    } catch (const json::exception&) {
      throw Error(ErrorKind::Parse, "rejection log line is not JSON");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Split s) { return s == Split::Validation ? "validation" : "test"; }

std::int64_t time_bucket(std::int64_t t, std::int64_t bucket_seconds) {
  std::int64_t q = t / bucket_seconds;
  if ((t % bucket_seconds != 0) && (t < 0)) --q;
  return q;
}

SplitRule parse_split_rule(const json& doc) {
  SplitRule rule;
  try {
    rule.bucket_seconds = doc.value("bucket_seconds", std::int64_t{3600});
    if (rule.bucket_seconds <= 0) throw Error(ErrorKind::Config, "bucket_seconds must be positive");
    for (const auto& a : doc.at("assignments")) {
      const std::string split = a.at("split").get<std::string>();
      Split s;
      if (split == "validation") {
        s = Split::Validation;
      } else if (split == "test") {
        s = Split::Test;
      } else {
        throw Error(ErrorKind::Config, "unknown split '" + split + "'");
      }
      const auto key = std::make_pair(a.at("camera").get<std::string>(), a.at("bucket").get<std::int64_t>());
      const auto [it, inserted] = rule.assignment.emplace(key, s);
      if (!inserted && it->second != s)
        throw Error(ErrorKind::Config, "camera " + key.first + " bucket " +
                                           std::to_string(key.second) + " assigned twice");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad split rule: ") + e.what());
  }
  return rule;
}

SplitRule read_split_rule_file(const std::string& path) {
  try {
    return parse_split_rule(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, "split rule '" + path + "': " + e.what());
  }
}

std::vector<RealSample> parse_real_samples(std::string_view text,
                                           const std::vector<std::string>& brands) {
  std::vector<RealSample> out;
  std::size_t row = 0;
  bool header = false;
  for (const auto& raw : split(text, '\n')) {
    ++row;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "image_path,brand,camera_id,recorded_at")
        throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": bad samples header");
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 4)
      throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": expected 4 fields");
    RealSample s{trim(f[0]), trim(f[1]), trim(f[2]), 0};
    const std::string t = trim(f[3]);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), s.recorded_at);
    if (ec != std::errc{} || ptr != t.data() + t.size())
      throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": bad timestamp '" + t + "'");
    if (std::find(brands.begin(), brands.end(), s.brand) == brands.end())
      throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": unknown brand '" + s.brand + "'");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RealSample> read_real_samples_file(const std::string& path,
                                               const std::vector<std::string>& brands) {
  return parse_real_samples(read_text_file(path), brands);
}

SplitResult split_real(const std::vector<RealSample>& samples, const SplitRule& rule,
                       const std::vector<std::string>& brands) {
  std::set<std::pair<std::string, std::int64_t>> missing;
  SplitResult result;
  for (const auto& b : brands) result.table.push_back({b, 0, 0});
  for (const auto& s : samples) {
    const auto key = std::make_pair(s.camera_id, time_bucket(s.recorded_at, rule.bucket_seconds));
    const auto it = rule.assignment.find(key);
    if (it == rule.assignment.end()) {
      missing.insert(key);
      continue;
    }
    const auto row = std::find_if(result.table.begin(), result.table.end(),
                                  [&](const auto& r) { return r.brand == s.brand; });
    if (row == result.table.end())
      throw Error(ErrorKind::Input, "sample brand '" + s.brand + "' is not configured");
    if (it->second == Split::Validation) {
      result.validation.push_back(s);
      ++row->validation;
    } else {
      result.test.push_back(s);
      ++row->test;
    }
  }
  if (!missing.empty()) {
    std::vector<std::string> keys;
    for (const auto& [cam, bucket] : missing) keys.push_back(cam + "@" + std::to_string(bucket));
    throw Error(ErrorKind::Config, "unassigned (camera, bucket) keys: " + join(keys, ", "));
  }
  return result;
}

std::string render_split_table(const SplitResult& result) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-14s %10s %10s\n", "Brand", "Validation", "Test");
  os << buf;
  std::size_t v = 0, t = 0;
  for (const auto& row : result.table) {
    std::snprintf(buf, sizeof buf, "%-14s %10zu %10zu\n", row.brand.c_str(), row.validation, row.test);
    os << buf;
    v += row.validation;
    t += row.test;
  }
  std::snprintf(buf, sizeof buf, "%-14s %10zu %10zu\n", "Total", v, t);
  os << buf;
  return os.str();
}

// ---------------------------------------------------------------------------

DatasetStats dataset_stats(const std::vector<SampleRecord>& records,
                           const std::vector<std::string>& brands) {
  DatasetStats s;
  s.total = records.size();
  std::map<std::string, std::size_t> by_brand;
  for (const auto& r : records) {
    ++by_brand[r.brand];
    ++s.per_mode[std::string(to_string(r.mode))];
    ++s.per_color[r.color];
    ++s.per_model[r.brand + " " + r.model];
  }
  for (const auto& b : brands) s.per_brand.emplace_back(b, by_brand.contains(b) ? by_brand[b] : 0);
  // Brands outside the configured list still show up, after the known ones.
  for (const auto& [b, n] : by_brand)
    if (std::find(brands.begin(), brands.end(), b) == brands.end()) s.per_brand.emplace_back(b, n);
  s.balanced = !s.per_brand.empty() &&
               std::all_of(s.per_brand.begin(), s.per_brand.end(),
                           [&](const auto& p) { return p.second == s.per_brand.front().second; });
  return s;
}

std::string render_stats(const DatasetStats& s) {
  std::ostringstream os;
  os << "records: " << s.total << "\n";
  os << "balanced: " << (s.balanced ? "true" : "false") << "\n";
  os << "per brand:\n";
  for (const auto& [b, n] : s.per_brand) os << "  " << b << ": " << n << "\n";
  os << "per mode:\n";
  for (const auto& [m, n] : s.per_mode) os << "  " << m << ": " << n << "\n";
  os << "per color:\n";
  for (const auto& [c, n] : s.per_color) os << "  " << c << ": " << n << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------

ValidationReport validate_dataset(const std::string& dir, const DatasetExpectations& expect,
                                  bool check_images) {
  ValidationReport report;
  auto problem = [&](std::string msg) { report.problems.push_back(std::move(msg)); };
  const fs::path root(dir);

  ManifestReadResult parsed;
  try {
    parsed = read_manifest_file((root / "manifest.jsonl").string());
  } catch (const Error& e) {
    problem(std::string("manifest: ") + e.what());
    return report;
  }
  const auto& records = parsed.manifest.records;
  report.records = records.size();
  // A cut-off last line is what a crash mid-append leaves; readers skip it.
  report.truncated_tail = parsed.truncated_tail;
  if (!expect.config_digest.empty() && parsed.manifest.config_digest != expect.config_digest)
    problem("manifest config digest does not match config.json");

  std::set<std::uint64_t> slots;
  std::map<std::string, std::size_t> per_brand;
  for (const auto& r : records) {
    const std::string where = "record " + r.id;
    if (!slots.insert(r.slot).second) problem(where + ": duplicate slot " + std::to_string(r.slot));
    const auto it = std::find(expect.brands.begin(), expect.brands.end(), r.brand);
    if (it == expect.brands.end()) {
      problem(where + ": brand '" + r.brand + "' not configured");
      continue;
    }
    ++per_brand[r.brand];
    if (r.brand_index != static_cast<int>(it - expect.brands.begin()))
      problem(where + ": brand_index does not match brand position");
    if (!is_valid_normalized(r.bbox)) problem(where + ": bbox is not a valid normalized rect");
    if (r.image_path != image_rel_path(r.brand, r.id)) problem(where + ": unexpected image path");
    if (expect.planned_total && r.slot >= expect.planned_total)
      problem(where + ": slot beyond the planned total");

    const fs::path label_path = root / label_rel_path(r.brand, r.id);
    std::ifstream label(label_path);
    std::string line;
    if (!label || !std::getline(label, line)) {
      problem(where + ": missing label file");
    } else if (line + "\n" != write_label_file(r)) {
      problem(where + ": label file disagrees with record");
    }

    const fs::path image_path = root / r.image_path;
    if (!fs::exists(image_path)) {
      problem(where + ": missing image");
    } else if (check_images) {
      try {
        const ImageBuf img = read_png_file(image_path.string());
        if (img.width() != expect.image_size || img.height() != expect.image_size)
          problem(where + ": image is " + std::to_string(img.width()) + "x" +
                  std::to_string(img.height()));
      } catch (const Error& e) {
        problem(where + ": " + e.what());
      }
    }
  }

  try {
    const auto rejections = read_rejections_file((root / "rejections.jsonl").string());
    report.rejections = rejections.size();
  } catch (const Error& e) {
    problem(std::string("rejections: ") + e.what());
  }

  report.complete = expect.planned_total != 0 && records.size() == expect.planned_total;
  if (expect.planned_total && records.size() > expect.planned_total)
    problem("more records than planned");
  if (expect.quota_per_brand) {
    for (const auto& b : expect.brands) {
      const std::size_t n = per_brand.contains(b) ? per_brand[b] : 0;
      if (n > *expect.quota_per_brand)
        problem("brand " + b + " exceeds its quota (" + std::to_string(n) + ")");
      if (report.complete && n != *expect.quota_per_brand)
        problem("brand " + b + " has " + std::to_string(n) + " records, quota is " +
                std::to_string(*expect.quota_per_brand));
    }
  }
  return report;
}

}  // namespace synthset
