#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "synthset/dataset.hpp"
#include "synthset/imaging.hpp"
#include "synthset/sampler.hpp"

using namespace synthset;

namespace {

const std::vector<std::string>& brands() { return default_brands(); }

SampleRecord random_record(Rng& rng, std::size_t index) {
  SampleRecord r;
  r.id = format_record_id(index);
  r.slot = index * 3 + rng.below(3);
  r.brand_index = static_cast<int>(rng.below(8));
  r.brand = brands()[r.brand_index];
  r.image_path = image_rel_path(r.brand, r.id);
  r.model = "Model \"" + std::to_string(rng.below(1000)) + "\" \\ \xc3\xa9";
  r.year = 1990 + static_cast<int>(rng.below(34));
  r.color = default_colors()[rng.below(8)];
  r.mode = rng.below(2) ? Mode::TextToImage : Mode::ImageToImage;
  r.prompt = "a photograph of a " + r.color + " " + r.brand + "\t" + r.model;
  const double x = rng.uniform(0, 0.9), y = rng.uniform(0, 0.9);
  r.bbox = {x, y, rng.uniform(0.001, 1 - x), rng.uniform(0.001, 1 - y)};
  r.gate_score = rng.uniform01();
  r.backend_model = "mock-procedural-v1";
  r.latency_seconds = rng.uniform(0, 5);
  r.seed = rng.next();
  return r;
}

DatasetManifest random_manifest(std::size_t n, std::uint64_t seed) {
  DatasetManifest m;
  m.config_digest = hex64(seed);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) append_record(m, random_record(rng, i));
  return m;
}

}  // namespace

TEST_CASE("record ids and paths") {
  CHECK(format_record_id(0) == "000000");
  CHECK(format_record_id(1234567) == "1234567");
  CHECK(brand_dir("Mercedes-Benz AG/x") == "Mercedes-Benz_AG_x");
  CHECK(image_rel_path("Skoda", "000012") == "images/Skoda/000012.png");
  CHECK(label_rel_path("Skoda", "000012") == "labels/Skoda/000012.txt");
}

TEST_CASE("append checks density") {
  DatasetManifest m;
  Rng rng(1);
  append_record(m, random_record(rng, 0));
  CHECK(m.records.size() == 1);
  auto skip = random_record(rng, 2);
  try {
    append_record(m, skip);
    FAIL("expected a consistency error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Consistency);
  }
}

TEST_CASE("manifest round trip is byte identical") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = random_manifest(200, seed);
    const std::string text = serialize_manifest(m);
    const auto parsed = parse_manifest(text);
    CHECK_FALSE(parsed.truncated_tail);
    CHECK(parsed.manifest.records == m.records);
    CHECK(parsed.manifest.config_digest == m.config_digest);
    CHECK(serialize_manifest(parsed.manifest) == text);
  }
}

TEST_CASE("manifest text shape") {
  const auto m = random_manifest(3, 9);
  const std::string text = serialize_manifest(m);
  CHECK(text.rfind("{\"config_digest\":\"" + m.config_digest + "\",\"format\":\"synthset-manifest/1\"}\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  const auto line = text.substr(text.find('\n') + 1, text.find('\n', text.find('\n') + 1) - text.find('\n') - 1);
  const auto j = nlohmann::json::parse(line);
  for (const char* key : {"id", "slot", "image", "brand", "brand_index", "model", "year", "color", "mode", "prompt",
                          "bbox", "gate_score", "backend_model", "latency_seconds", "seed"})
    CHECK_MESSAGE(j.contains(key), key);
}

TEST_CASE("unterminated tail is skipped, damage elsewhere is not") {
  const auto m = random_manifest(5, 2);
  std::string text = serialize_manifest(m);
  const auto cut = parse_manifest(text.substr(0, text.size() - 10));
  CHECK(cut.truncated_tail);
  CHECK(cut.manifest.records.size() == 4);

  std::string broken = text;
  broken.replace(broken.find("\"slot\""), 6, "\"slo\"");
  CHECK_THROWS_AS(parse_manifest(broken), Error);
  CHECK_THROWS_AS(parse_manifest("{\"format\":\"other/1\",\"config_digest\":\"x\"}\n"), Error);
  CHECK_THROWS_AS(parse_manifest(""), Error);
}

TEST_CASE("manifest writer appends durably and resumes after a torn line") {
  oracle::TempDir dir("manifest");
  const auto path = dir.sub("manifest.jsonl");
  const auto m = random_manifest(10, 4);
  {
    auto w = ManifestWriter::create(path, m.config_digest);
    for (std::size_t i = 0; i < 6; ++i) w.append(m.records[i]);
    CHECK_THROWS_AS(w.append(m.records[8]), Error);
  }
  {
    std::ofstream torn(path, std::ios::app);
    torn << "{\"backend_model\":\"mock";
  }
  auto w = ManifestWriter::open_existing(path);
  CHECK(w.size() == 6);
  CHECK(w.config_digest() == m.config_digest);
  for (std::size_t i = 6; i < 10; ++i) w.append(m.records[i]);
  CHECK(oracle::slurp(path) == serialize_manifest(m));
  CHECK_THROWS_AS(ManifestWriter::create(dir.sub("nope/none.jsonl"), "x"), Error);
}

TEST_CASE("replaying an append log reproduces the file") {
  oracle::TempDir dir("replay");
  const auto m = random_manifest(100, 8);
  for (int round = 0; round < 2; ++round) {
    auto w = ManifestWriter::create(dir.sub("m" + std::to_string(round)), m.config_digest);
    for (const auto& r : m.records) w.append(r);
  }
  CHECK(oracle::slurp(dir.sub("m0")) == oracle::slurp(dir.sub("m1")));
  CHECK(oracle::slurp(dir.sub("m0")) == serialize_manifest(m));
}

TEST_CASE("label lines") {
  SampleRecord r;
  r.bbox = {0, 0, 1, 1};
  r.brand_index = 0;
  CHECK(write_label_file(r) == "0 0.500000 0.500000 1.000000 1.000000\n");
  r.bbox = {0.25, 0.25, 0.5, 0.5};
  r.brand_index = 3;
  CHECK(write_label_file(r) == "3 0.500000 0.500000 0.500000 0.500000\n");
  CHECK_THROWS_AS(parse_label_line("3 0.5 0.5 0.5"), Error);
  CHECK_THROWS_AS(parse_label_line("3 0.5 0.5 0.5 0.5 9"), Error);
}

TEST_CASE("label round trip to six decimals") {
  Rng rng(10);
  for (std::size_t i = 0; i < 2000; ++i) {
    const auto r = random_record(rng, i);
    const std::string text = write_label_file(r);
    const auto l = parse_label_line(text);
    CHECK(l.class_index == r.brand_index);
    CHECK(std::abs(l.cx - (r.bbox.x + r.bbox.w / 2)) <= 5e-7);
    CHECK(std::abs(l.cy - (r.bbox.y + r.bbox.h / 2)) <= 5e-7);
    CHECK(std::abs(l.w - r.bbox.w) <= 5e-7);
    CHECK(std::abs(l.h - r.bbox.h) <= 5e-7);
    CHECK(format_label_line(l) + "\n" == text);
  }
}

TEST_CASE("rejection log") {
  oracle::TempDir dir("rej");
  CHECK(read_rejections_file(dir.sub("absent.jsonl")).empty());
  const RejectionEvent e{4, 2, "Ford", "Focus", RejectReason::MultipleCars};
  CHECK(rejection_from_json(to_json(e)) == e);
  {
    JsonlAppender out(dir.sub("r.jsonl"), true);
    out.append_line(to_json(e).dump());
    out.append_line(to_json(e).dump());
  }
  { std::ofstream(dir.sub("r.jsonl"), std::ios::app) << "{\"slot\":"; }
  CHECK(read_rejections_file(dir.sub("r.jsonl")).size() == 2);
}

TEST_CASE("camera and time split") {
  const auto rule = read_split_rule_file(oracle::fixture("split_rule.json"));
  CHECK(rule.bucket_seconds == 3600);
  const auto samples = read_real_samples_file(oracle::fixture("real_samples.csv"), brands());
  REQUIRE(samples.size() == 20);
  const auto result = split_real(samples, rule, brands());
  CHECK(result.validation.size() == 15);
  CHECK(result.test.size() == 5);
  // Hand tally of the fixture: sample k has brand k mod 8; k >= 15 is test.
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{2, 1}, {2, 1}, {2, 1}, {2, 1},
                                                                     {2, 0}, {2, 0}, {2, 0}, {1, 1}};
  REQUIRE(result.table.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(result.table[i].brand == brands()[i]);
    CHECK(result.table[i].validation == expected[i].first);
    CHECK(result.table[i].test == expected[i].second);
  }
}

TEST_CASE("split is a partition that keeps camera-buckets together") {
  Rng rng(6);
  SplitRule rule;
  rule.bucket_seconds = 600;
  std::vector<RealSample> samples;
  for (int i = 0; i < 3000; ++i) {
    RealSample s;
    s.image_path = "img" + std::to_string(i);
    s.brand = brands()[rng.below(8)];
    s.camera_id = "c" + std::to_string(rng.below(6));
    s.recorded_at = static_cast<std::int64_t>(rng.below(36000)) - 18000;  // negative times too
    rule.assignment[{s.camera_id, time_bucket(s.recorded_at, 600)}] = rng.below(3) ? Split::Validation : Split::Test;
    samples.push_back(s);
  }
  const auto result = split_real(samples, rule, brands());
  CHECK(result.validation.size() + result.test.size() == samples.size());
  std::set<std::string> v, t;
  std::set<std::pair<std::string, std::int64_t>> vk, tk;
  for (const auto& s : result.validation) {
    v.insert(s.image_path);
    vk.insert({s.camera_id, time_bucket(s.recorded_at, 600)});
  }
  for (const auto& s : result.test) {
    t.insert(s.image_path);
    tk.insert({s.camera_id, time_bucket(s.recorded_at, 600)});
  }
  std::vector<std::string> both;
  std::set_intersection(v.begin(), v.end(), t.begin(), t.end(), std::back_inserter(both));
  CHECK(both.empty());
  std::vector<std::pair<std::string, std::int64_t>> shared;
  std::set_intersection(vk.begin(), vk.end(), tk.begin(), tk.end(), std::back_inserter(shared));
  CHECK(shared.empty());
  CHECK(time_bucket(-1, 600) == -1);
  CHECK(time_bucket(599, 600) == 0);
}

TEST_CASE("split edge cases") {
  SplitRule rule;
  rule.assignment[{"cam", 0}] = Split::Test;
  std::vector<RealSample> samples = {{"a", "Audi", "cam", 10}, {"b", "Opel", "cam", 20}};
  const auto all_test = split_real(samples, rule, brands());
  CHECK(all_test.validation.empty());
  CHECK(all_test.test.size() == 2);

  samples.push_back({"c", "Opel", "other", 20});
  samples.push_back({"d", "Opel", "cam", 7300});
  try {
    split_real(samples, rule, brands());
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("other@0") != std::string::npos);
    CHECK(std::string(e.what()).find("cam@2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_real_samples("image_path,brand,camera_id,recorded_at\na,Toyota,c,1\n", brands()), Error);
  CHECK_THROWS_AS(parse_real_samples("image_path,brand,camera_id,recorded_at\na,Audi,c,soon\n", brands()), Error);
}

TEST_CASE("split table renders eight brand rows") {
  // Volkswagen 533/443 as in the published split, other brands empty.
  std::vector<RealSample> samples;
  SplitRule rule;
  rule.assignment[{"v", 0}] = Split::Validation;
  rule.assignment[{"t", 0}] = Split::Test;
  for (int i = 0; i < 533; ++i) samples.push_back({"v" + std::to_string(i), "Volkswagen", "v", 0});
  for (int i = 0; i < 443; ++i) samples.push_back({"t" + std::to_string(i), "Volkswagen", "t", 0});
  const std::string table = render_split_table(split_real(samples, rule, brands()));
  CHECK(table.find("Volkswagen            533        443") != std::string::npos);
  CHECK(std::count(table.begin(), table.end(), '\n') == 10);  // header, 8 brands, total
}

TEST_CASE("dataset statistics") {
  Rng rng(3);
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < 8000; ++i) {
    auto r = random_record(rng, i);
    r.brand_index = static_cast<int>(i % 8);
    r.brand = brands()[r.brand_index];
    records.push_back(r);
  }
  auto stats = dataset_stats(records, brands());
  CHECK(stats.total == 8000);
  CHECK(stats.balanced);
  for (const auto& [b, n] : stats.per_brand) CHECK(n == 1000);

  auto extra = random_record(rng, 8000);
  extra.brand = "Volkswagen";
  records.push_back(extra);
  stats = dataset_stats(records, brands());
  CHECK_FALSE(stats.balanced);
  CHECK(stats.per_brand[0].second == 1001);

  auto sum = [](const auto& m) {
    std::size_t s = 0;
    for (const auto& [k, v] : m) s += v;
    return s;
  };
  CHECK(sum(stats.per_mode) == records.size());
  CHECK(sum(stats.per_color) == records.size());
  CHECK(sum(stats.per_model) == records.size());
  CHECK(render_stats(stats).find("balanced: false") != std::string::npos);
}

TEST_CASE("histogram totals match on random manifests") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = random_manifest(Rng(seed).below(300), seed);
    const auto stats = dataset_stats(m.records, brands());
    std::size_t brand_sum = 0;
    for (const auto& [b, n] : stats.per_brand) brand_sum += n;
    CHECK(brand_sum == m.records.size());
  }
}

TEST_CASE("validator flags broken directories") {
  oracle::TempDir dir("validate");
  const auto root = dir.path();
  const auto m = random_manifest(8, 5);
  {
    auto w = ManifestWriter::create((root / "manifest.jsonl").string(), m.config_digest);
    for (const auto& r : m.records) {
      std::filesystem::create_directories((root / r.image_path).parent_path());
      std::filesystem::create_directories((root / label_rel_path(r.brand, r.id)).parent_path());
      ImageBuf img(64, 64);
      write_png_file((root / r.image_path).string(), img);
      std::ofstream((root / label_rel_path(r.brand, r.id)).string()) << write_label_file(r);
      w.append(r);
    }
  }
  DatasetExpectations expect;
  expect.brands = brands();
  expect.planned_total = 100;
  expect.config_digest = m.config_digest;
  auto report = validate_dataset(dir.str(), expect);
  CHECK_MESSAGE(report.ok(), (report.problems.empty() ? "" : report.problems[0]));
  CHECK_FALSE(report.complete);

  expect.image_size = 32;
  CHECK_FALSE(validate_dataset(dir.str(), expect).ok());
  expect.image_size = 64;

  expect.config_digest = "different";
  CHECK_FALSE(validate_dataset(dir.str(), expect).ok());
  expect.config_digest = m.config_digest;

  std::ofstream((root / label_rel_path(m.records[3].brand, m.records[3].id)).string()) << "0 0.1 0.1 0.1 0.1\n";
  report = validate_dataset(dir.str(), expect);
  REQUIRE(report.problems.size() == 1);
  CHECK(report.problems[0].find("record 000003") != std::string::npos);

  std::filesystem::remove(root / m.records[5].image_path);
  CHECK(validate_dataset(dir.str(), expect).problems.size() == 2);
}
