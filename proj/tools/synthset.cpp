// synthset command line: generate, validate, stats, split, eval, curve, catalog.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "synthset/catalog.hpp"
#include "synthset/dataset.hpp"
#include "synthset/metrics.hpp"
#include "synthset/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace synthset;

namespace {

std::vector<std::string> comma_list(const std::string& text) {
  std::vector<std::string> out;
  for (auto& part : split(text, ',')) {
    auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Input, "cannot write '" + path + "'");
  out << text;
}

struct GenerateArgs {
  std::string config;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  std::optional<std::string> output;

  std::optional<std::string> catalog, brands, template_path, colors, mode_mix, balance;
  std::optional<int> min_year;
  std::optional<std::size_t> total;
  std::optional<std::string> backend, backend_url, detector, vehicle_labels;
  std::optional<int> size, target_size;
  std::optional<double> timeout_secs, min_confidence, rotation_max;
  bool no_augment = false;
  bool keep_rejected = false;
};

void apply_overrides(PipelineConfig& cfg, const GenerateArgs& a) {
  if (a.output) cfg.output_dir = fs::absolute(*a.output).lexically_normal().string();
  if (a.workers) cfg.workers = *a.workers;
  if (a.seed) cfg.plan.seed = *a.seed;
  if (a.catalog) cfg.catalog_path = fs::absolute(*a.catalog).lexically_normal().string();
  if (a.brands) cfg.filter.brand_whitelist = comma_list(*a.brands);
  if (a.min_year) cfg.filter.min_year = *a.min_year;
  if (a.total) cfg.plan.total = *a.total;
  if (a.balance) cfg.plan.balance = parse_balance(*a.balance);
  if (a.mode_mix) cfg.plan.mode_mix = parse_mode_mix(*a.mode_mix);
  if (a.colors) cfg.plan.colors = comma_list(*a.colors);
  if (a.template_path) {
    std::ifstream in(*a.template_path);
    if (!in) throw Error(ErrorKind::Config, "cannot open template '" + *a.template_path + "'");
    std::getline(in, cfg.prompt_template);
  }
  if (a.backend) cfg.synthesis.backend = *a.backend;
  if (a.backend_url) cfg.synthesis.url = *a.backend_url;
  if (a.size) cfg.synthesis.size = *a.size;
  if (a.timeout_secs) cfg.synthesis.timeout_seconds = *a.timeout_secs;
  if (a.detector) cfg.detector.kind = *a.detector;
  if (a.min_confidence) cfg.detector.gate.min_confidence = *a.min_confidence;
  if (a.vehicle_labels) {
    const auto labels = comma_list(*a.vehicle_labels);
    cfg.detector.gate.vehicle_labels = {labels.begin(), labels.end()};
  }
  if (a.target_size) cfg.augment.target_size = *a.target_size;
  if (a.rotation_max) cfg.augment.rotation_max_degrees = *a.rotation_max;
  if (a.no_augment) cfg.augment_enabled = false;
  if (a.keep_rejected) cfg.keep_rejected = true;
}

void print_run(const RunResult& r) {
  std::cout << "accepted " << r.stats.accepted << ", attempts " << r.stats.attempts;
  for (const auto& [reason, n] : r.stats.rejected) std::cout << ", " << reason << " " << n;
  std::cout << "\n";
}

int cmd_generate(const GenerateArgs& a) {
  RunControl control;
  control.progress = [](const std::string& line) { std::cerr << line << std::endl; };
  if (a.resume) {
    // Only the output directory and worker count may be given with --resume.
    std::string dir;
    if (a.output) dir = *a.output;
    else if (!a.config.empty()) dir = load_config_file(a.config).output_dir;
    else throw Error(ErrorKind::Config, "--resume needs --output or --config");
    print_run(resume(dir, control, a.workers));
    return 0;
  }
  PipelineConfig cfg;
  if (!a.config.empty()) cfg = load_config_file(a.config);
  apply_overrides(cfg, a);
  print_run(run(cfg, control));
  return 0;
}

int cmd_validate(const std::string& dir, bool skip_images) {
  const auto report = validate_output_dir(dir, !skip_images);
  std::cout << report.records << " records, " << report.rejections << " rejections, "
            << (report.complete ? "complete" : "partial") << "\n";
  for (const auto& p : report.problems) std::cout << "problem: " << p << "\n";
  std::cout << (report.ok() ? "OK" : "INVALID") << "\n";
  return report.ok() ? 0 : 1;
}

int cmd_stats(const std::string& dir) {
  const auto cfg = load_snapshot(dir);
  const auto manifest = read_manifest_file((fs::path(dir) / "manifest.jsonl").string()).manifest;
  std::cout << render_stats(dataset_stats(manifest.records, cfg.filter.brand_whitelist));
  std::cout << "\n" << render_throughput(throughput_report(manifest.records));
  return 0;
}

int cmd_split(const std::string& rule, const std::string& samples, const std::string& brands,
              const std::string& out_dir) {
  const auto brand_list = brands.empty() ? default_brands() : comma_list(brands);
  const auto result =
      split_real(read_real_samples_file(samples, brand_list), read_split_rule_file(rule), brand_list);
  std::cout << render_split_table(result);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (const auto& [name, part] : {std::pair{"validation", &result.validation}, {"test", &result.test}}) {
      std::string text = "image_path,brand,camera_id,recorded_at\n";
      for (const auto& s : *part)
        text += s.image_path + "," + s.brand + "," + s.camera_id + "," + std::to_string(s.recorded_at) + "\n";
      write_text((fs::path(out_dir) / (std::string(name) + ".csv")).string(), text);
    }
  }
  return 0;
}

int cmd_eval(const std::string& preds, const std::string& brands, bool table2, bool macro) {
  const auto classes = brands.empty() ? default_brands() : comma_list(brands);
  const auto cm = confusion(read_predictions_file(preds), classes);
  if (!table2) std::cout << "counts\n" << render_counts(cm) << "\n";
  std::cout << "row-normalized\n" << render_normalized(cm) << "\n";
  std::printf("accuracy %.4f\n", accuracy(cm));
  if (macro) std::printf("macro accuracy %.4f\n", macro_accuracy(cm));
  if (!table2) {
    for (const auto& [cls, acc] : per_class_accuracy(cm)) std::printf("  %-12s %.4f\n", cls.c_str(), acc);
  }
  return 0;
}

int cmd_curve(const std::string& runs, const std::string& out, bool sample_std) {
  const auto curve = aggregate_runs(read_runs_file(runs), sample_std ? StdKind::Sample : StdKind::Population);
  std::cout << render_curve_table(curve);
  if (!out.empty()) {
    write_text(out + ".csv", render_curve_csv(curve));
    write_text(out + ".svg", render_curve_svg(curve));
    std::cerr << "wrote " << out << ".csv and " << out << ".svg\n";
  }
  return 0;
}

int cmd_catalog(const std::string& path, const std::string& brands, std::optional<int> min_year) {
  CatalogFilter filter;
  if (!brands.empty()) filter.brand_whitelist = comma_list(brands);
  if (min_year) filter.min_year = *min_year;
  const auto loaded = load_catalog_file(path, filter);
  std::printf("%-12s %6s %6s %6s %12s\n", "brand", "models", "from", "to", "registered");
  for (const auto& s : catalog_summary(loaded.catalog))
    std::printf("%-12s %6zu %6d %6d %12llu\n", s.brand.c_str(), s.models, s.first_year, s.last_year,
                static_cast<unsigned long long>(s.registered));
  std::printf("dropped: %zu outside brand list, %zu without years >= %d\n", loaded.dropped.brand_filtered,
              loaded.dropped.year_filtered, loaded.catalog.min_year());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthset: synthetic car-brand dataset generation and evaluation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "synthesize, gate and store a dataset");
  g->add_option("--config", gen.config, "pipeline config (JSON)");
  g->add_option("--workers", gen.workers)->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed);
  g->add_flag("--resume", gen.resume, "continue the run in the output directory");
  g->add_option("--output", gen.output, "output directory");
  g->add_option("--catalog", gen.catalog);
  g->add_option("--brands", gen.brands, "comma list");
  g->add_option("--min-year", gen.min_year);
  g->add_option("--total", gen.total);
  g->add_option("--balance", gen.balance, "iid|quota");
  g->add_option("--mode-mix", gen.mode_mix, "e.g. t2i=0.5,i2i=0.5");
  g->add_option("--template", gen.template_path, "prompt template file");
  g->add_option("--colors", gen.colors, "comma list");
  g->add_option("--backend", gen.backend, "mock|http");
  g->add_option("--backend-url", gen.backend_url);
  g->add_option("--size", gen.size);
  g->add_option("--timeout-secs", gen.timeout_secs);
  g->add_option("--detector", gen.detector, "mock-oracle|mock-blob|http");
  g->add_option("--min-confidence", gen.min_confidence);
  g->add_option("--vehicle-labels", gen.vehicle_labels, "comma list");
  g->add_option("--target-size", gen.target_size);
  g->add_option("--rotation-max", gen.rotation_max);
  g->add_flag("--no-augment", gen.no_augment);
  g->add_flag("--keep-rejected", gen.keep_rejected);

  std::string dir;
  bool skip_images = false;
  auto* v = app.add_subcommand("validate", "check a dataset directory");
  v->add_option("dir", dir)->required();
  v->add_flag("--skip-images", skip_images, "do not decode PNGs");

  auto* st = app.add_subcommand("stats", "per-brand/mode/color counts and throughput");
  st->add_option("dir", dir)->required();

  std::string rule, samples, brands, out;
  auto* sp = app.add_subcommand("split", "split real samples by camera and time bucket");
  sp->add_option("--rule", rule)->required();
  sp->add_option("--samples", samples)->required();
  sp->add_option("--brands", brands);
  sp->add_option("--out", out, "directory for validation.csv and test.csv");

  std::string preds;
  bool table2 = false, macro = false;
  auto* ev = app.add_subcommand("eval", "confusion matrix and accuracy from predictions");
  ev->add_option("--preds", preds)->required();
  ev->add_option("--brands", brands);
  ev->add_flag("--table2", table2, "normalized matrix and accuracy only");
  ev->add_flag("--macro", macro, "also print macro-averaged accuracy");

  std::string runs;
  bool sample_std = false;
  auto* cu = app.add_subcommand("curve", "accuracy vs dataset size with a 1-std band");
  cu->add_option("--runs", runs)->required();
  cu->add_option("--out", out, "path prefix for .csv and .svg");
  cu->add_flag("--sample-std", sample_std, "n-1 denominator");

  std::string catalog;
  std::optional<int> min_year;
  auto* ca = app.add_subcommand("catalog", "summarize a catalog after filtering");
  ca->add_option("path", catalog)->required();
  ca->add_option("--brands", brands);
  ca->add_option("--min-year", min_year);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*v) return cmd_validate(dir, skip_images);
    if (*st) return cmd_stats(dir);
    if (*sp) return cmd_split(rule, samples, brands, out);
    if (*ev) return cmd_eval(preds, brands, table2, macro);
    if (*cu) return cmd_curve(runs, out, sample_std);
    if (*ca) return cmd_catalog(catalog, brands, min_year);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
