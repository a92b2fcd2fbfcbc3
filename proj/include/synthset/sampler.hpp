#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "synthset/catalog.hpp"
#include "synthset/common.hpp"

namespace synthset {

/// One sampled generation target.
struct LabelSpec {
  std::string brand;
  std::string model;
  int year = 0;
  std::string color;
  Mode mode = Mode::TextToImage;
  std::uint64_t seq = 0;

  bool operator==(const LabelSpec&) const = default;
};

struct PromptText {
  std::string text;
  std::string subject_substring;

  bool operator==(const PromptText&) const = default;
};

enum class Balance { IidHierarchical, ExactQuota };

std::string_view to_string(Balance b);
Balance parse_balance(std::string_view text);

const std::vector<std::string>& default_colors();
const std::string& default_prompt_template();

struct SamplePlan {
  std::size_t total = 0;
  std::map<Mode, double> mode_mix = {{Mode::TextToImage, 0.5}, {Mode::ImageToImage, 0.5}};
  Balance balance = Balance::ExactQuota;
  std::uint64_t seed = 0;
  std::vector<std::string> colors = default_colors();
};

/// Throws Config when the plan is unusable against this catalog.
void validate_plan(const VehicleCatalog& catalog, const SamplePlan& plan);

/// Parses "t2i=0.5,i2i=0.5".
std::map<Mode, double> parse_mode_mix(std::string_view text);

/// Draws plan.total labels.
///
/// IidHierarchical: every draw picks brand, then model within the brand, then
/// build year within the model, each uniformly; color and mode independently.
/// ExactQuota: label i belongs to brand i mod |brands|, so every brand gets
/// exactly total/|brands| labels; modes are split by exact proportion within a
/// brand and shuffled. Pure function of (catalog, plan).
std::vector<LabelSpec> sample_labels(const VehicleCatalog& catalog, const SamplePlan& plan);

/// A fresh label for a fixed brand and mode (model, year, color redrawn).
LabelSpec draw_within_brand(const VehicleCatalog& catalog, std::string_view brand, Mode mode,
                            const std::vector<std::string>& colors, std::uint64_t seq,
                            Rng& rng);

/// Substitutes {color} {brand} {model} {year}. Any other {token} is a
/// Template error, as is a template whose rendered subject
/// "<color> <brand> <model> <year>" does not occur exactly once.
PromptText build_prompt(const LabelSpec& label, std::string_view prompt_template);

}  // namespace synthset
