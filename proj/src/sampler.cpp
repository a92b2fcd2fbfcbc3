#include "synthset/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace synthset {

std::string_view to_string(Balance b) {
  return b == Balance::ExactQuota ? "quota" : "iid";
}

Balance parse_balance(std::string_view text) {
  if (text == "quota") return Balance::ExactQuota;
  if (text == "iid") return Balance::IidHierarchical;
  throw Error(ErrorKind::Config, "unknown balance mode '" + std::string(text) + "'");
}

const std::vector<std::string>& default_colors() {
  static const std::vector<std::string> colors = {"black", "white", "gray",  "silver",
                                                  "blue",  "red",   "green", "brown"};
  return colors;
}

const std::string& default_prompt_template() {
  static const std::string t =
      "a photograph of a {color} {brand} {model} {year}, on a road, shot from the front, "
      "from above, centered";
  return t;
}

std::map<Mode, double> parse_mode_mix(std::string_view text) {
  std::map<Mode, double> mix;
  for (const auto& part : split(text, ',')) {
    const auto kv = split(trim(part), '=');
    if (kv.size() != 2) throw Error(ErrorKind::Config, "bad mode-mix entry '" + part + "'");
    const Mode mode = parse_mode(trim(kv[0]));
    double frac = 0.0;
    try {
      std::size_t used = 0;
      const std::string v = trim(kv[1]);
      frac = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, "bad mode-mix fraction '" + kv[1] + "'");
    }
    mix[mode] = frac;
  }
  return mix;
}

void validate_plan(const VehicleCatalog& catalog, const SamplePlan& plan) {
  if (plan.total == 0) throw Error(ErrorKind::Config, "plan total must be positive");
  if (plan.colors.empty()) throw Error(ErrorKind::Config, "color list is empty");
  if (plan.mode_mix.empty()) throw Error(ErrorKind::Config, "mode mix is empty");
  double sum = 0.0;
  for (const auto& [mode, frac] : plan.mode_mix) {
    if (!(frac >= 0.0)) throw Error(ErrorKind::Config, "negative mode fraction");
    sum += frac;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw Error(ErrorKind::Config, "mode mix fractions must sum to 1");
  for (const auto& brand : catalog.brands())
    if (catalog.models_of(brand).empty())
      throw Error(ErrorKind::Config, "brand '" + brand + "' has no models in the catalog");
  if (plan.balance == Balance::ExactQuota && plan.total % catalog.brands().size() != 0)
    throw Error(ErrorKind::Config, "quota total " + std::to_string(plan.total) +
                                       " is not divisible by " +
                                       std::to_string(catalog.brands().size()) + " brands");
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.below(items.size())];
}

int pick_year(const ModelEntry& e, Rng& rng) {
  auto it = e.build_years.begin();
  std::advance(it, static_cast<long>(rng.below(e.build_years.size())));
  return *it;
}

Mode pick_mode(const std::map<Mode, double>& mix, Rng& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  Mode last = mix.begin()->first;
  for (const auto& [mode, frac] : mix) {
    if (frac <= 0.0) continue;
    acc += frac;
    last = mode;
    if (u < acc) return mode;
  }
  return last;
}

// Exact per-brand mode counts by largest remainder, in map order.
std::vector<Mode> quota_modes(const std::map<Mode, double>& mix, std::size_t n) {
  std::vector<std::pair<Mode, double>> entries(mix.begin(), mix.end());
  std::vector<std::size_t> counts(entries.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double exact = entries[i].second * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[remainders[k].second];

  std::vector<Mode> out;
  out.reserve(n);
  for (std::size_t i = 0; i < entries.size(); ++i) out.insert(out.end(), counts[i], entries[i].first);
  return out;
}

}  // namespace

LabelSpec draw_within_brand(const VehicleCatalog& catalog, std::string_view brand, Mode mode,
                            const std::vector<std::string>& colors, std::uint64_t seq,
                            Rng& rng) {
  const auto models = catalog.models_of(brand);
  if (models.empty())
    throw Error(ErrorKind::Config, "brand '" + std::string(brand) + "' has no models");
  const ModelEntry& entry = *pick(models, rng);
  LabelSpec label;
  label.brand = entry.brand;
  label.model = entry.model;
  label.year = pick_year(entry, rng);
  label.color = pick(colors, rng);
  label.mode = mode;
  label.seq = seq;
  return label;
}

std::vector<LabelSpec> sample_labels(const VehicleCatalog& catalog, const SamplePlan& plan) {
  validate_plan(catalog, plan);
  const auto& brands = catalog.brands();
  Rng rng(plan.seed);
  std::vector<LabelSpec> labels;
  labels.reserve(plan.total);

  if (plan.balance == Balance::IidHierarchical) {
    for (std::size_t i = 0; i < plan.total; ++i) {
      const std::string& brand = pick(brands, rng);
      const ModelEntry& entry = *pick(catalog.models_of(brand), rng);
      LabelSpec label;
      label.brand = entry.brand;
      label.model = entry.model;
      label.year = pick_year(entry, rng);
      label.color = pick(plan.colors, rng);
      label.mode = pick_mode(plan.mode_mix, rng);
      label.seq = i;
      labels.push_back(std::move(label));
    }
    return labels;
  }

  const std::size_t per_brand = plan.total / brands.size();
  std::vector<std::vector<Mode>> modes(brands.size());
  for (auto& m : modes) {
    m = quota_modes(plan.mode_mix, per_brand);
    for (std::size_t i = m.size(); i > 1; --i) std::swap(m[i - 1], m[rng.below(i)]);
  }
  for (std::size_t i = 0; i < plan.total; ++i) {
    const std::size_t b = i % brands.size();
    labels.push_back(
        draw_within_brand(catalog, brands[b], modes[b][i / brands.size()], plan.colors, i, rng));
  }
  return labels;
}

PromptText build_prompt(const LabelSpec& label, std::string_view tmpl) {
  const std::string year = std::to_string(label.year);
  std::string out;
  out.reserve(tmpl.size() + 32);
  std::vector<std::string> unknown;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] != '{') {
      out += tmpl[i++];
      continue;
    }
    const auto close = tmpl.find('}', i);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    const std::string_view token = tmpl.substr(i + 1, close - i - 1);
    if (token == "color") {
      out += label.color;
    } else if (token == "brand") {
      out += label.brand;
    } else if (token == "model") {
      out += label.model;
    } else if (token == "year") {
      out += year;
    } else {
      unknown.emplace_back("{" + std::string(token) + "}");
      out.append(tmpl.substr(i, close - i + 1));
    }
    i = close + 1;
  }
  if (!unknown.empty())
    throw Error(ErrorKind::Template, "unknown placeholder(s) " + join(unknown, ", "));

  PromptText prompt;
  prompt.subject_substring = label.color + " " + label.brand + " " + label.model + " " + year;
  std::size_t count = 0;
  for (auto pos = out.find(prompt.subject_substring); pos != std::string::npos;
       pos = out.find(prompt.subject_substring, pos + 1))
    ++count;
  if (count != 1)
    throw Error(ErrorKind::Template,
                "subject '" + prompt.subject_substring + "' occurs " + std::to_string(count) +
                    " times in the rendered prompt; the template needs "
                    "'{color} {brand} {model} {year}' exactly once");
  prompt.text = std::move(out);
  return prompt;
}

}  // namespace synthset
