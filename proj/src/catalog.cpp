#include "synthset/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "synthset/common.hpp"

namespace synthset {

const std::vector<std::string>& default_brands() {
  static const std::vector<std::string> brands = {"Volkswagen", "Ford",     "BMW",     "Audi",
                                                  "Opel",       "Mercedes", "Renault", "Skoda"};
  return brands;
}

VehicleCatalog::VehicleCatalog(std::vector<ModelEntry> entries,
                               std::vector<std::string> brand_whitelist, int min_year)
    : entries_(std::move(entries)), brands_(std::move(brand_whitelist)), min_year_(min_year) {
  if (brands_.empty()) throw Error(ErrorKind::Config, "brand whitelist is empty");
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : entries_) {
    if (brand_index(e.brand) < 0)
      throw Error(ErrorKind::Config, "brand '" + e.brand + "' is not whitelisted");
    if (e.build_years.empty() || *e.build_years.begin() < min_year_)
      throw Error(ErrorKind::Config, "entry " + e.brand + " " + e.model + " violates min_year");
    if (!seen.emplace(e.brand, e.model).second)
      throw Error(ErrorKind::Config, "duplicate catalog entry " + e.brand + " " + e.model);
  }
}

std::vector<const ModelEntry*> VehicleCatalog::models_of(std::string_view brand) const {
  std::vector<const ModelEntry*> out;
  for (const auto& e : entries_)
    if (e.brand == brand) out.push_back(&e);
  return out;
}

int VehicleCatalog::brand_index(std::string_view brand) const {
  const auto it = std::find(brands_.begin(), brands_.end(), brand);
  return it == brands_.end() ? -1 : static_cast<int>(it - brands_.begin());
}

namespace {

constexpr std::string_view kHeader = "brand,model,vehicle_class,build_years,registered_count";

// Splits one CSV line, honouring double-quoted fields ("" escapes a quote).
std::vector<std::string> split_csv(std::string_view line, std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

std::string quote_csv(const std::string& field) {
  if (field.find_first_of(",\"") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <typename T>
bool parse_int(std::string_view text, T& out) {
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace

std::string VehicleCatalog::serialize() const {
  std::ostringstream os;
  os << kHeader << '\n';
  for (const auto& e : entries_) {
    std::vector<std::string> years;
    for (int y : e.build_years) years.push_back(std::to_string(y));
    os << quote_csv(e.brand) << ',' << quote_csv(e.model) << ',' << quote_csv(e.vehicle_class)
       << ',' << join(years, "|") << ',' << e.registered_count << '\n';
  }
  return os.str();
}

LoadResult load_catalog(std::string_view document, const CatalogFilter& filter) {
  if (filter.brand_whitelist.empty())
    throw Error(ErrorKind::Config, "brand whitelist is empty");

  std::vector<ModelEntry> kept;
  DropReport dropped;
  std::set<std::pair<std::string, std::string>> seen;

  std::size_t row = 0;
  bool header_seen = false;
  for (const auto& raw : split(document, '\n')) {
    ++row;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kHeader)
        throw Error(ErrorKind::Parse, "row " + std::to_string(row) + ": expected header '" +
                                          std::string(kHeader) + "'");
      header_seen = true;
      continue;
    }
    auto fields = split_csv(line, row);
    const std::string where = "row " + std::to_string(row);
    if (fields.size() != 5)
      throw Error(ErrorKind::Parse, where + ": expected 5 fields, got " +
                                        std::to_string(fields.size()));
    for (auto& f : fields) f = trim(f);

    ModelEntry e;
    e.brand = fields[0];
    e.model = fields[1];
    e.vehicle_class = fields[2];
    if (e.brand.empty()) throw Error(ErrorKind::Parse, where + ": empty brand");
    if (e.model.empty()) throw Error(ErrorKind::Parse, where + ": empty model");
    if (fields[3].empty()) throw Error(ErrorKind::Parse, where + ": missing build_years");
    for (const auto& y : split(fields[3], '|')) {
      int year = 0;
      if (!parse_int(trim(y), year))
        throw Error(ErrorKind::Parse, where + ": non-integer year '" + y + "'");
      e.build_years.insert(year);
    }
    if (!parse_int(fields[4], e.registered_count))
      throw Error(ErrorKind::Parse, where + ": invalid registered_count '" + fields[4] + "'");

    if (!seen.emplace(e.brand, e.model).second)
      throw Error(ErrorKind::Config, where + ": duplicate entry " + e.brand + " " + e.model);

    if (std::find(filter.brand_whitelist.begin(), filter.brand_whitelist.end(), e.brand) ==
        filter.brand_whitelist.end()) {
      ++dropped.brand_filtered;
      continue;
    }
    std::erase_if(e.build_years, [&](int y) { return y < filter.min_year; });
    if (e.build_years.empty()) {
      ++dropped.year_filtered;
      continue;
    }
    kept.push_back(std::move(e));
  }
  if (!header_seen) throw Error(ErrorKind::Parse, "catalog document has no header row");
  if (kept.empty()) throw Error(ErrorKind::Config, "catalog is empty after filtering");

  return {VehicleCatalog(std::move(kept), filter.brand_whitelist, filter.min_year), dropped};
}

LoadResult load_catalog_file(const std::string& path, const CatalogFilter& filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot open catalog '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_catalog(ss.str(), filter);
}

std::vector<BrandSummary> catalog_summary(const VehicleCatalog& catalog) {
  std::vector<BrandSummary> rows;
  for (const auto& brand : catalog.brands()) {
    BrandSummary s;
    s.brand = brand;
    for (const auto* e : catalog.models_of(brand)) {
      ++s.models;
      s.registered += e->registered_count;
      const int lo = *e->build_years.begin();
      const int hi = *e->build_years.rbegin();
      s.first_year = s.first_year == 0 ? lo : std::min(s.first_year, lo);
      s.last_year = std::max(s.last_year, hi);
    }
    rows.push_back(std::move(s));
  }
  return rows;
}

}  // namespace synthset
