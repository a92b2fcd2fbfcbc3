#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace synthset {

/// One registered car model: brand, model name, class and build years.
struct ModelEntry {
  std::string brand;
  std::string model;
  std::string vehicle_class;  // metadata only
  std::set<int> build_years;
  std::uint64_t registered_count = 0;

  bool operator==(const ModelEntry&) const = default;
};

/// The eight brands most frequent in German traffic, in label order.
const std::vector<std::string>& default_brands();

inline constexpr int kDefaultMinYear = 1990;

struct CatalogFilter {
  std::vector<std::string> brand_whitelist = default_brands();
  int min_year = kDefaultMinYear;
};

class VehicleCatalog {
 public:
  VehicleCatalog(std::vector<ModelEntry> entries, std::vector<std::string> brand_whitelist,
                 int min_year);

  const std::vector<ModelEntry>& entries() const { return entries_; }
  const std::vector<std::string>& brands() const { return brands_; }
  int min_year() const { return min_year_; }

  /// Entries of one brand, in catalog order.
  std::vector<const ModelEntry*> models_of(std::string_view brand) const;

  /// Position of a brand in the whitelist, or -1.
  int brand_index(std::string_view brand) const;

  /// Catalog document text (same format load_catalog reads).
  std::string serialize() const;

  bool operator==(const VehicleCatalog&) const = default;

 private:
  std::vector<ModelEntry> entries_;
  std::vector<std::string> brands_;
  int min_year_;
};

struct DropReport {
  std::size_t brand_filtered = 0;
  std::size_t year_filtered = 0;  // rows whose build years all predate min_year

  bool operator==(const DropReport&) const = default;
};

struct LoadResult {
  VehicleCatalog catalog;
  DropReport dropped;
};

/// Parses a catalog document:
///   brand,model,vehicle_class,build_years,registered_count
///   Skoda,Karoq,SUV,2017|2018|2020,35000
/// Throws Parse for malformed rows (1-based row number in the message, header
/// is row 1), Config for an empty whitelist, an empty result or duplicate
/// (brand, model) pairs.
LoadResult load_catalog(std::string_view document, const CatalogFilter& filter);
LoadResult load_catalog_file(const std::string& path, const CatalogFilter& filter);

struct BrandSummary {
  std::string brand;
  std::size_t models = 0;
  int first_year = 0;  // 0 when the brand has no models
  int last_year = 0;
  std::uint64_t registered = 0;
};

/// One row per whitelisted brand, in whitelist order.
std::vector<BrandSummary> catalog_summary(const VehicleCatalog& catalog);

}  // namespace synthset
