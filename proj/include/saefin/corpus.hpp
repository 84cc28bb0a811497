#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saefin/clustering.hpp"
#include "saefin/common.hpp"
#include "saefin/date.hpp"
#include "saefin/sparsefeat.hpp"

namespace saefin {

/// Number of SIC major-division buckets used for BISC codes.
inline constexpr int kBiscDivisions = 12;

/// Maps a 4-digit SIC code to its major division (0..11). Divisions A..K
/// follow the standard 2-digit ranges; unassigned prefixes share bucket 11.
int bisc_division(int sic_code);
std::string_view bisc_division_name(int division);

struct CompanyRecord {
  CompanyId company_id;
  std::string ticker;
  int year = 0;
  int sic_code = 0;
  int bisc_code = 0;
};

/// Twelve logged monthly returns of one company in one year.
struct ReturnSeries {
  CompanyId company_id;
  int year = 0;
  std::array<double, 12> values{};
};

struct PriceObservation {
  Date date;
  double adj_close = 0.0;
};

/// Daily adjusted closes, dates strictly increasing, prices positive.
struct PriceSeries {
  CompanyId company_id;
  std::vector<PriceObservation> observations;
};

using PriceBook = std::map<CompanyId, PriceSeries>;

/// One calendar year of the company panel. Every company in `records` has a
/// return series and a summed feature vector for that year.
struct YearPanel {
  int year = 0;
  std::vector<CompanyRecord> records;  // sorted by company_id
  std::map<CompanyId, ReturnSeries> returns;
  std::map<CompanyId, SummedFeatureVector> summed_features;

  const CompanyRecord* find(std::string_view company_id) const;
  std::vector<CompanyId> company_ids() const;
};

enum class FeatureFormat { Summed, Tokens };

struct LoadConfig {
  FeatureFormat features_format = FeatureFormat::Summed;
  FeatureSpace space{};
  /// Apply log(1 + r) to returns on ingest.
  bool raw_returns = false;
};

/// Row counts per drop reason plus warnings, rendered as key=value text.
struct LoadReport {
  std::map<std::string, std::size_t> counts;
  std::vector<std::string> warnings;

  void add(const std::string& key, std::size_t n = 1) { counts[key] += n; }
  std::size_t count(const std::string& key) const;
  std::string to_text() const;
};

struct LoadedCorpus {
  std::vector<YearPanel> panels;  // ascending by year
  LoadReport report;
};

inline constexpr int kMinReturnMonths = 12;

/// Loads metadata, returns and features, cross-validates them and builds one
/// panel per year present in all three sources.
LoadedCorpus load_panel(const std::filesystem::path& features_path,
                        const std::filesystem::path& returns_path,
                        const std::filesystem::path& metadata_path, const LoadConfig& config);

/// Removes companies that appear in fewer than min_years panels.
std::vector<YearPanel> filter_min_history(std::vector<YearPanel> panels, int min_years);

enum class BenchmarkScheme { SIC, BISC };

/// One cluster per distinct code value.
YearClustering benchmark_clusters(const YearPanel& panel, BenchmarkScheme scheme);

/// Reads one year from a `year,cluster_id,company_id` file; every company must
/// exist in the panel.
YearClustering load_external_clustering(const std::filesystem::path& path, int year,
                                        const YearPanel& panel);

/// prices CSV: company_id,date,adj_close
PriceBook load_prices(const std::filesystem::path& path);

void write_metadata(const std::filesystem::path& path, std::span<const CompanyRecord> records);
void write_returns(const std::filesystem::path& path, std::span<const ReturnSeries> returns);
void write_prices(const std::filesystem::path& path, const PriceBook& prices);

}  // namespace saefin
