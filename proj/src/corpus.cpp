#include "saefin/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "saefin/csv.hpp"

namespace saefin {

namespace {

struct Division {
  int lo;  // inclusive 2-digit prefix range
  int hi;
  std::string_view name;
};

// Standard SIC major divisions by 2-digit prefix.
constexpr std::array<Division, 11> kDivisions{{
    {1, 9, "A: Agriculture, Forestry and Fishing"},
    {10, 14, "B: Mining"},
    {15, 17, "C: Construction"},
    {20, 39, "D: Manufacturing"},
    {40, 49, "E: Transportation, Communications, Electric, Gas and Sanitary Services"},
    {50, 51, "F: Wholesale Trade"},
    {52, 59, "G: Retail Trade"},
    {60, 67, "H: Finance, Insurance and Real Estate"},
    {70, 89, "I: Services"},
    {91, 97, "J: Public Administration"},
    {99, 99, "K: Nonclassifiable Establishments"},
}};

constexpr std::string_view kUnassigned = "L: Unassigned prefix";

constexpr std::size_t kMaxWarnings = 200;

void warn(LoadReport& report, std::string msg) {
  if (report.warnings.size() < kMaxWarnings) report.warnings.push_back(std::move(msg));
}

using Key = std::pair<CompanyId, int>;

struct ReturnAccumulator {
  std::array<double, 12> values{};
  std::array<bool, 12> seen{};
  bool nonfinite = false;
};

}  // namespace

int bisc_division(int sic_code) {
  if (sic_code < 100 || sic_code > 9999) {
    throw InputError(fmt::format("SIC code {} outside [100, 9999]", sic_code));
  }
  const int prefix = sic_code / 100;
  for (std::size_t d = 0; d < kDivisions.size(); ++d) {
    if (prefix >= kDivisions[d].lo && prefix <= kDivisions[d].hi) return static_cast<int>(d);
  }
  return kBiscDivisions - 1;
}

std::string_view bisc_division_name(int division) {
  if (division >= 0 && division < static_cast<int>(kDivisions.size())) return kDivisions[division].name;
  if (division == kBiscDivisions - 1) return kUnassigned;
  throw InputError(fmt::format("BISC division {} out of range", division));
}

const CompanyRecord* YearPanel::find(std::string_view company_id) const {
  auto it = std::lower_bound(records.begin(), records.end(), company_id,
                             [](const CompanyRecord& r, std::string_view id) { return r.company_id < id; });
  return (it != records.end() && it->company_id == company_id) ? &*it : nullptr;
}

std::vector<CompanyId> YearPanel::company_ids() const {
  std::vector<CompanyId> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.company_id);
  return ids;
}

std::size_t LoadReport::count(const std::string& key) const {
  auto it = counts.find(key);
  return it == counts.end() ? 0 : it->second;
}

std::string LoadReport::to_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : counts) out << k << '=' << v << '\n';
  for (const auto& w : warnings) out << "warning=" << w << '\n';
  return out.str();
}

LoadedCorpus load_panel(const std::filesystem::path& features_path,
                        const std::filesystem::path& returns_path,
                        const std::filesystem::path& metadata_path, const LoadConfig& config) {
  config.space.validate();
  LoadedCorpus result;
  LoadReport& report = result.report;

  // Metadata.
  std::map<Key, CompanyRecord> metadata;
  {
    csv::Reader r(metadata_path, {"company_id", "ticker", "year", "sic_code"});
    while (r.next()) {
      report.add("metadata_rows_read");
      CompanyRecord rec;
      rec.company_id = r.field(0);
      rec.ticker = r.field(1);
      rec.year = static_cast<int>(r.as_int(2));
      const auto sic = r.as_int(3);
      if (rec.company_id.empty()) throw InputError(r.where("empty company_id"));
      if (sic < 100 || sic > 9999) {
        report.add("dropped_invalid_sic");
        warn(report, r.where(fmt::format("SIC code {} outside [100, 9999], row dropped", sic)));
        continue;
      }
      rec.sic_code = static_cast<int>(sic);
      rec.bisc_code = bisc_division(rec.sic_code);
      Key key{rec.company_id, rec.year};
      if (!metadata.emplace(key, rec).second) {
        throw InputError(r.where(fmt::format("duplicate (company, year) = ({}, {})", key.first, key.second)));
      }
    }
  }

  // Returns.
  std::map<Key, ReturnAccumulator> returns_acc;
  {
    csv::Reader r(returns_path, {"company_id", "year", "month", "log_return"});
    while (r.next()) {
      report.add("return_rows_read");
      Key key{r.field(0), static_cast<int>(r.as_int(1))};
      const auto month = r.as_int(2);
      if (month < 1 || month > 12) throw InputError(r.where(fmt::format("month {} outside 1..12", month)));
      double v = r.as_double(3);
      if (config.raw_returns) v = std::log1p(v);
      auto& acc = returns_acc[key];
      const auto m = static_cast<std::size_t>(month - 1);
      if (acc.seen[m]) {
        throw InputError(r.where(fmt::format("duplicate return for ({}, {}, month {})", key.first, key.second, month)));
      }
      acc.seen[m] = true;
      acc.values[m] = v;
      if (!std::isfinite(v)) acc.nonfinite = true;
    }
  }

  // Features.
  std::map<Key, SummedFeatureVector> features;
  {
    std::vector<SummedFeatureVector> vectors;
    if (config.features_format == FeatureFormat::Summed) {
      vectors = load_summed_features(features_path, config.space);
    } else {
      const auto tokens = load_token_activations(features_path, config.space);
      vectors = sum_documents(tokens, config.space);
    }
    for (auto& v : vectors) {
      report.add("feature_documents_read");
      const DocKey dk = parse_doc_id(v.doc_id());
      if (!features.emplace(Key{dk.company_id, dk.year}, std::move(v)).second) {
        throw InputError("duplicate feature document " + make_doc_id(dk.company_id, dk.year));
      }
    }
  }

  std::set<int> meta_years, return_years, feature_years;
  for (const auto& [k, _] : metadata) meta_years.insert(k.second);
  for (const auto& [k, _] : returns_acc) return_years.insert(k.second);
  for (const auto& [k, _] : features) feature_years.insert(k.second);
  std::set<int> years;
  for (int y : meta_years) {
    if (return_years.contains(y) && feature_years.contains(y)) years.insert(y);
  }

  std::map<int, YearPanel> panels;
  for (int y : years) panels[y].year = y;

  for (auto& [key, rec] : metadata) {
    if (!years.contains(key.second)) {
      report.add("dropped_year_not_in_all_sources");
      continue;
    }
    const std::string tag = make_doc_id(key.first, key.second);
    auto rit = returns_acc.find(key);
    if (rit == returns_acc.end()) {
      report.add("dropped_missing_returns");
      warn(report, tag + ": no return series, company-year dropped");
      continue;
    }
    const auto& acc = rit->second;
    const auto months = std::count(acc.seen.begin(), acc.seen.end(), true);
    if (months < kMinReturnMonths) {
      report.add("dropped_short_return_series");
      warn(report, fmt::format("{}: only {} monthly returns, company-year dropped", tag, months));
      continue;
    }
    if (acc.nonfinite) {
      report.add("dropped_nonfinite_return");
      warn(report, tag + ": non-finite monthly return, company-year dropped");
      continue;
    }
    auto fit = features.find(key);
    if (fit == features.end()) {
      report.add("dropped_missing_features");
      warn(report, tag + ": no feature document, company-year dropped");
      continue;
    }
    auto& panel = panels[key.second];
    panel.records.push_back(rec);
    panel.returns.emplace(key.first, ReturnSeries{key.first, key.second, acc.values});
    panel.summed_features.emplace(key.first, std::move(fit->second));
    report.add("company_years_loaded");
  }
  for (const auto& [key, _] : features) {
    if (!metadata.contains(key)) {
      report.add("dropped_features_without_metadata");
      warn(report, make_doc_id(key.first, key.second) + ": feature document without metadata row");
    }
  }
  for (const auto& [key, _] : returns_acc) {
    if (!metadata.contains(key)) report.add("dropped_returns_without_metadata");
  }

  for (auto& [y, panel] : panels) {
    std::sort(panel.records.begin(), panel.records.end(),
              [](const auto& a, const auto& b) { return a.company_id < b.company_id; });
    if (panel.records.empty()) continue;
    result.panels.push_back(std::move(panel));
  }
  report.add("panels", result.panels.size());
  return result;
}

std::vector<YearPanel> filter_min_history(std::vector<YearPanel> panels, int min_years) {
  if (min_years < 1) throw InputError("min_years must be >= 1");
  std::map<CompanyId, int> tenure;
  for (const auto& p : panels) {
    for (const auto& r : p.records) ++tenure[r.company_id];
  }
  for (auto& p : panels) {
    std::erase_if(p.records, [&](const CompanyRecord& r) { return tenure[r.company_id] < min_years; });
    std::erase_if(p.returns, [&](const auto& kv) { return tenure[kv.first] < min_years; });
    std::erase_if(p.summed_features, [&](const auto& kv) { return tenure[kv.first] < min_years; });
  }
  std::erase_if(panels, [](const YearPanel& p) { return p.records.empty(); });
  return panels;
}

YearClustering benchmark_clusters(const YearPanel& panel, BenchmarkScheme scheme) {
  std::map<int, std::vector<CompanyId>> groups;
  for (const auto& r : panel.records) {
    groups[scheme == BenchmarkScheme::SIC ? r.sic_code : r.bisc_code].push_back(r.company_id);
  }
  YearClustering yc;
  yc.year = panel.year;
  yc.method = scheme == BenchmarkScheme::SIC ? ClusterMethod::SIC : ClusterMethod::BISC;
  for (auto& [code, members] : groups) yc.clusters.push_back(std::move(members));
  yc.canonicalize();
  return yc;
}

YearClustering load_external_clustering(const std::filesystem::path& path, int year,
                                        const YearPanel& panel) {
  for (auto& yc : read_clusters(path, ClusterMethod::External)) {
    if (yc.year != year) continue;
    for (const auto& c : yc.clusters) {
      for (const auto& id : c) {
        if (!panel.find(id)) {
          throw InputError(fmt::format("{}: company '{}' not in the {} panel", path.string(), id, year));
        }
      }
    }
    return yc;
  }
  YearClustering empty;
  empty.year = year;
  empty.method = ClusterMethod::External;
  return empty;
}

PriceBook load_prices(const std::filesystem::path& path) {
  csv::Reader r(path, {"company_id", "date", "adj_close"});
  PriceBook book;
  while (r.next()) {
    const auto& id = r.field(0);
    PriceObservation obs;
    try {
      obs.date = parse_date(r.field(1));
    } catch (const InputError& e) {
      throw InputError(r.where(e.what()));
    }
    obs.adj_close = r.as_double(2);
    if (!(obs.adj_close > 0.0) || !std::isfinite(obs.adj_close)) {
      throw InputError(r.where(fmt::format("adj_close {} must be positive", obs.adj_close)));
    }
    auto& series = book[id];
    series.company_id = id;
    series.observations.push_back(obs);
  }
  for (auto& [id, series] : book) {
    auto& obs = series.observations;
    std::stable_sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < obs.size(); ++i) {
      if (obs[i].date == obs[i - 1].date) {
        throw InputError(path.string() + ": duplicate price date " + format_date(obs[i].date) + " for " + id);
      }
    }
  }
  return book;
}

void write_metadata(const std::filesystem::path& path, std::span<const CompanyRecord> records) {
  auto out = csv::open_output(path);
  out << "company_id,ticker,year,sic_code\n";
  for (const auto& r : records) out << r.company_id << ',' << r.ticker << ',' << r.year << ',' << r.sic_code << '\n';
}

void write_returns(const std::filesystem::path& path, std::span<const ReturnSeries> returns) {
  auto out = csv::open_output(path);
  out << "company_id,year,month,log_return\n";
  for (const auto& s : returns) {
    for (std::size_t m = 0; m < 12; ++m) {
      out << s.company_id << ',' << s.year << ',' << m + 1 << ',' << csv::fmt_double(s.values[m]) << '\n';
    }
  }
}

void write_prices(const std::filesystem::path& path, const PriceBook& prices) {
  auto out = csv::open_output(path);
  out << "company_id,date,adj_close\n";
  for (const auto& [id, series] : prices) {
    for (const auto& o : series.observations) {
      out << id << ',' << format_date(o.date) << ',' << csv::fmt_double(o.adj_close) << '\n';
    }
  }
}

}  // namespace saefin
