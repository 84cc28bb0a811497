#include "saefin/clustering.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "saefin/csv.hpp"

namespace saefin {

std::string_view to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::CD: return "CD";
    case ClusterMethod::CDR: return "CDR";
    case ClusterMethod::SIC: return "SIC";
    case ClusterMethod::BISC: return "BISC";
    case ClusterMethod::External: return "external";
  }
  return "?";
}

ClusterMethod parse_cluster_method(std::string_view s) {
  if (s == "CD") return ClusterMethod::CD;
  if (s == "CDR") return ClusterMethod::CDR;
  if (s == "SIC") return ClusterMethod::SIC;
  if (s == "BISC") return ClusterMethod::BISC;
  if (s == "external") return ClusterMethod::External;
  throw InputError("unknown cluster method '" + std::string(s) + "'");
}

void YearClustering::canonicalize() {
  std::set<CompanyId> seen;
  for (auto& c : clusters) {
    if (c.empty()) throw InputError("clustering for year " + std::to_string(year) + " has an empty cluster");
    std::sort(c.begin(), c.end());
    for (const auto& id : c) {
      if (!seen.insert(id).second) {
        throw InputError("company '" + id + "' appears in two clusters in year " + std::to_string(year));
      }
    }
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

std::size_t YearClustering::company_count() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.size();
  return n;
}

std::vector<int> YearClustering::labels_for(std::span<const CompanyId> companies) const {
  std::unordered_map<CompanyId, int> label;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    for (const auto& id : clusters[k]) label.emplace(id, static_cast<int>(k));
  }
  std::vector<int> out;
  out.reserve(companies.size());
  for (const auto& id : companies) {
    auto it = label.find(id);
    out.push_back(it == label.end() ? -1 : it->second);
  }
  return out;
}

bool YearClustering::same_partition(const YearClustering& other) const {
  auto a = *this;
  auto b = other;
  a.canonicalize();
  b.canonicalize();
  return a.clusters == b.clusters;
}

void write_clusters(std::ostream& out, std::span<const YearClustering> clusterings) {
  out << "year,cluster_id,company_id\n";
  for (const auto& yc : clusterings) {
    for (std::size_t k = 0; k < yc.clusters.size(); ++k) {
      for (const auto& id : yc.clusters[k]) out << yc.year << ',' << k << ',' << id << '\n';
    }
  }
}

void write_clusters(const std::filesystem::path& path, std::span<const YearClustering> clusterings) {
  auto out = csv::open_output(path);
  write_clusters(out, clusterings);
}

std::vector<YearClustering> read_clusters(const std::filesystem::path& path, ClusterMethod method) {
  csv::Reader r(path, {"year", "cluster_id", "company_id"});
  std::map<int, std::map<std::string, std::vector<CompanyId>>> by_year;
  std::map<int, std::set<CompanyId>> seen;
  while (r.next()) {
    const int year = static_cast<int>(r.as_int(0));
    const auto& company = r.field(2);
    if (company.empty()) throw InputError(r.where("empty company_id"));
    if (!seen[year].insert(company).second) {
      throw InputError(r.where("company '" + company + "' assigned to more than one cluster"));
    }
    by_year[year][r.field(1)].push_back(company);
  }
  std::vector<YearClustering> out;
  for (auto& [year, clusters] : by_year) {
    YearClustering yc;
    yc.year = year;
    yc.method = method;
    for (auto& [id, members] : clusters) yc.clusters.push_back(std::move(members));
    yc.canonicalize();
    out.push_back(std::move(yc));
  }
  return out;
}

}  // namespace saefin
