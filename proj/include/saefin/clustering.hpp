#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saefin/common.hpp"

namespace saefin {

enum class ClusterMethod { CD, CDR, SIC, BISC, External };

std::string_view to_string(ClusterMethod m);
ClusterMethod parse_cluster_method(std::string_view s);

/// Partition of one year's companies. Kept in canonical form: members of each
/// cluster sorted, clusters ordered by their smallest member. A cluster's id is
/// its position.
struct YearClustering {
  int year = 0;
  std::optional<double> theta;  // empty for code-based or external partitions
  ClusterMethod method = ClusterMethod::CD;
  std::vector<std::vector<CompanyId>> clusters;

  /// Sorts into canonical form; throws InputError on empty clusters or a
  /// company listed twice.
  void canonicalize();

  std::size_t company_count() const;

  /// Cluster id per company, in the order of `companies`; -1 if unclustered.
  std::vector<int> labels_for(std::span<const CompanyId> companies) const;

  /// Same partition regardless of theta/method.
  bool same_partition(const YearClustering& other) const;
};

/// clusters CSV: year,cluster_id,company_id
void write_clusters(std::ostream& out, std::span<const YearClustering> clusterings);
void write_clusters(const std::filesystem::path& path, std::span<const YearClustering> clusterings);

/// Reads every year in a clusters CSV (method tagged External unless given).
std::vector<YearClustering> read_clusters(const std::filesystem::path& path,
                                          ClusterMethod method = ClusterMethod::External);

}  // namespace saefin
