#pragma once

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saefin/clustering.hpp"
#include "saefin/corpus.hpp"

namespace saefin {

/// Pearson correlation. Throws UndefinedError when either input is constant.
double pearson(std::span<const double> a, std::span<const double> b);

/// How within-cluster correlation sums are normalized.
///   PairMean:     mean of rho over the cluster's unordered pairs.
///   PaperLiteral: sum of rho over unordered pairs divided by cluster size.
/// In both modes clusters with fewer than two companies are left out and the
/// year's value is the mean over the remaining clusters.
enum class McMode { PairMean, PaperLiteral };

std::string_view to_string(McMode mode);
McMode parse_mc_mode(std::string_view s);

struct ClusterScore {
  double mc = 0.0;
  std::size_t scored_clusters = 0;
  std::size_t skipped_pairs = 0;  // undefined rho or missing returns
};

using ReturnMap = std::map<CompanyId, ReturnSeries>;

/// Mean intra-cluster correlation of one year's clustering. Throws
/// UndefinedError when no cluster has two companies with a defined rho.
ClusterScore mean_intra_cluster_correlation(const YearClustering& clustering, const ReturnMap& returns,
                                            McMode mode);

/// Arithmetic mean over years.
double overall_mc(const std::map<int, double>& per_year);

/// Per-year mean pairwise rho over all companies, averaged over years.
double population_baseline(std::span<const YearPanel> panels);

struct YearEvaluation {
  int year = 0;
  double mc = 0.0;
  std::size_t clusters = 0;
  double mean_cluster_size = 0.0;
  std::size_t skipped_pairs = 0;
};

struct EvaluationReport {
  std::string method;
  McMode mode = McMode::PairMean;
  std::vector<YearEvaluation> years;
  double overall = 0.0;
};

/// Scores each clustering against the panel of its year. Years whose
/// clustering has no scorable cluster are left out of the report.
EvaluationReport evaluate_clusterings(std::string method, std::span<const YearClustering> clusterings,
                                      std::span<const YearPanel> panels, McMode mode);

/// method,year,mc,clusters,mean_cluster_size,skipped_pairs; each report ends
/// with a summary row whose year field is "overall:<mode>".
void write_evaluation(std::ostream& out, std::span<const EvaluationReport> reports);

}  // namespace saefin
