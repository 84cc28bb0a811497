#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "saefin/corpus.hpp"
#include "saefin/graphcluster.hpp"
#include "saefin/pca.hpp"
#include "saefin/sparsefeat.hpp"

namespace saefin {

struct FeatureImpact {
  FeatureId feature = 0;
  double impact = 0.0;
};

struct ImportanceReport {
  int year = 0;
  int cluster_id = 0;
  std::vector<FeatureImpact> impacts;  // features active in the cluster, by id
  std::vector<FeatureId> s_star;       // in selection order
  std::size_t n_active = 0;
  double sparsity_ratio = 0.0;  // |S*| / n_active
  std::size_t skipped_pairs = 0;

  double impact(FeatureId f) const;  // 0 for inactive features
};

/// Sum over unordered member pairs of |CD(g_i, g_j) - CD(g_i^z, g_j^z)| with
/// the year's stddev held fixed. Pairs with a zero-norm patched vector are
/// skipped and counted in `skipped`.
double feature_impact(std::span<const SummedFeatureVector* const> members, const PcaModel& model, double stddev,
                      FeatureId z, std::size_t* skipped = nullptr);

/// Impact-sorted prefix (ties by ascending id) whose cumulative impact first
/// reaches half the total. Throws InputError if no impact is positive.
std::vector<FeatureId> important_set(std::span<const FeatureImpact> impacts);

/// Scans every feature active in some member, then selects S*.
ImportanceReport interpret_cluster(int year, int cluster_id, std::span<const SummedFeatureVector* const> members,
                                   const PcaModel& model, double stddev);

/// Reports for every cluster with at least 2 members and a positive impact,
/// in cluster order. `graph` supplies the year's normalization.
std::vector<ImportanceReport> interpret_clustering(const YearClustering& clustering, const YearPanel& panel,
                                                   const PcaModel& model, const DistanceGraph& graph);

struct SparsitySummary {
  std::vector<HistogramBin> bins;  // width 0.05 over [0, 1]
  double median = 0.0;
};

SparsitySummary sparsity_distribution(std::span<const ImportanceReport> reports);

/// Clusters whose S* contains each feature; features active in some report
/// but never selected map to 0.
std::map<FeatureId, std::size_t> feature_cluster_frequency(std::span<const ImportanceReport> reports);

/// Features in the top `percent` of a frequency table (at least one), most
/// frequent first; only features with a positive count qualify.
std::vector<FeatureId> top_percentile(const std::map<FeatureId, std::size_t>& frequency, double percent);

/// year,cluster_id,feature_id,impact,in_s_star
void write_importance(std::ostream& out, std::span<const ImportanceReport> reports);
/// year,cluster_id,n_active,s_star_size,sparsity_ratio
void write_sparsity(std::ostream& out, std::span<const ImportanceReport> reports);
/// feature_id,clusters_important_count
void write_feature_frequency(std::ostream& out, const std::map<FeatureId, std::size_t>& frequency);

}  // namespace saefin
