#include "saefin/interp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "saefin/csv.hpp"
#include "saefin/parallel.hpp"

namespace saefin {

double ImportanceReport::impact(FeatureId f) const {
  auto it = std::lower_bound(impacts.begin(), impacts.end(), f,
                             [](const FeatureImpact& fi, FeatureId id) { return fi.feature < id; });
  return it != impacts.end() && it->feature == f ? it->impact : 0.0;
}

namespace {

struct Projected {
  std::vector<Eigen::VectorXd> g;
  std::vector<const SummedFeatureVector*> raw;
};

Projected project(std::span<const SummedFeatureVector* const> members, const PcaModel& model) {
  Projected p;
  for (const auto* m : members) {
    p.g.push_back(model.transform(*m).values);
    p.raw.push_back(m);
  }
  return p;
}

double pair_impact(const Projected& p, const PcaModel& model, double stddev, FeatureId z, std::size_t& skipped) {
  const std::size_t n = p.g.size();
  std::vector<Eigen::VectorXd> patched(n);
  std::vector<bool> changed(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = p.raw[i]->value(z);
    if (x != 0.0) {
      patched[i] = p.g[i] - x * model.components().col(static_cast<Eigen::Index>(z));
      changed[i] = true;
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!changed[i] && !changed[j]) continue;
      try {
        const double before = cosine_distance(p.g[i], p.g[j]);
        const double after = cosine_distance(changed[i] ? patched[i] : p.g[i], changed[j] ? patched[j] : p.g[j]);
        total += std::abs(before - after) / stddev;
      } catch (const UndefinedError&) {
        ++skipped;
      }
    }
  }
  return total;
}

void check_inputs(std::span<const SummedFeatureVector* const> members, const PcaModel& model, double stddev) {
  if (members.size() < 2) throw InputError("feature impact needs a cluster of at least 2 companies");
  if (!(stddev > 0.0)) throw InputError("feature impact needs a positive distance stddev");
  for (const auto* m : members) {
    if (m->dim() != model.dim()) throw InputError(fmt::format("{}: dim does not match the PCA model", m->doc_id()));
  }
}

}  // namespace

double feature_impact(std::span<const SummedFeatureVector* const> members, const PcaModel& model, double stddev,
                      FeatureId z, std::size_t* skipped) {
  check_inputs(members, model, stddev);
  if (z >= model.dim()) throw InputError(fmt::format("feature {} outside [0, {})", z, model.dim()));
  std::size_t local = 0;
  const double v = pair_impact(project(members, model), model, stddev, z, local);
  if (skipped) *skipped += local;
  return v;
}

std::vector<FeatureId> important_set(std::span<const FeatureImpact> impacts) {
  std::vector<FeatureImpact> sorted;
  double total = 0.0;
  for (const auto& fi : impacts) {
    if (fi.impact < 0.0 || !std::isfinite(fi.impact)) throw InputError("impacts must be finite and non-negative");
    if (fi.impact > 0.0) {
      sorted.push_back(fi);
      total += fi.impact;
    }
  }
  if (sorted.empty()) throw InputError("important_set: every impact is zero");
  std::sort(sorted.begin(), sorted.end(), [](const FeatureImpact& a, const FeatureImpact& b) {
    return a.impact != b.impact ? a.impact > b.impact : a.feature < b.feature;
  });
  std::vector<FeatureId> s;
  double cum = 0.0;
  for (const auto& fi : sorted) {
    s.push_back(fi.feature);
    cum += fi.impact;
    if (cum >= total - cum) break;
  }
  return s;
}

ImportanceReport interpret_cluster(int year, int cluster_id, std::span<const SummedFeatureVector* const> members,
                                   const PcaModel& model, double stddev) {
  check_inputs(members, model, stddev);
  ImportanceReport report;
  report.year = year;
  report.cluster_id = cluster_id;

  std::set<FeatureId> active;
  for (const auto* m : members) {
    for (const auto& e : m->entries()) active.insert(e.feature);
  }
  const std::vector<FeatureId> features(active.begin(), active.end());
  const auto projected = project(members, model);

  std::vector<double> impact(features.size());
  std::vector<std::size_t> skipped(features.size(), 0);
  parallel_for(features.size(), [&](std::size_t k) {
    impact[k] = pair_impact(projected, model, stddev, features[k], skipped[k]);
  });

  report.impacts.reserve(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    report.impacts.push_back({features[k], impact[k]});
    report.skipped_pairs += skipped[k];
  }
  report.n_active = features.size();
  report.s_star = important_set(report.impacts);
  report.sparsity_ratio = static_cast<double>(report.s_star.size()) / static_cast<double>(report.n_active);
  return report;
}

std::vector<ImportanceReport> interpret_clustering(const YearClustering& clustering, const YearPanel& panel,
                                                   const PcaModel& model, const DistanceGraph& graph) {
  if (!graph.normalized) throw InputError("interpretation needs a normalized distance graph");
  if (graph.year != clustering.year || panel.year != clustering.year) {
    throw InputError("clustering, panel and graph years differ");
  }
  std::vector<ImportanceReport> reports;
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    const auto& cluster = clustering.clusters[c];
    if (cluster.size() < 2) continue;
    std::vector<const SummedFeatureVector*> members;
    for (const auto& id : cluster) {
      auto it = panel.summed_features.find(id);
      if (it == panel.summed_features.end()) throw InputError(fmt::format("{}: no features in {}", id, panel.year));
      members.push_back(&it->second);
    }
    try {
      reports.push_back(interpret_cluster(clustering.year, static_cast<int>(c), members, model, graph.stddev));
    } catch (const InputError&) {
      // every impact zero: nothing to explain
    }
  }
  return reports;
}

SparsitySummary sparsity_distribution(std::span<const ImportanceReport> reports) {
  if (reports.empty()) throw InputError("sparsity_distribution needs at least one report");
  SparsitySummary s;
  constexpr int kBins = 20;
  for (int i = 0; i < kBins; ++i) s.bins.push_back({i / 20.0, (i + 1) / 20.0, 0});
  std::vector<double> ratios;
  for (const auto& r : reports) {
    ratios.push_back(r.sparsity_ratio);
    const int bin = std::min(kBins - 1, static_cast<int>(std::floor(r.sparsity_ratio * kBins)));
    ++s.bins[static_cast<std::size_t>(std::max(bin, 0))].count;
  }
  std::sort(ratios.begin(), ratios.end());
  const std::size_t n = ratios.size();
  s.median = n % 2 == 1 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  return s;
}

std::map<FeatureId, std::size_t> feature_cluster_frequency(std::span<const ImportanceReport> reports) {
  std::map<FeatureId, std::size_t> freq;
  for (const auto& r : reports) {
    for (const auto& fi : r.impacts) freq.try_emplace(fi.feature, 0);
    for (FeatureId f : r.s_star) ++freq[f];
  }
  return freq;
}

std::vector<FeatureId> top_percentile(const std::map<FeatureId, std::size_t>& frequency, double percent) {
  if (!(percent > 0.0 && percent <= 100.0)) throw InputError("percent must lie in (0, 100]");
  std::vector<std::pair<FeatureId, std::size_t>> rows(frequency.begin(), frequency.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(percent / 100.0 * static_cast<double>(rows.size()))));
  std::vector<FeatureId> out;
  for (std::size_t i = 0; i < rows.size() && i < take; ++i) {
    if (rows[i].second > 0) out.push_back(rows[i].first);
  }
  return out;
}

void write_importance(std::ostream& out, std::span<const ImportanceReport> reports) {
  out << "year,cluster_id,feature_id,impact,in_s_star\n";
  for (const auto& r : reports) {
    const std::set<FeatureId> s(r.s_star.begin(), r.s_star.end());
    for (const auto& fi : r.impacts) {
      out << r.year << ',' << r.cluster_id << ',' << fi.feature << ',' << csv::fmt_double(fi.impact) << ','
          << (s.contains(fi.feature) ? 1 : 0) << '\n';
    }
  }
}

void write_sparsity(std::ostream& out, std::span<const ImportanceReport> reports) {
  out << "year,cluster_id,n_active,s_star_size,sparsity_ratio\n";
  for (const auto& r : reports) {
    out << r.year << ',' << r.cluster_id << ',' << r.n_active << ',' << r.s_star.size() << ','
        << csv::fmt_double(r.sparsity_ratio) << '\n';
  }
}

void write_feature_frequency(std::ostream& out, const std::map<FeatureId, std::size_t>& frequency) {
  out << "feature_id,clusters_important_count\n";
  for (const auto& [f, n] : frequency) out << f << ',' << n << '\n';
}

}  // namespace saefin
