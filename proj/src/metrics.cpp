#include "saefin/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "saefin/csv.hpp"

namespace saefin {

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("pearson: length mismatch");
  if (a.size() < 2) throw InputError("pearson: need at least 2 observations");
  const auto constant = [](std::span<const double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo == *hi;
  };
  if (constant(a) || constant(b)) throw UndefinedError("pearson: zero variance");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw UndefinedError("pearson: zero variance");
  const double r = sab / std::sqrt(saa * sbb);
  if (!std::isfinite(r)) throw UndefinedError("pearson: non-finite correlation");
  return std::clamp(r, -1.0, 1.0);
}

std::string_view to_string(McMode mode) { return mode == McMode::PairMean ? "pair_mean" : "paper_literal"; }

McMode parse_mc_mode(std::string_view s) {
  if (s == "pair_mean") return McMode::PairMean;
  if (s == "paper_literal") return McMode::PaperLiteral;
  throw InputError("unknown MC mode '" + std::string(s) + "' (expected pair_mean or paper_literal)");
}

ClusterScore mean_intra_cluster_correlation(const YearClustering& clustering, const ReturnMap& returns,
                                            McMode mode) {
  ClusterScore score;
  double total = 0.0;
  for (const auto& cluster : clustering.clusters) {
    if (cluster.size() < 2) continue;
    std::vector<const ReturnSeries*> series;
    series.reserve(cluster.size());
    for (const auto& id : cluster) {
      auto it = returns.find(id);
      series.push_back(it == returns.end() ? nullptr : &it->second);
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      for (std::size_t j = i + 1; j < series.size(); ++j) {
        if (!series[i] || !series[j]) {
          ++score.skipped_pairs;
          continue;
        }
        try {
          sum += pearson(series[i]->values, series[j]->values);
          ++pairs;
        } catch (const UndefinedError&) {
          ++score.skipped_pairs;
        }
      }
    }
    if (pairs == 0) continue;
    total += mode == McMode::PairMean ? sum / static_cast<double>(pairs) : sum / static_cast<double>(cluster.size());
    ++score.scored_clusters;
  }
  if (score.scored_clusters == 0) {
    throw UndefinedError(fmt::format("year {}: no cluster with a scorable pair", clustering.year));
  }
  score.mc = total / static_cast<double>(score.scored_clusters);
  return score;
}

double overall_mc(const std::map<int, double>& per_year) {
  if (per_year.empty()) throw InputError("overall_mc: empty year set");
  double sum = 0.0;
  for (const auto& [_, v] : per_year) sum += v;
  return sum / static_cast<double>(per_year.size());
}

double population_baseline(std::span<const YearPanel> panels) {
  std::map<int, double> per_year;
  for (const auto& panel : panels) {
    YearClustering all;
    all.year = panel.year;
    all.clusters.push_back(panel.company_ids());
    if (all.clusters.front().size() < 2) continue;
    try {
      per_year[panel.year] = mean_intra_cluster_correlation(all, panel.returns, McMode::PairMean).mc;
    } catch (const UndefinedError&) {
    }
  }
  return overall_mc(per_year);
}

EvaluationReport evaluate_clusterings(std::string method, std::span<const YearClustering> clusterings,
                                      std::span<const YearPanel> panels, McMode mode) {
  EvaluationReport report;
  report.method = std::move(method);
  report.mode = mode;
  std::map<int, const YearPanel*> by_year;
  for (const auto& p : panels) by_year[p.year] = &p;
  std::map<int, double> per_year;
  for (const auto& yc : clusterings) {
    auto it = by_year.find(yc.year);
    if (it == by_year.end()) continue;
    ClusterScore score;
    try {
      score = mean_intra_cluster_correlation(yc, it->second->returns, mode);
    } catch (const UndefinedError&) {
      continue;
    }
    YearEvaluation ev;
    ev.year = yc.year;
    ev.mc = score.mc;
    ev.clusters = yc.clusters.size();
    ev.mean_cluster_size =
        yc.clusters.empty() ? 0.0 : static_cast<double>(yc.company_count()) / static_cast<double>(yc.clusters.size());
    ev.skipped_pairs = score.skipped_pairs;
    report.years.push_back(ev);
    per_year[yc.year] = score.mc;
  }
  report.overall = per_year.empty() ? std::nan("") : overall_mc(per_year);
  return report;
}

void write_evaluation(std::ostream& out, std::span<const EvaluationReport> reports) {
  out << "method,year,mc,clusters,mean_cluster_size,skipped_pairs\n";
  for (const auto& r : reports) {
    std::size_t clusters = 0, skipped = 0;
    double size_sum = 0.0;
    for (const auto& y : r.years) {
      out << r.method << ',' << y.year << ',' << csv::fmt_double(y.mc) << ',' << y.clusters << ','
          << csv::fmt_double(y.mean_cluster_size) << ',' << y.skipped_pairs << '\n';
      clusters += y.clusters;
      skipped += y.skipped_pairs;
      size_sum += y.mean_cluster_size;
    }
    const double mean_size = r.years.empty() ? std::nan("") : size_sum / static_cast<double>(r.years.size());
    out << r.method << ",overall:" << to_string(r.mode) << ',' << csv::fmt_double(r.overall) << ',' << clusters << ','
        << csv::fmt_double(mean_size) << ',' << skipped << '\n';
  }
}

}  // namespace saefin
