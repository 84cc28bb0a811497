#include "saefin/calib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "saefin/csv.hpp"
#include "saefin/parallel.hpp"

namespace saefin {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

long long theta_key(double theta) { return std::llround(theta * 1e9); }

/// Index of the best score; strict improvement only, so the earliest (smallest)
/// theta wins ties. Returns npos when every score is -inf.
std::size_t argmax_smallest(std::span<const double> scores) {
  std::size_t best = static_cast<std::size_t>(-1);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == kNegInf || std::isnan(scores[i])) continue;
    if (best == static_cast<std::size_t>(-1) || scores[i] > scores[best]) best = i;
  }
  return best;
}

}  // namespace

void ThetaGrid::validate() const {
  if (!(start <= stop)) throw InputError("theta grid needs start <= stop");
  if (!(step > 0.0)) throw InputError("theta grid needs step > 0");
}

std::vector<double> ThetaGrid::values() const {
  validate();
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9);
  }
  return out;
}

ThetaScorer::ThetaScorer(std::vector<CalibrationYear> years, McMode mode) : years_(std::move(years)), mode_(mode) {
  std::sort(years_.begin(), years_.end(), [](const auto& a, const auto& b) { return a.year < b.year; });
  for (std::size_t i = 0; i < years_.size(); ++i) {
    if (!years_[i].returns) throw InputError(fmt::format("year {} has no returns attached", years_[i].year));
    if (i > 0 && years_[i].year == years_[i - 1].year) {
      throw InputError(fmt::format("year {} supplied twice to calibration", years_[i].year));
    }
  }
}

std::vector<int> ThetaScorer::years() const {
  std::vector<int> out;
  out.reserve(years_.size());
  for (const auto& y : years_) out.push_back(y.year);
  return out;
}

const CalibrationYear& ThetaScorer::find(int year) const {
  auto it = std::lower_bound(years_.begin(), years_.end(), year,
                             [](const CalibrationYear& c, int y) { return c.year < y; });
  if (it == years_.end() || it->year != year) throw InputError(fmt::format("no calibration data for year {}", year));
  return *it;
}

const MstForest& ThetaScorer::mst(int year) const { return find(year).mst; }

double ThetaScorer::score(int year, double theta) const {
  const auto& cy = find(year);
  const auto key = std::make_pair(year, theta_key(theta));
  {
    std::lock_guard lock(mutex_);
    access_log_.push_back(year);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  double value = kNegInf;
  try {
    value = mean_intra_cluster_correlation(cut_mst(cy.mst, theta), *cy.returns, mode_).mc;
  } catch (const UndefinedError&) {
  }
  std::lock_guard lock(mutex_);
  cache_.emplace(key, value);
  return value;
}

std::vector<int> ThetaScorer::access_log() const {
  std::lock_guard lock(mutex_);
  return access_log_;
}

void ThetaScorer::clear_access_log() const {
  std::lock_guard lock(mutex_);
  access_log_.clear();
}

double evaluate_theta(double theta, std::span<const int> years, const ThetaScorer& scorer) {
  if (years.empty()) throw InputError("evaluate_theta: empty year set");
  double sum = 0.0;
  for (int y : years) {
    const double s = scorer.score(y, theta);
    if (s == kNegInf) return kNegInf;
    sum += s;
  }
  return sum / static_cast<double>(years.size());
}

CalibrationResult calibrate_fixed(const ThetaGrid& grid, const ThetaScorer& scorer) {
  const auto years = scorer.years();
  if (years.size() < 4) {
    throw InputError(fmt::format("fixed calibration needs at least 4 years, got {}", years.size()));
  }
  const auto n = years.size();
  const auto size_a = static_cast<std::size_t>(std::ceil(0.25 * static_cast<double>(n)));
  const auto size_b = static_cast<std::size_t>(std::ceil(0.50 * static_cast<double>(n)));
  CalibrationResult result;
  result.variant = CalibrationVariant::Fixed;
  result.fold_a.assign(years.begin(), years.begin() + static_cast<std::ptrdiff_t>(size_a));
  result.fold_b.assign(years.begin(), years.begin() + static_cast<std::ptrdiff_t>(size_b));

  const auto thetas = grid.values();
  std::vector<double> scores(thetas.size(), kNegInf);
  parallel_for(thetas.size(), [&](std::size_t i) {
    const double a = evaluate_theta(thetas[i], result.fold_a, scorer);
    const double b = evaluate_theta(thetas[i], result.fold_b, scorer);
    scores[i] = (a == kNegInf || b == kNegInf) ? kNegInf : 0.5 * (a + b);
  });
  for (std::size_t i = 0; i < thetas.size(); ++i) result.table.push_back({std::nullopt, thetas[i], scores[i]});
  const auto best = argmax_smallest(scores);
  if (best == static_cast<std::size_t>(-1)) {
    throw UndefinedError("fixed calibration: no grid value yields a scorable clustering in both folds");
  }
  result.theta_star = thetas[best];
  return result;
}

CalibrationResult calibrate_rolling(const ThetaGrid& grid, const ThetaScorer& scorer, int lookback) {
  if (lookback < 1) throw InputError("rolling lookback must be >= 1");
  const auto years = scorer.years();
  const std::set<int> available(years.begin(), years.end());
  const auto thetas = grid.values();
  CalibrationResult result;
  result.variant = CalibrationVariant::Rolling;

  for (int y : years) {
    std::vector<int> window;
    for (int s = y - lookback; s < y; ++s) {
      if (available.contains(s)) window.push_back(s);
    }
    if (static_cast<int>(window.size()) < lookback) {
      result.skipped_years.push_back(y);
      if (y >= years.front() + lookback) {
        result.warnings.push_back(fmt::format("year {}: lookback window incomplete, year skipped", y));
      }
      continue;
    }
    scorer.clear_access_log();
    std::vector<double> scores(thetas.size(), kNegInf);
    parallel_for(thetas.size(), [&](std::size_t i) { scores[i] = evaluate_theta(thetas[i], window, scorer); });
    const auto log = scorer.access_log();
    if (std::find(log.begin(), log.end(), y) != log.end()) ++result.lookahead_violations;
    for (std::size_t i = 0; i < thetas.size(); ++i) result.table.push_back({y, thetas[i], scores[i]});
    const auto best = argmax_smallest(scores);
    if (best == static_cast<std::size_t>(-1)) {
      result.skipped_years.push_back(y);
      result.warnings.push_back(fmt::format("year {}: no scorable theta in lookback window, year skipped", y));
      continue;
    }
    result.theta_by_year[y] = thetas[best];
    result.out_of_sample_mc[y] = scorer.score(y, thetas[best]);
  }
  return result;
}

void write_calibration(std::ostream& out, std::span<const CalibrationResult> results) {
  out << "variant,year,theta,score\n";
  for (const auto& r : results) {
    const char* variant = r.variant == CalibrationVariant::Fixed ? "fixed" : "rolling";
    for (const auto& c : r.table) {
      out << variant << ',' << (c.year ? std::to_string(*c.year) : std::string("fixed")) << ','
          << csv::fmt_double(c.theta) << ',' << csv::fmt_double(c.score) << '\n';
    }
  }
}

void write_rolling_series(std::ostream& out, const CalibrationResult& rolling) {
  out << "year,theta_star,mc_oos\n";
  for (const auto& [year, theta] : rolling.theta_by_year) {
    out << year << ',' << csv::fmt_double(theta) << ',' << csv::fmt_double(rolling.out_of_sample_mc.at(year)) << '\n';
  }
}

}  // namespace saefin
