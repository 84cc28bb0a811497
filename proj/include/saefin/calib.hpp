#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "saefin/graphcluster.hpp"
#include "saefin/metrics.hpp"

namespace saefin {

/// Inclusive grid of cut-off candidates in standardized distance units.
struct ThetaGrid {
  double start = -4.5;
  double stop = -1.0;
  double step = 0.1;

  void validate() const;
  /// start + i*step rounded to 1e-9, for i = 0.. up to stop (inclusive).
  std::vector<double> values() const;
};

/// One year's tree plus the returns used to score it.
struct CalibrationYear {
  int year = 0;
  MstForest mst;
  const ReturnMap* returns = nullptr;
};

/// Scores (year, theta) pairs and logs every year whose returns were read, so
/// callers can prove which data fed a selection. Thread-safe.
class ThetaScorer {
 public:
  ThetaScorer(std::vector<CalibrationYear> years, McMode mode);

  std::vector<int> years() const;
  McMode mode() const { return mode_; }
  const MstForest& mst(int year) const;

  /// MC of the year's tree cut at theta, or -inf when no cluster is scorable.
  double score(int year, double theta) const;

  std::vector<int> access_log() const;
  void clear_access_log() const;

 private:
  const CalibrationYear& find(int year) const;

  std::vector<CalibrationYear> years_;
  McMode mode_;
  mutable std::mutex mutex_;
  mutable std::vector<int> access_log_;
  mutable std::map<std::pair<int, long long>, double> cache_;
};

/// Mean of score(year, theta) over the given years; -inf if any year is unscorable.
double evaluate_theta(double theta, std::span<const int> years, const ThetaScorer& scorer);

struct CandidateScore {
  std::optional<int> year;  // empty for the fixed variant
  double theta = 0.0;
  double score = 0.0;
};

enum class CalibrationVariant { Fixed, Rolling };

struct CalibrationResult {
  CalibrationVariant variant = CalibrationVariant::Fixed;
  std::optional<double> theta_star;             // fixed
  std::map<int, double> theta_by_year;          // rolling
  std::map<int, double> out_of_sample_mc;       // rolling, MC of y at theta_y*
  std::vector<CandidateScore> table;
  std::vector<int> fold_a;                      // fixed
  std::vector<int> fold_b;
  std::vector<int> skipped_years;               // rolling, insufficient lookback
  std::size_t lookahead_violations = 0;         // rolling, from the access log
  std::vector<std::string> warnings;
};

/// Two overlapping chronological folds: the first ceil(25%) and first ceil(50%)
/// of the sorted years. theta* maximizes the mean of the two fold scores; ties
/// go to the smaller theta.
CalibrationResult calibrate_fixed(const ThetaGrid& grid, const ThetaScorer& scorer);

/// For each year with `lookback` consecutive preceding years, picks theta_y*
/// from those years only, then scores year y at theta_y*.
CalibrationResult calibrate_rolling(const ThetaGrid& grid, const ThetaScorer& scorer, int lookback = 5);

/// variant,year,theta,score
void write_calibration(std::ostream& out, std::span<const CalibrationResult> results);

/// year,theta_star,mc_oos
void write_rolling_series(std::ostream& out, const CalibrationResult& rolling);

}  // namespace saefin
