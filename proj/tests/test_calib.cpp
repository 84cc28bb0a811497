#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "saefin/calib.hpp"
#include "saefin/pipeline.hpp"
#include "saefin/synth.hpp"

using namespace saefin;

namespace {

struct Fixture {
  SynthUniverse universe;
  std::map<int, YearGraph> graphs;

  explicit Fixture(int years, std::uint64_t seed = 3) {
    SynthConfig cfg;
    cfg.n_companies = 48;
    cfg.n_sectors = 4;
    cfg.years = years;
    cfg.first_year = 2000;
    cfg.feature_dim = 256;
    cfg.signature_size = 8;
    cfg.tokens_per_doc = 32;
    cfg.with_prices = false;
    cfg.seed = seed;
    universe = generate_universe(cfg);
    std::vector<SummedFeatureVector> docs;
    for (const auto& p : universe.panels) {
      for (const auto& [_, v] : p.summed_features) docs.push_back(v);
    }
    const auto fit = fit_pca(docs, 16);
    graphs = build_year_graphs(universe.panels, fit.model);
  }

  ThetaScorer scorer(McMode mode = McMode::PairMean) const {
    std::vector<CalibrationYear> ys;
    for (const auto& p : universe.panels) ys.push_back({p.year, graphs.at(p.year).mst, &p.returns});
    return ThetaScorer(std::move(ys), mode);
  }
};

double direct_score(const ThetaScorer& s, const std::vector<int>& years, double theta) {
  double sum = 0.0;
  for (int y : years) {
    const double v = s.score(y, theta);
    if (std::isinf(v)) return -std::numeric_limits<double>::infinity();
    sum += v;
  }
  return sum / static_cast<double>(years.size());
}

}  // namespace

TEST_CASE("theta grid") {
  const auto v = ThetaGrid{}.values();
  REQUIRE(v.size() == 36);
  CHECK(v.front() == -4.5);
  CHECK(v.back() == -1.0);
  CHECK(v[13] == -3.2);
  CHECK(ThetaGrid{-2.0, -2.0, 0.1}.values() == std::vector<double>{-2.0});
  CHECK_THROWS_AS(ThetaGrid({-1.0, -2.0, 0.1}).validate(), InputError);
  CHECK_THROWS_AS(ThetaGrid({-2.0, -1.0, 0.0}).validate(), InputError);
}

TEST_CASE("extreme thresholds") {
  Fixture f(4);
  const auto s = f.scorer();
  for (const auto& p : f.universe.panels) {
    YearClustering all;
    all.year = p.year;
    all.clusters.push_back(p.company_ids());
    const double single = mean_intra_cluster_correlation(all, p.returns, McMode::PairMean).mc;
    CHECK(s.score(p.year, 1e6) == doctest::Approx(single).epsilon(1e-12));
    CHECK(std::isinf(s.score(p.year, -1e6)));
  }
  const auto years = s.years();
  CHECK(std::isinf(evaluate_theta(-1e6, years, s)));
  CHECK_THROWS_AS(evaluate_theta(0.0, {}, s), InputError);
}

TEST_CASE("one-value grid returns that value") {
  Fixture f(4);
  const auto r = calibrate_fixed(ThetaGrid{0.5, 0.5, 0.1}, f.scorer());
  REQUIRE(r.theta_star.has_value());
  CHECK(*r.theta_star == 0.5);
}

TEST_CASE("fixed calibration matches an exhaustive oracle") {
  for (int years : {4, 5, 7, 8}) {
    Fixture f(years, 10 + static_cast<std::uint64_t>(years));
    const auto s = f.scorer();
    const ThetaGrid grid;
    const auto r = calibrate_fixed(grid, s);
    const auto ys = s.years();
    const auto na = static_cast<std::size_t>(std::ceil(0.25 * years));
    const auto nb = static_cast<std::size_t>(std::ceil(0.50 * years));
    const std::vector<int> fa(ys.begin(), ys.begin() + static_cast<long>(na));
    const std::vector<int> fb(ys.begin(), ys.begin() + static_cast<long>(nb));
    CHECK(r.fold_a == fa);
    CHECK(r.fold_b == fb);
    double best = -std::numeric_limits<double>::infinity(), arg = 0.0;
    for (double t : grid.values()) {
      const double a = direct_score(s, fa, t), b = direct_score(s, fb, t);
      const double v = (std::isinf(a) || std::isinf(b)) ? -std::numeric_limits<double>::infinity() : 0.5 * (a + b);
      if (v > best) best = v, arg = t;
    }
    REQUIRE(r.theta_star.has_value());
    CHECK(*r.theta_star == arg);
    const auto vals = grid.values();
    CHECK(std::find(vals.begin(), vals.end(), *r.theta_star) != vals.end());
  }
}

TEST_CASE("fixed calibration needs four years") {
  Fixture f(3);
  CHECK_THROWS_AS(calibrate_fixed(ThetaGrid{}, f.scorer()), InputError);
}

TEST_CASE("rolling calibration is causal and matches a per-year oracle") {
  Fixture f(9, 21);
  const auto s = f.scorer();
  const ThetaGrid grid;
  const int lookback = 3;
  const auto r = calibrate_rolling(grid, s, lookback);
  CHECK(r.lookahead_violations == 0);
  const auto ys = s.years();
  CHECK(r.skipped_years == std::vector<int>(ys.begin(), ys.begin() + lookback));
  REQUIRE(r.theta_by_year.size() == ys.size() - lookback);
  CHECK(r.theta_by_year.begin()->first == ys[lookback]);
  for (const auto& [y, theta] : r.theta_by_year) {
    std::vector<int> window;
    for (int k = y - lookback; k < y; ++k) window.push_back(k);
    double best = -std::numeric_limits<double>::infinity(), arg = 0.0;
    for (double t : grid.values()) {
      const double v = direct_score(s, window, t);
      if (v > best) best = v, arg = t;
    }
    CHECK(theta == arg);
    CHECK(r.out_of_sample_mc.at(y) == doctest::Approx(s.score(y, theta)));
  }
}

TEST_CASE("rolling selection never reads the evaluated year") {
  Fixture f(6, 4);
  const auto s = f.scorer();
  // instrument: after each selection the log must hold only lookback years
  const auto r = calibrate_rolling(ThetaGrid{-3.0, -1.0, 0.5}, s, 2);
  CHECK(r.lookahead_violations == 0);
  s.clear_access_log();
  s.score(2003, -2.0);
  CHECK(s.access_log() == std::vector<int>{2003});
}

TEST_CASE("identical years give a constant rolling theta") {
  Fixture f(1, 5);
  const auto& p = f.universe.panels.front();
  std::vector<CalibrationYear> ys;
  for (int y = 0; y < 7; ++y) {
    auto mst = f.graphs.at(p.year).mst;
    mst.year = 2000 + y;
    ys.push_back({2000 + y, mst, &p.returns});
  }
  const ThetaScorer s(std::move(ys), McMode::PairMean);
  const auto r = calibrate_rolling(ThetaGrid{}, s, 3);
  REQUIRE(r.theta_by_year.size() == 4);
  for (const auto& [_, t] : r.theta_by_year) CHECK(t == r.theta_by_year.begin()->second);
}

TEST_CASE("calibration is deterministic and serializes") {
  Fixture f(6, 8);
  const auto a = calibrate_fixed(ThetaGrid{}, f.scorer());
  const auto b = calibrate_fixed(ThetaGrid{}, f.scorer());
  CHECK(a.theta_star == b.theta_star);
  std::ostringstream oa, ob;
  write_calibration(oa, std::vector<CalibrationResult>{a});
  write_calibration(ob, std::vector<CalibrationResult>{b});
  CHECK(oa.str() == ob.str());
  CHECK(oa.str().rfind("variant,year,theta,score\n", 0) == 0);

  const auto roll = calibrate_rolling(ThetaGrid{}, f.scorer(), 2);
  std::ostringstream rs;
  write_rolling_series(rs, roll);
  CHECK(rs.str().rfind("year,theta_star,mc_oos\n", 0) == 0);
  const auto text = rs.str();
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == roll.theta_by_year.size() + 1);
}
