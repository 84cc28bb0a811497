#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "saefin/metrics.hpp"

using namespace saefin;

namespace {

ReturnSeries series(const CompanyId& id, int year, const Eigen::VectorXd& v) {
  ReturnSeries r{id, year, {}};
  for (int m = 0; m < 12; ++m) r.values[static_cast<std::size_t>(m)] = v[m];
  return r;
}

// Centred, mutually orthogonal unit 12-vectors.
std::vector<Eigen::VectorXd> orthogonal_centred(int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(12, k + 1);
  m.col(0).setOnes();
  for (int j = 1; j <= k; ++j) {
    for (int i = 0; i < 12; ++i) m(i, j) = n01(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(12, k + 1);
  std::vector<Eigen::VectorXd> out;
  for (int j = 1; j <= k; ++j) out.push_back(q.col(j));
  return out;
}

// Four companies whose six pairwise correlations are all exactly 0.5.
ReturnMap divergence_fixture(int year = 2000) {
  const auto basis = orthogonal_centred(5, 17);
  ReturnMap out;
  for (int i = 0; i < 4; ++i) {
    const CompanyId id(1, static_cast<char>('a' + i));
    out[id] = series(id, year, basis[0] + basis[static_cast<std::size_t>(i + 1)]);
  }
  return out;
}

YearClustering clustering(int year, std::vector<std::vector<CompanyId>> clusters) {
  YearClustering c;
  c.year = year;
  c.clusters = std::move(clusters);
  c.canonicalize();
  return c;
}

YearPanel panel_from(int year, const ReturnMap& returns) {
  YearPanel p;
  p.year = year;
  for (const auto& [id, r] : returns) {
    p.records.push_back({id, id, year, 1000, 0});
    p.returns[id] = r;
    p.summed_features.emplace(id, SummedFeatureVector(make_doc_id(id, year), 4, {{0, 1.0}}));
  }
  return p;
}

}  // namespace

TEST_CASE("pearson hand values") {
  const std::vector<double> a{1, 2, 3};
  CHECK(pearson(a, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson(a, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(pearson(a, std::vector<double>{1, 3, 2}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(pearson(a, std::vector<double>{5, 5, 5}), UndefinedError);
  CHECK_THROWS(pearson(a, std::vector<double>{1, 2}));
}

TEST_CASE("pearson is affine invariant") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(12), b(12), a2(12), b2(12);
    for (int i = 0; i < 12; ++i) {
      a[i] = n01(rng);
      b[i] = n01(rng);
      a2[i] = 3.0 * a[i] - 7.0;
      b2[i] = 0.2 * b[i] + 1.5;
    }
    CHECK(pearson(a2, b2) == doctest::Approx(pearson(a, b)).epsilon(1e-10));
  }
}

TEST_CASE("modes diverge on a 4-company cluster with rho 0.5") {
  const auto r = divergence_fixture();
  for (const auto& [i, ri] : r) {
    for (const auto& [j, rj] : r) {
      if (i < j) CHECK(pearson(ri.values, rj.values) == doctest::Approx(0.5).epsilon(1e-12));
    }
  }
  const auto c = clustering(2000, {{"a", "b", "c", "d"}});
  CHECK(mean_intra_cluster_correlation(c, r, McMode::PairMean).mc == doctest::Approx(0.5));
  CHECK(mean_intra_cluster_correlation(c, r, McMode::PaperLiteral).mc == doctest::Approx(0.75));
}

TEST_CASE("three-company cluster: modes agree when pairs equal size") {
  // 3 pairs over 3 companies: pair sum / 3 equals the pair mean
  const auto r = divergence_fixture();
  const auto c = clustering(2000, {{"a", "b", "c"}, {"d"}});
  const auto pm = mean_intra_cluster_correlation(c, r, McMode::PairMean);
  const auto pl = mean_intra_cluster_correlation(c, r, McMode::PaperLiteral);
  CHECK(pm.mc == doctest::Approx(0.5));
  CHECK(pl.mc == doctest::Approx(0.5));
  CHECK(pm.scored_clusters == 1);
}

TEST_CASE("identical series score 1 and singletons are left out") {
  const auto basis = orthogonal_centred(3, 5);
  ReturnMap r;
  for (const char* id : {"x", "y", "z"}) r[id] = series(id, 2001, basis[0]);
  r["w"] = series("w", 2001, basis[1]);
  CHECK(mean_intra_cluster_correlation(clustering(2001, {{"x", "y", "z"}, {"w"}}), r, McMode::PairMean).mc ==
        doctest::Approx(1.0));

  // singletons plus one pair equals that pair's rho
  const double rho = pearson(r["x"].values, r["w"].values);
  CHECK(mean_intra_cluster_correlation(clustering(2001, {{"x", "w"}, {"y"}, {"z"}}), r, McMode::PairMean).mc ==
        doctest::Approx(rho));

  CHECK_THROWS_AS(mean_intra_cluster_correlation(clustering(2001, {{"x"}, {"y"}, {"z"}, {"w"}}), r,
                                                 McMode::PairMean),
                  UndefinedError);
}

TEST_CASE("pairs with undefined rho are skipped") {
  auto r = divergence_fixture();
  r["flat"] = series("flat", 2000, Eigen::VectorXd::Constant(12, 0.01));
  const auto s = mean_intra_cluster_correlation(clustering(2000, {{"a", "b", "flat"}}), r, McMode::PairMean);
  CHECK(s.mc == doctest::Approx(0.5));
  CHECK(s.skipped_pairs == 2);
}

TEST_CASE("merging clusters matches direct recomputation") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  ReturnMap r;
  std::vector<CompanyId> ids;
  for (int i = 0; i < 8; ++i) {
    Eigen::VectorXd v(12);
    for (int m = 0; m < 12; ++m) v[m] = n01(rng);
    ids.push_back("c" + std::to_string(i));
    r[ids.back()] = series(ids.back(), 2002, v);
  }
  auto pair_mean = [&](const std::vector<CompanyId>& c) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (std::size_t j = i + 1; j < c.size(); ++j, ++n) s += pearson(r[c[i]].values, r[c[j]].values);
    }
    return s / n;
  };
  const std::vector<CompanyId> a{"c0", "c1", "c2"}, b{"c3", "c4"}, rest{"c5", "c6", "c7"};
  std::vector<CompanyId> merged = a;
  merged.insert(merged.end(), b.begin(), b.end());
  const double before = mean_intra_cluster_correlation(clustering(2002, {a, b, rest}), r, McMode::PairMean).mc;
  const double after = mean_intra_cluster_correlation(clustering(2002, {merged, rest}), r, McMode::PairMean).mc;
  CHECK(before == doctest::Approx((pair_mean(a) + pair_mean(b) + pair_mean(rest)) / 3.0));
  CHECK(after == doctest::Approx((pair_mean(merged) + pair_mean(rest)) / 2.0));
}

TEST_CASE("overall MC is the mean over years") {
  CHECK(overall_mc({{1996, 0.3}, {1997, 0.5}}) == doctest::Approx(0.4));
  CHECK(overall_mc({{2010, 0.25}}) == doctest::Approx(0.25));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  std::map<int, double> years;
  double s = 0.0;
  for (int y = 1996; y <= 2020; ++y) s += years[y] = u(rng);
  CHECK(overall_mc(years) == doctest::Approx(s / 25.0));
  CHECK_THROWS(overall_mc({}));
}

TEST_CASE("population baseline") {
  const auto basis = orthogonal_centred(2, 3);
  ReturnMap two;
  two["a"] = series("a", 2000, basis[0]);
  two["b"] = series("b", 2000, 2.0 * basis[0]);
  std::vector<YearPanel> panels{panel_from(2000, two)};
  CHECK(population_baseline(panels) == doctest::Approx(1.0));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  std::vector<YearPanel> noise;
  for (int y = 2000; y < 2005; ++y) {
    ReturnMap r;
    for (int i = 0; i < 120; ++i) {
      Eigen::VectorXd v(12);
      for (int m = 0; m < 12; ++m) v[m] = n01(rng);
      const auto id = "c" + std::to_string(i);
      r[id] = series(id, y, v);
    }
    noise.push_back(panel_from(y, r));
  }
  CHECK(std::abs(population_baseline(noise)) < 0.02);
}

TEST_CASE("evaluation report and CSV") {
  const auto r = divergence_fixture(2000);
  auto r2 = divergence_fixture(2001);
  std::vector<YearPanel> panels{panel_from(2000, r), panel_from(2001, r2)};
  std::vector<YearClustering> cs{clustering(2000, {{"a", "b", "c", "d"}}),
                                 clustering(2001, {{"a", "b"}, {"c"}, {"d"}})};
  const auto rep = evaluate_clusterings("CD", cs, panels, McMode::PaperLiteral);
  REQUIRE(rep.years.size() == 2);
  CHECK(rep.years[0].mc == doctest::Approx(0.75));
  CHECK(rep.years[1].mc == doctest::Approx(0.25));
  CHECK(rep.years[1].clusters == 3);
  CHECK(rep.overall == doctest::Approx(0.5));

  std::ostringstream out;
  write_evaluation(out, std::vector<EvaluationReport>{rep});
  const auto text = out.str();
  CHECK(text.rfind("method,year,mc,clusters,mean_cluster_size,skipped_pairs\n", 0) == 0);
  CHECK(text.find("CD,overall:paper_literal,") != std::string::npos);
  CHECK(parse_mc_mode(to_string(McMode::PairMean)) == McMode::PairMean);
  CHECK_THROWS(parse_mc_mode("bogus"));
}
