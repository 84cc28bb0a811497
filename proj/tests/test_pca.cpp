#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "saefin/pca.hpp"
#include "test_util.hpp"

using namespace saefin;

namespace {

Eigen::VectorXd densify(const SummedFeatureVector& v) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v.dim()));
  for (const auto& e : v.entries()) x[e.feature] = e.activation;
  return x;
}

std::vector<SummedFeatureVector> random_corpus(std::size_t n, std::size_t dim, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution on(density);
  std::exponential_distribution<double> act(1.0);
  std::vector<SummedFeatureVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<FeatureActivation> entries;
    for (std::size_t f = 0; f < dim; ++f) {
      if (on(rng)) entries.push_back({static_cast<FeatureId>(f), 1e-3 + act(rng)});
    }
    if (entries.empty()) entries.push_back({static_cast<FeatureId>(i % dim), 1.0});
    out.emplace_back("d" + std::to_string(i), dim, std::move(entries));
  }
  return out;
}

}  // namespace

TEST_CASE("collinear points give one component along (1,2)") {
  std::vector<SummedFeatureVector> docs;
  for (int i = 1; i <= 5; ++i) docs.emplace_back("d" + std::to_string(i), 2, std::vector<FeatureActivation>{{0, 1.0 * i}, {1, 2.0 * i}});
  const auto fit = fit_pca(docs, 2);
  const auto& c = fit.model.components();
  CHECK(c(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-10));
  CHECK(c(0, 1) == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-10));
  CHECK(fit.model.explained_variance()[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fit.rank == 1);
  CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("components are orthonormal and variances sorted") {
  const auto docs = random_corpus(40, 60, 0.2, 1);
  const auto fit = fit_pca(docs, 20);
  const auto& c = fit.model.components();
  const Eigen::MatrixXd gram = c * c.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-8);
  const auto& var = fit.model.explained_variance();
  for (Eigen::Index i = 1; i < var.size(); ++i) CHECK(var[i] <= var[i - 1] + 1e-12);
  const Eigen::VectorXd ratio = fit.model.explained_variance_ratio();
  CHECK(ratio.sum() <= 1.0 + 1e-12);
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    Eigen::Index arg;
    c.row(i).cwiseAbs().maxCoeff(&arg);
    CHECK(c(i, arg) > 0.0);
  }
}

TEST_CASE("full-rank reconstruction recovers the data") {
  // more documents than features exercises the covariance path
  const auto docs = random_corpus(50, 12, 0.5, 2);
  const auto fit = fit_pca(docs, 12);
  for (const auto& d : docs) {
    const auto g = fit.model.transform(d);
    CHECK((fit.model.inverse_transform(g.values) - densify(d)).cwiseAbs().maxCoeff() < 1e-6);
  }
  // fewer documents than features exercises the SVD path
  const auto wide = random_corpus(10, 80, 0.2, 3);
  const auto wfit = fit_pca(wide, 9);  // centred rank is at most n - 1
  for (const auto& d : wide) {
    const auto g = wfit.model.transform(d);
    CHECK((wfit.model.inverse_transform(g.values) - densify(d)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("planted 10-factor corpus is captured by 10 components") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  const std::size_t dim = 200, n = 300, k = 10;
  Eigen::MatrixXd loadings(k, dim);
  for (Eigen::Index i = 0; i < loadings.size(); ++i) loadings.data()[i] = std::abs(n01(rng));
  std::vector<SummedFeatureVector> docs;
  Eigen::MatrixXd x(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd f(k);
    for (std::size_t j = 0; j < k; ++j) f[j] = 1.0 + std::abs(n01(rng));
    Eigen::VectorXd row = loadings.transpose() * f;
    for (std::size_t j = 0; j < dim; ++j) row[j] += 0.01 * std::abs(n01(rng));
    x.row(i) = row.transpose();
    std::vector<FeatureActivation> entries;
    for (std::size_t j = 0; j < dim; ++j) entries.push_back({static_cast<FeatureId>(j), row[j]});
    docs.emplace_back("d" + std::to_string(i), dim, std::move(entries));
  }
  const auto fit = fit_pca(docs, k);
  const double captured = fit.model.explained_variance_ratio().sum();
  CHECK(captured >= 0.99);

  const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd ev = eig.eigenvalues().reverse();
  for (std::size_t j = 0; j < k; ++j) {
    CHECK(fit.model.explained_variance()[j] == doctest::Approx(ev[j]).epsilon(1e-8));
  }
  CHECK(captured == doctest::Approx(ev.head(k).sum() / ev.sum()).epsilon(1e-8));
}

TEST_CASE("transform of the mean is zero and matches a dense oracle") {
  const auto docs = random_corpus(30, 50, 0.3, 4);
  const auto fit = fit_pca(docs, 15);
  const auto& m = fit.model;
  for (const auto& d : docs) {
    const Eigen::VectorXd dense = m.components() * (densify(d) - m.mean());
    CHECK((m.transform(d).values - dense).cwiseAbs().maxCoeff() < 1e-9);
  }
  std::vector<FeatureActivation> mean_entries;
  for (Eigen::Index j = 0; j < m.mean().size(); ++j) {
    if (m.mean()[j] > 0) mean_entries.push_back({static_cast<FeatureId>(j), m.mean()[j]});
  }
  const SummedFeatureVector mean_vec("mean", 50, mean_entries);
  CHECK(m.transform(mean_vec).values.cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(m.transform(SummedFeatureVector("x", 49, {{0, 1.0}})), InputError);
}

TEST_CASE("zeroing a feature matches recomputation") {
  const auto docs = random_corpus(30, 50, 0.3, 6);
  const auto fit = fit_pca(docs, 15);
  const auto& m = fit.model;
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<FeatureId> pick(0, 49);
  for (const auto& d : docs) {
    const FeatureId z = pick(rng);
    Eigen::VectorXd x = densify(d);
    x[z] = 0.0;
    const Eigen::VectorXd oracle = m.components() * (x - m.mean());
    CHECK((m.transform_with_feature_zeroed(d, z).values - oracle).cwiseAbs().maxCoeff() < 1e-9);
  }
  // inactive feature: unchanged
  const auto& d = docs[0];
  FeatureId inactive = 0;
  while (d.value(inactive) != 0.0) ++inactive;
  CHECK((m.transform_with_feature_zeroed(d, inactive).values - m.transform(d).values).cwiseAbs().maxCoeff() == 0.0);
  // single active feature: result is the projection of the zero vector
  const SummedFeatureVector single("s", 50, {{3, 2.0}});
  const Eigen::VectorXd minus_mean = -(m.components() * m.mean());
  CHECK((m.transform_with_feature_zeroed(single, 3).values - minus_mean).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("transform is affine") {
  const auto docs = random_corpus(20, 30, 0.4, 8);
  const auto fit = fit_pca(docs, 10);
  const auto& m = fit.model;
  const double a = 0.7, b = 2.5;
  const Eigen::VectorXd u = densify(docs[0]), v = densify(docs[1]);
  const Eigen::VectorXd mix = a * u + b * v;
  std::vector<FeatureActivation> entries;
  for (Eigen::Index j = 0; j < mix.size(); ++j) {
    if (mix[j] > 0) entries.push_back({static_cast<FeatureId>(j), mix[j]});
  }
  const Eigen::VectorXd lhs = m.transform(SummedFeatureVector("mix", 30, entries)).values -
                              (a + b - 1.0) * (m.components() * m.mean());
  const Eigen::VectorXd rhs = a * m.transform(docs[0]).values + b * m.transform(docs[1]).values;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("model save and load round trip") {
  testutil::TempDir dir;
  const auto docs = random_corpus(20, 25, 0.4, 10);
  const auto fit = fit_pca(docs, 5);
  fit.model.save(dir / "pca.bin");
  const auto back = PcaModel::load(dir / "pca.bin");
  CHECK(back.dim() == 25);
  CHECK(back.n_components() == 5);
  CHECK(back.components() == fit.model.components());
  CHECK(back.mean() == fit.model.mean());
  CHECK(back.explained_variance() == fit.model.explained_variance());
  CHECK(back.total_variance() == fit.model.total_variance());
  testutil::write_file(dir / "junk.bin", "abc");
  CHECK_THROWS(PcaModel::load(dir / "junk.bin"));
}

TEST_CASE("fit preconditions") {
  const auto docs = random_corpus(5, 10, 0.5, 12);
  CHECK_THROWS_AS(fit_pca(std::span(docs).first(1), 1), InputError);
  CHECK_THROWS_AS(fit_pca(docs, 6), InputError);
  CHECK_THROWS_AS(fit_pca(docs, 0), InputError);
}
