#include "saefin/pca.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "saefin/csv.hpp"

namespace saefin {

static_assert(std::endian::native == std::endian::little,
              "model files are written in host order and must be little-endian");

PcaModel::PcaModel(Eigen::VectorXd mean, Eigen::MatrixXd components, Eigen::VectorXd explained_variance,
                   double total_variance)
    : mean_(std::move(mean)),
      components_(std::move(components)),
      explained_variance_(std::move(explained_variance)),
      total_variance_(total_variance) {
  if (components_.cols() != mean_.size()) throw InputError("PCA components/mean dimension mismatch");
  if (explained_variance_.size() != components_.rows()) throw InputError("PCA variance/component count mismatch");
  mean_projection_ = components_ * mean_;
}

Eigen::VectorXd PcaModel::explained_variance_ratio() const {
  if (!(total_variance_ > 0.0)) return Eigen::VectorXd::Zero(explained_variance_.size());
  return explained_variance_ / total_variance_;
}

void PcaModel::check_dim(const SummedFeatureVector& v) const {
  if (v.dim() != dim()) {
    throw InputError(fmt::format("{}: vector dim {} does not match PCA model dim {}", v.doc_id(), v.dim(), dim()));
  }
}

DenseVector PcaModel::transform(const SummedFeatureVector& v) const {
  check_dim(v);
  Eigen::VectorXd g = -mean_projection_;
  for (const auto& e : v.entries()) g.noalias() += e.activation * components_.col(e.feature);
  return DenseVector{v.doc_id(), std::move(g)};
}

DenseVector PcaModel::transform_with_feature_zeroed(const SummedFeatureVector& v, FeatureId z) const {
  DenseVector g = transform(v);
  if (z >= dim()) throw InputError(fmt::format("feature {} outside model dim {}", z, dim()));
  const double x = v.value(z);
  if (x != 0.0) g.values.noalias() -= x * components_.col(z);
  return g;
}

Eigen::VectorXd PcaModel::inverse_transform(const Eigen::VectorXd& g) const {
  if (g.size() != components_.rows()) throw InputError("inverse_transform: wrong component count");
  return mean_ + components_.transpose() * g;
}

namespace {

void write_u64(std::ofstream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

void write_f64s(std::ofstream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void read_f64s(std::ifstream& in, double* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace

void PcaModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_u64(out, dim());
  write_u64(out, n_components());
  write_f64s(out, mean_.data(), dim());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = components_;
  write_f64s(out, rows.data(), static_cast<std::size_t>(rows.size()));
  write_f64s(out, explained_variance_.data(), n_components());
  write_f64s(out, &total_variance_, 1);
  if (!out) throw Error("failed writing " + path.string());
}

PcaModel PcaModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open PCA model " + path.string());
  const auto dim = read_u64(in);
  const auto k = read_u64(in);
  if (!in || dim == 0 || k > dim || dim > (std::uint64_t{1} << 32)) {
    throw InputError(path.string() + ": corrupt PCA model header");
  }
  Eigen::VectorXd mean(static_cast<Eigen::Index>(dim));
  read_f64s(in, mean.data(), dim);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(static_cast<Eigen::Index>(k),
                                                                              static_cast<Eigen::Index>(dim));
  read_f64s(in, rows.data(), static_cast<std::size_t>(rows.size()));
  Eigen::VectorXd var(static_cast<Eigen::Index>(k));
  read_f64s(in, var.data(), k);
  double total = 0.0;
  read_f64s(in, &total, 1);
  if (!in) throw InputError(path.string() + ": truncated PCA model");
  return PcaModel(std::move(mean), Eigen::MatrixXd(rows), std::move(var), total);
}

PcaFit fit_pca(std::span<const SummedFeatureVector> corpus, std::size_t n_components) {
  const auto n = corpus.size();
  if (n < 2) throw InputError("fit_pca needs at least 2 documents");
  const std::size_t d = corpus.front().dim();
  for (const auto& v : corpus) {
    if (v.dim() != d) throw InputError("fit_pca: documents have differing dims");
  }
  if (n_components == 0 || n_components > std::min(n, d)) {
    throw InputError(fmt::format("n_components {} must lie in [1, min(#documents={}, dim={})]", n_components, n, d));
  }

  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(d);
  const auto k = static_cast<Eigen::Index>(n_components);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (const auto& e : corpus[static_cast<std::size_t>(i)].entries()) x(i, e.feature) = e.activation;
  }
  Eigen::VectorXd mean = x.colwise().mean().transpose();
  x.rowwise() -= mean.transpose();
  const double dof = static_cast<double>(n - 1);
  const double total = x.squaredNorm() / dof;

  Eigen::MatrixXd components(k, cols);
  Eigen::VectorXd variance(k);
  Eigen::VectorXd spectrum;  // all variances, descending
  if (n < d) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    spectrum = svd.singularValues().array().square() / dof;
    components = svd.matrixV().leftCols(k).transpose();
  } else {
    const Eigen::MatrixXd cov = (x.transpose() * x) / dof;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");
    spectrum = eig.eigenvalues().reverse().cwiseMax(0.0);
    components = eig.eigenvectors().rowwise().reverse().leftCols(k).transpose();
  }

  const double top = spectrum.size() > 0 ? spectrum(0) : 0.0;
  const double tol = top * static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon();
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    if (spectrum(i) > tol) ++rank;
  }
  for (Eigen::Index i = 0; i < k; ++i) variance(i) = spectrum(i) > tol ? spectrum(i) : 0.0;

  // Sign convention: the largest-magnitude loading of each component is positive.
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index arg = 0;
    components.row(i).cwiseAbs().maxCoeff(&arg);
    if (components(i, arg) < 0.0) components.row(i) *= -1.0;
  }

  PcaFit fit{PcaModel(std::move(mean), std::move(components), std::move(variance), total), rank, {}};
  if (n_components > rank) {
    fit.warnings.push_back(fmt::format("data rank {} is below n_components {}; trailing components carry zero variance",
                                       rank, n_components));
  }
  return fit;
}

void write_variance_table(std::ostream& out, const PcaModel& model) {
  out << "component,variance,ratio,cumulative_ratio\n";
  const Eigen::VectorXd ratio = model.explained_variance_ratio();
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < ratio.size(); ++i) {
    cumulative += ratio(i);
    out << i << ',' << csv::fmt_double(model.explained_variance()(i)) << ',' << csv::fmt_double(ratio(i)) << ','
        << csv::fmt_double(cumulative) << '\n';
  }
}

}  // namespace saefin
