#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "saefin/sparsefeat.hpp"

namespace saefin {

/// A PCA-transformed document.
struct DenseVector {
  std::string doc_id;
  Eigen::VectorXd values;
};

/// Global linear projection fitted once over every year's summed vectors.
/// Components are stored as an (n_components x dim) matrix with orthonormal
/// rows; column f holds the loadings of feature f.
class PcaModel {
 public:
  PcaModel(Eigen::VectorXd mean, Eigen::MatrixXd components, Eigen::VectorXd explained_variance,
           double total_variance);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  std::size_t n_components() const { return static_cast<std::size_t>(components_.rows()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& components() const { return components_; }
  const Eigen::VectorXd& explained_variance() const { return explained_variance_; }
  double total_variance() const { return total_variance_; }
  Eigen::VectorXd explained_variance_ratio() const;

  /// components * (densify(v) - mean), computed from the sparse entries only.
  DenseVector transform(const SummedFeatureVector& v) const;

  /// transform of v with feature z removed; uses linearity rather than
  /// re-projecting the patched vector.
  DenseVector transform_with_feature_zeroed(const SummedFeatureVector& v, FeatureId z) const;

  /// mean + components^T * g
  Eigen::VectorXd inverse_transform(const Eigen::VectorXd& g) const;

  /// Little-endian: u64 dim, u64 n_components, then f64 mean[dim],
  /// components row-major [n_components][dim], variances[n_components],
  /// total_variance.
  void save(const std::filesystem::path& path) const;
  static PcaModel load(const std::filesystem::path& path);

 private:
  void check_dim(const SummedFeatureVector& v) const;

  Eigen::VectorXd mean_;
  Eigen::MatrixXd components_;
  Eigen::VectorXd explained_variance_;
  double total_variance_ = 0.0;
  Eigen::VectorXd mean_projection_;  // components * mean
};

struct PcaFit {
  PcaModel model;
  std::size_t rank = 0;
  std::vector<std::string> warnings;
};

/// Fits the projection. Uses a thin SVD of the centred document matrix when
/// there are fewer documents than features and a covariance eigendecomposition
/// otherwise. Components beyond the data rank get zero variance and a warning.
PcaFit fit_pca(std::span<const SummedFeatureVector> corpus, std::size_t n_components);

/// component,variance,ratio,cumulative_ratio
void write_variance_table(std::ostream& out, const PcaModel& model);

}  // namespace saefin
