#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "saefin/common.hpp"

namespace saefin {

/// Corpus-level shape of the SAE feature space.
struct FeatureSpace {
  std::size_t dim = 131072;
  std::size_t k_active = 128;

  void validate() const;
};

struct FeatureActivation {
  FeatureId feature = 0;
  double activation = 0.0;

  friend bool operator==(const FeatureActivation&, const FeatureActivation&) = default;
};

/// Sparse SAE activations of a single token.
struct TokenFeatureActivations {
  std::string doc_id;
  std::uint32_t token_index = 0;
  std::vector<FeatureActivation> entries;

  friend bool operator==(const TokenFeatureActivations&, const TokenFeatureActivations&) = default;
};

/// Per-document sum of token activations. Entries are sorted by feature id
/// and every stored value is strictly positive.
class SummedFeatureVector {
 public:
  SummedFeatureVector() = default;
  SummedFeatureVector(std::string doc_id, std::size_t dim);
  /// Entries may arrive in any order; duplicates or out-of-range ids throw.
  SummedFeatureVector(std::string doc_id, std::size_t dim, std::vector<FeatureActivation> entries);

  const std::string& doc_id() const { return doc_id_; }
  std::size_t dim() const { return dim_; }
  std::span<const FeatureActivation> entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }

  /// Zero when the feature is not active.
  double value(FeatureId f) const;

  friend bool operator==(const SummedFeatureVector&, const SummedFeatureVector&) = default;

 private:
  std::string doc_id_;
  std::size_t dim_ = 0;
  std::vector<FeatureActivation> entries_;
};

/// Sums activations feature-wise over the tokens of one document.
/// Throws InputError if the tokens belong to different documents.
SummedFeatureVector sum_token_features(std::span<const TokenFeatureActivations> tokens,
                                       const FeatureSpace& space);

/// Groups token records by doc_id (first-appearance order) and sums each.
std::vector<SummedFeatureVector> sum_documents(std::span<const TokenFeatureActivations> tokens,
                                               const FeatureSpace& space);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;  // +inf for the pooled overflow bin
  std::size_t count = 0;
};

/// Histogram of all stored summed values. Regular bins of width bin_width
/// cover [0, clip_max); everything >= clip_max lands in a final pooled bin.
std::vector<HistogramBin> activation_histogram(std::span<const SummedFeatureVector> vectors,
                                               double bin_width, double clip_max);

void write_histogram(std::ostream& out, std::span<const HistogramBin> bins);

// File formats:
//   tokens: doc_id,token_index,feature_id,activation
//   summed: doc_id,feature_id,summed_activation
std::vector<TokenFeatureActivations> load_token_activations(const std::filesystem::path& path,
                                                            const FeatureSpace& space);
void write_token_activations(std::ostream& out, std::span<const TokenFeatureActivations> tokens);

std::vector<SummedFeatureVector> load_summed_features(const std::filesystem::path& path,
                                                      const FeatureSpace& space);
void write_summed_features(std::ostream& out, std::span<const SummedFeatureVector> vectors);

}  // namespace saefin
