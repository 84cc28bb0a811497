#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "saefin/corpus.hpp"
#include "saefin/sparsefeat.hpp"

namespace saefin {

struct SynthConfig {
  std::size_t n_companies = 200;
  std::size_t n_sectors = 8;
  int first_year = 2016;
  int years = 5;
  std::size_t feature_dim = 1024;
  std::size_t signature_size = 16;  // features per sector
  /// Probability that a token feature is drawn from the whole space instead
  /// of the company's sector signature.
  double signature_noise = 0.15;
  std::size_t tokens_per_doc = 128;
  std::size_t features_per_token = 8;
  double factor_vol = 0.05;  // monthly log-return vol of the sector factor
  double idio_vol = 0.03;    // monthly idiosyncratic vol
  std::size_t pairs_per_sector = 1;
  double pair_beta = 1.0;
  double pair_offset = 20.0;
  double spread_phi = 0.9;   // daily AR(1) coefficient of the planted spread
  double spread_vol = 0.2;   // daily innovation sd of the planted spread
  bool with_prices = true;
  bool keep_tokens = false;
  /// If nonzero, drop company-years (earliest years of the highest-numbered
  /// companies first, keeping one year each) until this many rows remain.
  std::size_t target_rows = 0;
  std::uint64_t seed = 1;

  void validate() const;
  int last_year() const { return first_year + years - 1; }
};

struct PlantedPair {
  CompanyId id_a;  // a = beta * b + offset + stationary noise
  CompanyId id_b;
  double beta = 0.0;
  double offset = 0.0;
};

struct GroundTruth {
  std::map<CompanyId, int> sector;           // same in every year
  std::vector<std::vector<FeatureId>> signatures;  // per sector, sorted
  std::vector<PlantedPair> pairs;
};

struct SynthUniverse {
  std::vector<CompanyRecord> metadata;
  std::vector<ReturnSeries> returns;
  std::vector<SummedFeatureVector> features;
  std::vector<TokenFeatureActivations> tokens;  // only with keep_tokens
  PriceBook prices;
  std::vector<YearPanel> panels;
  GroundTruth truth;
};

SynthUniverse generate_universe(const SynthConfig& config);

/// Writes metadata.csv, returns.csv, features.csv, prices.csv (if any),
/// tokens.csv (if kept) and ground_truth.csv into `dir`.
void write_universe(const std::filesystem::path& dir, const SynthUniverse& universe);

/// Adjusted Rand index of two labelings of the same elements.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// Two price paths of length n: b a geometric random walk, a = beta * b +
/// offset + AR(1) noise, using the config's pair parameters.
struct PricePath {
  std::vector<double> a;
  std::vector<double> b;
};
PricePath planted_pair_path(std::size_t n, const SynthConfig& config, std::uint64_t seed);

/// Two independent Gaussian random walks of length n (unit innovations).
PricePath independent_walks(std::size_t n, std::uint64_t seed);

}  // namespace saefin
