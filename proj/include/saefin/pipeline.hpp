#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "saefin/backtest.hpp"
#include "saefin/calib.hpp"
#include "saefin/corpus.hpp"
#include "saefin/graphcluster.hpp"
#include "saefin/interp.hpp"
#include "saefin/metrics.hpp"
#include "saefin/pca.hpp"
#include "saefin/synth.hpp"

namespace saefin {

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  // paths; relative ones resolve against the config file's directory
  std::filesystem::path features;
  std::filesystem::path returns;
  std::filesystem::path metadata;
  std::filesystem::path prices;             // required when trading is enabled
  std::filesystem::path external_clusters;  // optional
  std::filesystem::path output = "run";

  FeatureFormat features_format = FeatureFormat::Summed;
  FeatureSpace space{};
  bool raw_returns = false;
  int min_history = 1;

  std::size_t pca_components = 4000;  // capped at min(#documents, dim)
  ThetaGrid grid{};
  McMode mc_mode = McMode::PairMean;
  int rolling_lookback = 5;

  bool trading_enabled = true;
  TradingConfig trading{};

  bool interpret_enabled = true;
  double top_feature_percent = 1.0;

  std::uint64_t seed = 0;

  void validate() const;
};

/// Parses a YAML run file. Unknown keys are rejected.
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical YAML rendering; loading it back yields the same config.
std::string render_run_config(const RunConfig& config);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Raised when a stage fails; carries the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// ------------------------------------------------------------ reusable stages

LoadedCorpus ingest(const RunConfig& config);

struct YearGraph {
  DistanceGraph graph;
  MstForest mst;
};

/// Normalized distance graph and MST per panel year (parallel over years).
std::map<int, YearGraph> build_year_graphs(std::span<const YearPanel> panels, const PcaModel& model);

/// Panels keyed by year, for lookups.
std::map<int, const YearPanel*> index_panels(std::span<const YearPanel> panels);

struct BacktestOutcome {
  SelectionResult selection;
  std::vector<PairTradeLog> logs;
  PortfolioTrajectory trajectory;
  BacktestSummary summary;
  AccessAudit audit;
};

/// Pre-selection on `clustering`, cointegration on in-sample prices, trading
/// and accounting out of sample.
BacktestOutcome run_backtest(const std::string& method, const YearClustering& clustering,
                             std::span<const YearPanel> panels, const PriceBook& prices, const TradingConfig& config);

/// Runs every stage and writes artifacts into config.output. On failure a
/// FAILED marker naming the stage is written and StageError is thrown.
std::filesystem::path run_pipeline(const RunConfig& config);

/// Run file matching a synthetic universe written to `dir`.
RunConfig synth_run_config(const SynthConfig& synth, const std::filesystem::path& dir);

}  // namespace saefin
