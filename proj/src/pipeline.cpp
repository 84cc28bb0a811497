#include "saefin/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Core>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "saefin/csv.hpp"
#include "saefin/parallel.hpp"

namespace saefin {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  if (features.empty() || returns.empty() || metadata.empty()) {
    throw InputError("config: paths.features, paths.returns and paths.metadata are required");
  }
  if (output.empty()) throw InputError("config: paths.output is required");
  space.validate();
  if (min_history < 1) throw InputError("config: ingest.min_history must be >= 1");
  if (pca_components < 1) throw InputError("config: pca.components must be >= 1");
  grid.validate();
  if (rolling_lookback < 1) throw InputError("config: clustering.rolling_lookback must be >= 1");
  if (trading_enabled) {
    trading.validate();
    if (prices.empty()) throw InputError("config: paths.prices is required when trading is enabled");
  }
  if (!(top_feature_percent > 0.0 && top_feature_percent <= 100.0)) {
    throw InputError("config: interpret.top_feature_percent must lie in (0, 100]");
  }
}

// ------------------------------------------------------------------ config I/O

namespace {

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) throw InputError("config: '" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InputError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (node[key]) out = node[key].as<T>();
}

void read_path(const YAML::Node& node, const char* key, const fs::path& base, fs::path& out) {
  if (!node[key]) return;
  fs::path p = node[key].as<std::string>();
  out = p.is_absolute() ? p : base / p;
}

void read_date(const YAML::Node& node, const char* key, Date& out) {
  if (node[key]) out = parse_date(node[key].as<std::string>());
}

}  // namespace

RunConfig load_run_config(const fs::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
  const fs::path base = fs::absolute(path).parent_path();
  RunConfig c;
  try {
    check_keys(root, "", {"paths", "features", "ingest", "pca", "clustering", "trading", "interpret", "seed"});
    if (auto n = root["paths"]) {
      check_keys(n, "paths", {"features", "returns", "metadata", "prices", "external_clusters", "output"});
      read_path(n, "features", base, c.features);
      read_path(n, "returns", base, c.returns);
      read_path(n, "metadata", base, c.metadata);
      read_path(n, "prices", base, c.prices);
      read_path(n, "external_clusters", base, c.external_clusters);
      read_path(n, "output", base, c.output);
    }
    if (c.output.is_relative()) c.output = base / c.output;
    if (auto n = root["features"]) {
      check_keys(n, "features", {"format", "dim", "k_active"});
      if (n["format"]) {
        const auto f = n["format"].as<std::string>();
        if (f == "summed") c.features_format = FeatureFormat::Summed;
        else if (f == "tokens") c.features_format = FeatureFormat::Tokens;
        else throw InputError("config: features.format must be summed or tokens");
      }
      read(n, "dim", c.space.dim);
      read(n, "k_active", c.space.k_active);
    }
    if (auto n = root["ingest"]) {
      check_keys(n, "ingest", {"raw_returns", "min_history"});
      read(n, "raw_returns", c.raw_returns);
      read(n, "min_history", c.min_history);
    }
    if (auto n = root["pca"]) {
      check_keys(n, "pca", {"components"});
      read(n, "components", c.pca_components);
    }
    if (auto n = root["clustering"]) {
      check_keys(n, "clustering", {"theta_start", "theta_stop", "theta_step", "mc_mode", "rolling_lookback"});
      read(n, "theta_start", c.grid.start);
      read(n, "theta_stop", c.grid.stop);
      read(n, "theta_step", c.grid.step);
      if (n["mc_mode"]) c.mc_mode = parse_mc_mode(n["mc_mode"].as<std::string>());
      read(n, "rolling_lookback", c.rolling_lookback);
    }
    if (auto n = root["trading"]) {
      check_keys(n, "trading",
                 {"enabled", "in_sample_start", "in_sample_end", "out_of_sample_start", "out_of_sample_end",
                  "preselect_corr_min", "coint_p_max", "entry_band", "stop_band", "transaction_cost",
                  "initial_cash", "min_overlap_days"});
      read(n, "enabled", c.trading_enabled);
      read_date(n, "in_sample_start", c.trading.in_sample.first);
      read_date(n, "in_sample_end", c.trading.in_sample.last);
      read_date(n, "out_of_sample_start", c.trading.out_of_sample.first);
      read_date(n, "out_of_sample_end", c.trading.out_of_sample.last);
      read(n, "preselect_corr_min", c.trading.preselect_corr_min);
      read(n, "coint_p_max", c.trading.coint_p_max);
      read(n, "entry_band", c.trading.entry_band);
      read(n, "stop_band", c.trading.stop_band);
      read(n, "transaction_cost", c.trading.transaction_cost);
      read(n, "initial_cash", c.trading.initial_cash);
      read(n, "min_overlap_days", c.trading.min_overlap_days);
    }
    if (auto n = root["interpret"]) {
      check_keys(n, "interpret", {"enabled", "top_feature_percent"});
      read(n, "enabled", c.interpret_enabled);
      read(n, "top_feature_percent", c.top_feature_percent);
    }
    read(root, "seed", c.seed);
  } catch (const YAML::Exception& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
  c.validate();
  return c;
}

std::string render_run_config(const RunConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "paths" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "features" << YAML::Value << c.features.string();
  out << YAML::Key << "returns" << YAML::Value << c.returns.string();
  out << YAML::Key << "metadata" << YAML::Value << c.metadata.string();
  if (!c.prices.empty()) out << YAML::Key << "prices" << YAML::Value << c.prices.string();
  if (!c.external_clusters.empty()) {
    out << YAML::Key << "external_clusters" << YAML::Value << c.external_clusters.string();
  }
  out << YAML::Key << "output" << YAML::Value << c.output.string();
  out << YAML::EndMap;

  out << YAML::Key << "features" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "format" << YAML::Value
      << (c.features_format == FeatureFormat::Summed ? "summed" : "tokens");
  out << YAML::Key << "dim" << YAML::Value << c.space.dim;
  out << YAML::Key << "k_active" << YAML::Value << c.space.k_active;
  out << YAML::EndMap;

  out << YAML::Key << "ingest" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "raw_returns" << YAML::Value << c.raw_returns;
  out << YAML::Key << "min_history" << YAML::Value << c.min_history;
  out << YAML::EndMap;

  out << YAML::Key << "pca" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "components" << YAML::Value << c.pca_components;
  out << YAML::EndMap;

  out << YAML::Key << "clustering" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "theta_start" << YAML::Value << csv::fmt_double(c.grid.start);
  out << YAML::Key << "theta_stop" << YAML::Value << csv::fmt_double(c.grid.stop);
  out << YAML::Key << "theta_step" << YAML::Value << csv::fmt_double(c.grid.step);
  out << YAML::Key << "mc_mode" << YAML::Value << std::string(to_string(c.mc_mode));
  out << YAML::Key << "rolling_lookback" << YAML::Value << c.rolling_lookback;
  out << YAML::EndMap;

  const auto& t = c.trading;
  out << YAML::Key << "trading" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << c.trading_enabled;
  out << YAML::Key << "in_sample_start" << YAML::Value << format_date(t.in_sample.first);
  out << YAML::Key << "in_sample_end" << YAML::Value << format_date(t.in_sample.last);
  out << YAML::Key << "out_of_sample_start" << YAML::Value << format_date(t.out_of_sample.first);
  out << YAML::Key << "out_of_sample_end" << YAML::Value << format_date(t.out_of_sample.last);
  out << YAML::Key << "preselect_corr_min" << YAML::Value << csv::fmt_double(t.preselect_corr_min);
  out << YAML::Key << "coint_p_max" << YAML::Value << csv::fmt_double(t.coint_p_max);
  out << YAML::Key << "entry_band" << YAML::Value << csv::fmt_double(t.entry_band);
  out << YAML::Key << "stop_band" << YAML::Value << csv::fmt_double(t.stop_band);
  out << YAML::Key << "transaction_cost" << YAML::Value << csv::fmt_double(t.transaction_cost);
  out << YAML::Key << "initial_cash" << YAML::Value << csv::fmt_double(t.initial_cash);
  out << YAML::Key << "min_overlap_days" << YAML::Value << t.min_overlap_days;
  out << YAML::EndMap;

  out << YAML::Key << "interpret" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << c.interpret_enabled;
  out << YAML::Key << "top_feature_percent" << YAML::Value << csv::fmt_double(c.top_feature_percent);
  out << YAML::EndMap;

  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

StageError::StageError(std::string stage, const std::string& cause)
    : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}

// ------------------------------------------------------------------ stages

LoadedCorpus ingest(const RunConfig& config) {
  LoadConfig lc;
  lc.features_format = config.features_format;
  lc.space = config.space;
  lc.raw_returns = config.raw_returns;
  auto corpus = load_panel(config.features, config.returns, config.metadata, lc);
  if (config.min_history > 1) corpus.panels = filter_min_history(std::move(corpus.panels), config.min_history);
  return corpus;
}

std::map<int, const YearPanel*> index_panels(std::span<const YearPanel> panels) {
  std::map<int, const YearPanel*> out;
  for (const auto& p : panels) out[p.year] = &p;
  return out;
}

std::map<int, YearGraph> build_year_graphs(std::span<const YearPanel> panels, const PcaModel& model) {
  std::map<int, YearGraph> out;
  for (const auto& panel : panels) {
    std::vector<GraphNode> nodes;
    nodes.reserve(panel.summed_features.size());
    for (const auto& [id, v] : panel.summed_features) nodes.push_back({id, model.transform(v).values});
    auto graph = normalize_distances(build_distance_graph(panel.year, std::move(nodes)));
    auto mst = build_mst(graph);
    out.emplace(panel.year, YearGraph{std::move(graph), std::move(mst)});
  }
  return out;
}

BacktestOutcome run_backtest(const std::string& method, const YearClustering& clustering,
                             std::span<const YearPanel> panels, const PriceBook& prices, const TradingConfig& config) {
  config.validate();
  BacktestOutcome o;
  const auto pairs = preselect_pairs(clustering, panels, config);
  o.selection = select_cointegrated(pairs, prices, config, o.audit);
  for (const auto& sel : o.selection.selected) {
    o.logs.push_back(
        simulate_pair(sel.spread, prices.at(sel.spread.id_a), prices.at(sel.spread.id_b), config, o.audit));
  }
  o.trajectory = portfolio_trajectory(method, o.logs, prices, config, o.audit);
  o.summary.method = method;
  o.summary.pairs_traded = o.logs.size();
  for (const auto& log : o.logs) o.summary.round_trips += log.round_trip_pnl.size();
  try {
    o.summary.sharpe = sharpe_ratio(o.trajectory);
  } catch (const UndefinedError&) {
  }
  return o;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                     std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

std::string file_sha256(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

struct MethodClusterings {
  std::string name;
  std::vector<YearClustering> years;
};

}  // namespace

fs::path run_pipeline(const RunConfig& config) {
  config.validate();
  const fs::path out = config.output;
  fs::create_directories(out);
  fs::remove(out / "FAILED");
  const std::string started = utc_now();
  const std::string rendered = render_run_config(config);
  {
    auto f = csv::open_output(out / "run.yaml");
    f << rendered;
  }

  std::string stage = "ingest";
  try {
    auto corpus = ingest(config);
    {
      auto f = csv::open_output(out / "load_report.txt");
      f << corpus.report.to_text();
    }
    const auto& panels = corpus.panels;
    if (panels.empty()) throw InputError("no year has data in all three sources");
    const auto by_year = index_panels(panels);

    stage = "pca";
    std::vector<SummedFeatureVector> docs;
    for (const auto& p : panels) {
      for (const auto& [_, v] : p.summed_features) docs.push_back(v);
    }
    const std::size_t k = std::min({config.pca_components, docs.size(), config.space.dim});
    auto fit = fit_pca(docs, k);
    docs.clear();
    const PcaModel& model = fit.model;
    model.save(out / "pca.bin");
    {
      auto f = csv::open_output(out / "pca_variance.csv");
      write_variance_table(f, model);
    }

    stage = "cluster";
    const auto graphs = build_year_graphs(panels, model);

    stage = "calibrate";
    std::vector<CalibrationYear> cal_years;
    for (const auto& [year, yg] : graphs) cal_years.push_back({year, yg.mst, &by_year.at(year)->returns});
    ThetaScorer scorer(std::move(cal_years), config.mc_mode);
    const auto fixed = calibrate_fixed(config.grid, scorer);
    const auto rolling = calibrate_rolling(config.grid, scorer, config.rolling_lookback);
    {
      const std::vector<CalibrationResult> both{fixed, rolling};
      auto f = csv::open_output(out / "calibration.csv");
      write_calibration(f, both);
      auto g = csv::open_output(out / "rolling_series.csv");
      write_rolling_series(g, rolling);
    }

    stage = "cluster";
    std::vector<MethodClusterings> methods;
    methods.push_back({"CD", {}});
    for (const auto& [year, yg] : graphs) methods.back().years.push_back(cut_mst(yg.mst, *fixed.theta_star));
    methods.push_back({"CDR", {}});
    for (const auto& [year, theta] : rolling.theta_by_year) {
      methods.back().years.push_back(cut_mst(graphs.at(year).mst, theta, ClusterMethod::CDR));
    }
    methods.push_back({"SIC", {}});
    methods.push_back({"BISC", {}});
    for (const auto& p : panels) {
      methods[2].years.push_back(benchmark_clusters(p, BenchmarkScheme::SIC));
      methods[3].years.push_back(benchmark_clusters(p, BenchmarkScheme::BISC));
    }
    if (!config.external_clusters.empty()) {
      methods.push_back({"external", {}});
      std::set<int> years;
      for (const auto& yc : read_clusters(config.external_clusters)) years.insert(yc.year);
      for (int y : years) {
        if (auto it = by_year.find(y); it != by_year.end()) {
          methods.back().years.push_back(load_external_clustering(config.external_clusters, y, *it->second));
        }
      }
    }
    for (const auto& m : methods) write_clusters(out / ("clusters_" + lower(m.name) + ".csv"), m.years);

    stage = "evaluate";
    {
      std::vector<EvaluationReport> reports;
      for (const auto& m : methods) reports.push_back(evaluate_clusterings(m.name, m.years, panels, config.mc_mode));
      std::vector<YearClustering> population;
      for (const auto& p : panels) {
        YearClustering all;
        all.year = p.year;
        all.clusters.push_back(p.company_ids());
        population.push_back(std::move(all));
      }
      reports.push_back(evaluate_clusterings("population", population, panels, McMode::PairMean));
      auto f = csv::open_output(out / "evaluation.csv");
      write_evaluation(f, reports);
    }

    if (config.trading_enabled) {
      stage = "backtest";
      const auto prices = load_prices(config.prices);
      const int pick_year = config.trading.in_sample.last_year();
      std::vector<BacktestSummary> summaries;
      std::vector<CointResult> all_tested;
      auto audit_file = csv::open_output(out / "backtest_audit.txt");
      for (const auto& m : methods) {
        auto it = std::find_if(m.years.begin(), m.years.end(), [&](const auto& yc) { return yc.year == pick_year; });
        if (it == m.years.end()) {
          audit_file << m.name << ": no clustering for " << pick_year << ", not traded\n";
          summaries.push_back({m.name, 0, 0, std::nullopt});
          continue;
        }
        const auto o = run_backtest(m.name, *it, panels, prices, config.trading);
        const auto tag = lower(m.name);
        {
          auto f = csv::open_output(out / ("cointegration_" + tag + ".csv"));
          write_cointegration(f, o.selection.tested);
        }
        {
          auto f = csv::open_output(out / ("trades_" + tag + ".csv"));
          write_trade_log(f, o.logs);
        }
        {
          auto f = csv::open_output(out / ("trajectory_" + tag + ".csv"));
          write_trajectory(f, o.trajectory);
        }
        audit_file << m.name << ": reads=" << o.audit.reads << " out_of_window=" << o.audit.out_of_window
                   << " look_ahead=" << o.audit.look_ahead << " carried_prices=" << o.trajectory.carried_prices
                   << '\n';
        for (const auto& line : o.selection.audit) audit_file << m.name << ": " << line << '\n';
        for (const auto& line : o.audit.notes) audit_file << m.name << ": " << line << '\n';
        if (o.audit.out_of_window != 0 || o.audit.look_ahead != 0) {
          throw Error(fmt::format("{}: price access outside the allowed window", m.name));
        }
        summaries.push_back(o.summary);
      }
      auto f = csv::open_output(out / "sharpe_summary.csv");
      write_backtest_summary(f, summaries);
    }

    if (config.interpret_enabled) {
      stage = "interpret";
      std::vector<ImportanceReport> reports;
      for (const auto& yc : methods.front().years) {
        auto r = interpret_clustering(yc, *by_year.at(yc.year), model, graphs.at(yc.year).graph);
        reports.insert(reports.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
      }
      {
        auto f = csv::open_output(out / "importance.csv");
        write_importance(f, reports);
      }
      {
        auto f = csv::open_output(out / "sparsity.csv");
        write_sparsity(f, reports);
      }
      const auto freq = feature_cluster_frequency(reports);
      {
        auto f = csv::open_output(out / "feature_frequency.csv");
        write_feature_frequency(f, freq);
      }
      {
        auto f = csv::open_output(out / "top_features.csv");
        f << "feature_id,clusters_important_count\n";
        for (FeatureId id : top_percentile(freq, config.top_feature_percent)) f << id << ',' << freq.at(id) << '\n';
      }
    }

    stage = "manifest";
    std::vector<std::string> artifacts;
    for (const auto& entry : fs::directory_iterator(out)) {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && name != "run.manifest") artifacts.push_back(name);
    }
    std::sort(artifacts.begin(), artifacts.end());
    auto f = csv::open_output(out / "run.manifest");
    f << "version=" << kVersion << '\n';
    f << "eigen=" << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n';
    f << "config_sha256=" << sha256_hex(rendered) << '\n';
    f << "seed=" << config.seed << '\n';
    f << "workers=" << worker_count() << '\n';
    f << "started=" << started << '\n';
    f << "finished=" << utc_now() << '\n';
    for (const auto& a : artifacts) f << "artifact." << a << '=' << file_sha256(out / a) << '\n';
  } catch (const std::exception& e) {
    auto f = csv::open_output(out / "FAILED");
    f << "stage=" << stage << '\n' << "error=" << e.what() << '\n';
    throw StageError(stage, e.what());
  }
  return out;
}

RunConfig synth_run_config(const SynthConfig& synth, const fs::path& dir) {
  RunConfig c;
  c.features = dir / "features.csv";
  c.returns = dir / "returns.csv";
  c.metadata = dir / "metadata.csv";
  c.prices = synth.with_prices ? dir / "prices.csv" : fs::path{};
  c.output = dir / "run";
  c.space = FeatureSpace{synth.feature_dim, std::min<std::size_t>(128, synth.feature_dim)};
  c.pca_components = 64;
  c.rolling_lookback = std::max(1, synth.years / 2);
  c.trading_enabled = synth.with_prices && synth.years >= 3;
  if (c.trading_enabled) {
    const int split = synth.last_year() - 1;  // last two years trade out of sample
    c.trading.in_sample = {make_date(synth.first_year, 1, 1), make_date(split - 1, 12, 31)};
    c.trading.out_of_sample = {make_date(split, 1, 1), make_date(synth.last_year(), 12, 31)};
  }
  c.seed = synth.seed;
  return c;
}

}  // namespace saefin
