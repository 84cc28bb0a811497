// Command-line front end: one subcommand per pipeline stage plus `run`.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "saefin/csv.hpp"
#include "saefin/pipeline.hpp"

namespace fs = std::filesystem;
using namespace saefin;

namespace {

struct PanelOptions {
  std::string features, returns, metadata;
  std::string format = "summed";
  std::size_t dim = 131072;
  std::size_t k_active = 128;
  bool raw_returns = false;
  int min_history = 1;

  void add(CLI::App* app, bool required = true) {
    app->add_option("--features", features, "summed or token feature CSV")->required(required);
    app->add_option("--returns", returns, "monthly returns CSV")->required(required);
    app->add_option("--metadata", metadata, "company metadata CSV")->required(required);
    app->add_option("--format", format, "feature file format")->check(CLI::IsMember({"summed", "tokens"}));
    app->add_option("--dim", dim, "feature space dimension");
    app->add_option("--k-active", k_active, "max active features per token");
    app->add_flag("--raw-returns", raw_returns, "returns are simple, apply log(1+r)");
    app->add_option("--min-history", min_history, "drop companies with fewer panel years");
  }

  RunConfig config() const {
    RunConfig c;
    c.features = features;
    c.returns = returns;
    c.metadata = metadata;
    c.features_format = format == "tokens" ? FeatureFormat::Tokens : FeatureFormat::Summed;
    c.space = {dim, k_active};
    c.raw_returns = raw_returns;
    c.min_history = min_history;
    return c;
  }

  LoadedCorpus load() const { return ingest(config()); }
};

struct WindowOptions {
  std::string is_start = "2002-01-01", is_end = "2013-12-31";
  std::string oos_start = "2014-01-01", oos_end = "2020-12-31";
  TradingConfig base;

  void add(CLI::App* app) {
    app->add_option("--in-sample-start", is_start);
    app->add_option("--in-sample-end", is_end);
    app->add_option("--out-of-sample-start", oos_start);
    app->add_option("--out-of-sample-end", oos_end);
    app->add_option("--preselect", base.preselect_corr_min, "min in-sample return correlation");
    app->add_option("--p-max", base.coint_p_max, "cointegration p-value cut-off");
    app->add_option("--entry", base.entry_band, "entry band in spread sd");
    app->add_option("--stop", base.stop_band, "stop-loss band in spread sd");
    app->add_option("--cost", base.transaction_cost, "proportional transaction cost");
  }

  TradingConfig config() const {
    TradingConfig t = base;
    t.in_sample = {parse_date(is_start), parse_date(is_end)};
    t.out_of_sample = {parse_date(oos_start), parse_date(oos_end)};
    t.validate();
    return t;
  }
};

std::vector<SummedFeatureVector> load_features(const std::string& path, const std::string& format,
                                               const FeatureSpace& space) {
  if (format == "tokens") return sum_documents(load_token_activations(path, space), space);
  return load_summed_features(path, space);
}

/// Output stream: a file when a path is given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) file_.emplace(csv::open_output(path));
  }
  std::ostream& get() { return file_ ? static_cast<std::ostream&>(*file_) : std::cout; }

 private:
  std::optional<std::ofstream> file_;
};

std::vector<YearClustering> load_method_clusters(const std::string& path, const std::string& method) {
  return read_clusters(path, parse_cluster_method(method));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-feature company clustering, evaluation and pairs trading"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // ingest
  PanelOptions ingest_opts;
  std::string ingest_report;
  auto* ingest_cmd = app.add_subcommand("ingest", "Load and validate the panel; print the load report");
  ingest_opts.add(ingest_cmd);
  ingest_cmd->add_option("--report", ingest_report, "write the report here instead of stdout");

  // features
  auto* features_cmd = app.add_subcommand("features", "Feature summing and histograms");
  features_cmd->require_subcommand(1);
  std::string sum_tokens, sum_out;
  FeatureSpace sum_space;
  auto* sum_cmd = features_cmd->add_subcommand("sum", "Sum token activations per document");
  sum_cmd->add_option("--tokens", sum_tokens)->required();
  sum_cmd->add_option("--out", sum_out)->required();
  sum_cmd->add_option("--dim", sum_space.dim);
  sum_cmd->add_option("--k-active", sum_space.k_active);
  std::string hist_features, hist_format = "summed", hist_out;
  FeatureSpace hist_space;
  double bin_width = 1.0, clip_max = 50.0;
  auto* hist_cmd = features_cmd->add_subcommand("hist", "Histogram of summed activation values");
  hist_cmd->add_option("--features", hist_features)->required();
  hist_cmd->add_option("--format", hist_format)->check(CLI::IsMember({"summed", "tokens"}));
  hist_cmd->add_option("--dim", hist_space.dim);
  hist_cmd->add_option("--k-active", hist_space.k_active);
  hist_cmd->add_option("--bin-width", bin_width);
  hist_cmd->add_option("--clip-max", clip_max);
  hist_cmd->add_option("--out", hist_out);

  // pca
  auto* pca_cmd = app.add_subcommand("pca", "Fit or inspect the projection");
  pca_cmd->require_subcommand(1);
  std::string fit_features, fit_format = "summed", fit_out, fit_variance;
  FeatureSpace fit_space;
  std::size_t fit_components = 4000;
  auto* fit_cmd = pca_cmd->add_subcommand("fit", "Fit over every document in a feature file");
  fit_cmd->add_option("--features", fit_features)->required();
  fit_cmd->add_option("--format", fit_format)->check(CLI::IsMember({"summed", "tokens"}));
  fit_cmd->add_option("--dim", fit_space.dim);
  fit_cmd->add_option("--k-active", fit_space.k_active);
  fit_cmd->add_option("--components", fit_components, "capped at min(#documents, dim)");
  fit_cmd->add_option("--out", fit_out, "binary model path")->required();
  fit_cmd->add_option("--variance", fit_variance, "variance table CSV");
  std::string info_model;
  auto* info_cmd = pca_cmd->add_subcommand("info", "Print a model's variance table");
  info_cmd->add_option("--model", info_model)->required()->check(CLI::ExistingFile);

  // cluster
  std::string cl_features, cl_format = "summed", cl_model, cl_out, cl_edges;
  FeatureSpace cl_space;
  double cl_theta = -3.0;
  auto* cluster_cmd = app.add_subcommand("cluster", "Per-year MST clusters at a cut-off");
  cluster_cmd->add_option("--features", cl_features)->required();
  cluster_cmd->add_option("--format", cl_format)->check(CLI::IsMember({"summed", "tokens"}));
  cluster_cmd->add_option("--dim", cl_space.dim);
  cluster_cmd->add_option("--k-active", cl_space.k_active);
  cluster_cmd->add_option("--model", cl_model)->required()->check(CLI::ExistingFile);
  cluster_cmd->add_option("--theta", cl_theta, "cut-off in standardized units");
  cluster_cmd->add_option("--out", cl_out)->required();
  cluster_cmd->add_option("--edges", cl_edges, "also write every edge");

  // calibrate
  PanelOptions cal_opts;
  std::string cal_model, cal_variant = "both", cal_mode = "pair_mean", cal_out, cal_series;
  ThetaGrid cal_grid;
  int cal_lookback = 5;
  auto* cal_cmd = app.add_subcommand("calibrate", "Choose the MST cut-off");
  cal_opts.add(cal_cmd);
  cal_cmd->add_option("--model", cal_model)->required()->check(CLI::ExistingFile);
  cal_cmd->add_option("--variant", cal_variant)->check(CLI::IsMember({"fixed", "rolling", "both"}));
  cal_cmd->add_option("--mode", cal_mode)->check(CLI::IsMember({"pair_mean", "paper_literal"}));
  cal_cmd->add_option("--theta-start", cal_grid.start);
  cal_cmd->add_option("--theta-stop", cal_grid.stop);
  cal_cmd->add_option("--theta-step", cal_grid.step);
  cal_cmd->add_option("--lookback", cal_lookback);
  cal_cmd->add_option("--out", cal_out);
  cal_cmd->add_option("--series", cal_series, "rolling year,theta_star,mc_oos CSV");

  // evaluate
  PanelOptions ev_opts;
  std::string ev_clusters, ev_method = "external", ev_mode = "pair_mean", ev_out;
  auto* ev_cmd = app.add_subcommand("evaluate", "Mean intra-cluster correlation of a clusters file");
  ev_opts.add(ev_cmd);
  ev_cmd->add_option("--clusters", ev_clusters)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--method", ev_method, "method tag for the report");
  ev_cmd->add_option("--mode", ev_mode)->check(CLI::IsMember({"pair_mean", "paper_literal"}));
  ev_cmd->add_option("--out", ev_out);

  // backtest
  PanelOptions bt_opts;
  WindowOptions bt_window;
  std::string bt_clusters, bt_method = "CD", bt_prices, bt_out, bt_config;
  std::optional<int> bt_year;
  auto* bt_cmd = app.add_subcommand("backtest", "Pairs trading on one year's clusters");
  bt_opts.add(bt_cmd, false);
  bt_cmd->add_option("--config", bt_config, "run YAML; supplies trading settings and missing input paths")
      ->check(CLI::ExistingFile);
  bt_window.add(bt_cmd);
  bt_cmd->add_option("--clusters", bt_clusters)->required()->check(CLI::ExistingFile);
  bt_cmd->add_option("--method", bt_method);
  bt_cmd->add_option("--year", bt_year, "clustering year (default: last in-sample year)");
  bt_cmd->add_option("--prices", bt_prices);
  bt_cmd->add_option("--out-dir", bt_out)->required();

  // interpret
  PanelOptions in_opts;
  std::string in_model, in_clusters, in_out;
  double in_percent = 1.0;
  auto* in_cmd = app.add_subcommand("interpret", "Feature importance and sparsity per cluster");
  in_opts.add(in_cmd);
  in_cmd->add_option("--model", in_model)->required()->check(CLI::ExistingFile);
  in_cmd->add_option("--clusters", in_clusters)->required()->check(CLI::ExistingFile);
  in_cmd->add_option("--top-percent", in_percent);
  in_cmd->add_option("--out-dir", in_out)->required();

  // synth
  SynthConfig sy;
  std::string sy_out;
  auto* sy_cmd = app.add_subcommand("synth", "Write a synthetic universe and a matching run.yaml");
  sy_cmd->add_option("--out", sy_out)->required();
  sy_cmd->add_option("--seed", sy.seed);
  sy_cmd->add_option("--companies", sy.n_companies);
  sy_cmd->add_option("--sectors", sy.n_sectors);
  sy_cmd->add_option("--first-year", sy.first_year);
  sy_cmd->add_option("--years", sy.years);
  sy_cmd->add_option("--dim", sy.feature_dim);
  sy_cmd->add_option("--signature-size", sy.signature_size);
  sy_cmd->add_option("--signature-noise", sy.signature_noise);
  sy_cmd->add_option("--factor-vol", sy.factor_vol);
  sy_cmd->add_option("--idio-vol", sy.idio_vol);
  sy_cmd->add_option("--pairs-per-sector", sy.pairs_per_sector);
  sy_cmd->add_flag("--tokens", sy.keep_tokens, "also write per-token activations");

  // run
  std::string run_config;
  auto* run_cmd = app.add_subcommand("run", "Run every stage from a YAML config");
  run_cmd->add_option("--config", run_config)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_cmd) {
      const auto corpus = ingest_opts.load();
      Sink sink(ingest_report);
      sink.get() << corpus.report.to_text();
    } else if (*sum_cmd) {
      sum_space.validate();
      const auto docs = sum_documents(load_token_activations(sum_tokens, sum_space), sum_space);
      auto out = csv::open_output(sum_out);
      write_summed_features(out, docs);
    } else if (*hist_cmd) {
      hist_space.validate();
      const auto docs = load_features(hist_features, hist_format, hist_space);
      Sink sink(hist_out);
      write_histogram(sink.get(), activation_histogram(docs, bin_width, clip_max));
    } else if (*fit_cmd) {
      fit_space.validate();
      const auto docs = load_features(fit_features, fit_format, fit_space);
      const auto fit = fit_pca(docs, std::min({fit_components, docs.size(), fit_space.dim}));
      for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
      fit.model.save(fit_out);
      if (!fit_variance.empty()) {
        auto out = csv::open_output(fit_variance);
        write_variance_table(out, fit.model);
      }
    } else if (*info_cmd) {
      const auto model = PcaModel::load(info_model);
      std::cout << "dim=" << model.dim() << " components=" << model.n_components() << '\n';
      write_variance_table(std::cout, model);
    } else if (*cluster_cmd) {
      cl_space.validate();
      const auto model = PcaModel::load(cl_model);
      std::map<int, YearPanel> panels;
      for (auto& v : load_features(cl_features, cl_format, cl_space)) {
        const auto key = parse_doc_id(v.doc_id());
        panels[key.year].year = key.year;
        panels[key.year].summed_features.emplace(key.company_id, std::move(v));
      }
      std::vector<YearPanel> list;
      for (auto& [_, p] : panels) list.push_back(std::move(p));
      const auto graphs = build_year_graphs(list, model);
      std::vector<YearClustering> out;
      std::optional<std::ofstream> edges;
      if (!cl_edges.empty()) edges.emplace(csv::open_output(cl_edges));
      bool header = true;
      for (const auto& [year, yg] : graphs) {
        out.push_back(cut_mst(yg.mst, cl_theta));
        if (edges) {
          write_edges(*edges, yg.graph, header);
          header = false;
        }
      }
      write_clusters(cl_out, out);
    } else if (*cal_cmd) {
      const auto corpus = cal_opts.load();
      const auto model = PcaModel::load(cal_model);
      const auto graphs = build_year_graphs(corpus.panels, model);
      const auto by_year = index_panels(corpus.panels);
      std::vector<CalibrationYear> years;
      for (const auto& [year, yg] : graphs) years.push_back({year, yg.mst, &by_year.at(year)->returns});
      ThetaScorer scorer(std::move(years), parse_mc_mode(cal_mode));
      std::vector<CalibrationResult> results;
      if (cal_variant != "rolling") {
        results.push_back(calibrate_fixed(cal_grid, scorer));
        std::cerr << "theta*=" << csv::fmt_double(*results.back().theta_star) << '\n';
      }
      if (cal_variant != "fixed") {
        results.push_back(calibrate_rolling(cal_grid, scorer, cal_lookback));
        if (!cal_series.empty()) {
          auto out = csv::open_output(cal_series);
          write_rolling_series(out, results.back());
        }
      }
      Sink sink(cal_out);
      write_calibration(sink.get(), results);
    } else if (*ev_cmd) {
      const auto corpus = ev_opts.load();
      const auto clusters = read_clusters(ev_clusters);
      const std::vector<EvaluationReport> reports{
          evaluate_clusterings(ev_method, clusters, corpus.panels, parse_mc_mode(ev_mode))};
      Sink sink(ev_out);
      write_evaluation(sink.get(), reports);
    } else if (*bt_cmd) {
      std::optional<RunConfig> run;
      if (!bt_config.empty()) run = load_run_config(bt_config);
      const bool panel_given = !bt_opts.features.empty() || !bt_opts.returns.empty() || !bt_opts.metadata.empty();
      if (panel_given && (bt_opts.features.empty() || bt_opts.returns.empty() || bt_opts.metadata.empty())) {
        throw InputError("--features, --returns and --metadata go together");
      }
      if (!panel_given && !run) throw InputError("give --features/--returns/--metadata or --config");
      const auto corpus = panel_given ? bt_opts.load() : ingest(*run);
      const auto trading = run ? run->trading : bt_window.config();
      if (bt_prices.empty() && run) bt_prices = run->prices.string();
      if (bt_prices.empty()) throw InputError("no prices file: give --prices or a config with one");
      const int year = bt_year.value_or(trading.in_sample.last_year());
      const auto clusters = load_method_clusters(bt_clusters, bt_method);
      auto it = std::find_if(clusters.begin(), clusters.end(), [&](const auto& yc) { return yc.year == year; });
      if (it == clusters.end()) throw InputError(fmt::format("{}: no clustering for {}", bt_clusters, year));
      const auto prices = load_prices(bt_prices);
      const auto o = run_backtest(bt_method, *it, corpus.panels, prices, trading);
      const fs::path dir = bt_out;
      {
        auto out = csv::open_output(dir / "cointegration.csv");
        write_cointegration(out, o.selection.tested);
      }
      {
        auto out = csv::open_output(dir / "trades.csv");
        write_trade_log(out, o.logs);
      }
      {
        auto out = csv::open_output(dir / "trajectory.csv");
        write_trajectory(out, o.trajectory);
      }
      auto out = csv::open_output(dir / "sharpe_summary.csv");
      const std::vector<BacktestSummary> rows{o.summary};
      write_backtest_summary(out, rows);
      for (const auto& line : o.selection.audit) std::cerr << line << '\n';
      if (o.audit.out_of_window != 0 || o.audit.look_ahead != 0) throw Error("price access outside the window");
    } else if (*in_cmd) {
      const auto corpus = in_opts.load();
      const auto model = PcaModel::load(in_model);
      const auto graphs = build_year_graphs(corpus.panels, model);
      const auto by_year = index_panels(corpus.panels);
      std::vector<ImportanceReport> reports;
      for (const auto& yc : read_clusters(in_clusters, ClusterMethod::CD)) {
        auto p = by_year.find(yc.year);
        if (p == by_year.end()) throw InputError(fmt::format("no panel for clusters year {}", yc.year));
        auto r = interpret_clustering(yc, *p->second, model, graphs.at(yc.year).graph);
        reports.insert(reports.end(), r.begin(), r.end());
      }
      const fs::path dir = in_out;
      {
        auto out = csv::open_output(dir / "importance.csv");
        write_importance(out, reports);
      }
      {
        auto out = csv::open_output(dir / "sparsity.csv");
        write_sparsity(out, reports);
      }
      const auto freq = feature_cluster_frequency(reports);
      {
        auto out = csv::open_output(dir / "feature_frequency.csv");
        write_feature_frequency(out, freq);
      }
      if (!reports.empty()) {
        const auto s = sparsity_distribution(reports);
        std::cerr << "median sparsity ratio=" << csv::fmt_double(s.median) << '\n';
        std::cerr << "top features:";
        for (FeatureId f : top_percentile(freq, in_percent)) std::cerr << ' ' << f;
        std::cerr << '\n';
      }
    } else if (*sy_cmd) {
      const auto universe = generate_universe(sy);
      write_universe(sy_out, universe);
      auto out = csv::open_output(fs::path(sy_out) / "run.yaml");
      out << render_run_config(synth_run_config(sy, ""));
    } else if (*run_cmd) {
      const auto config = load_run_config(run_config);
      const auto dir = run_pipeline(config);
      std::cerr << "artifacts in " << dir.string() << '\n';
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
