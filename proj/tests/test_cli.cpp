#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "test_util.hpp"

namespace fs = std::filesystem;
using testutil::read_file;
using testutil::write_file;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

Result cli(const std::string& args, const testutil::TempDir& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const auto cmd = fmt::format("'{}' {} >'{}' 2>'{}'", SAEFIN_CLI, args, out.string(), err.string());
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::string synth(const testutil::TempDir& dir, const std::string& name = "u") {
  const auto d = (dir / name).string();
  const auto r = cli(fmt::format("synth --out '{}' --companies 40 --sectors 4 --years 4 --dim 256 --signature-size 8", d),
                     dir);
  REQUIRE(r.code == 0);
  return d;
}

std::string manifest_without_times(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("started=", 0) == 0 || line.rfind("finished=", 0) == 0 || line.rfind("workers=", 0) == 0) continue;
    out += line + '\n';
  }
  return out;
}

// Four companies, all six pairwise return correlations 0.5, in one cluster.
void four_company_fixture(const testutil::TempDir& dir) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(12, 6);
  m.col(0).setOnes();
  for (int j = 1; j < 6; ++j) {
    for (int i = 0; i < 12; ++i) m(i, j) = n01(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(12, 6);
  std::string meta = "company_id,ticker,year,sic_code\n", ret = "company_id,year,month,log_return\n",
              feat = "doc_id,feature_id,summed_activation\n", clusters = "year,cluster_id,company_id\n";
  for (int c = 0; c < 4; ++c) {
    const std::string id(1, static_cast<char>('a' + c));
    meta += fmt::format("{},{}T,2000,2834\n", id, id);
    for (int i = 0; i < 12; ++i) ret += fmt::format("{},2000,{},{:.17g}\n", id, i + 1, 0.01 * (q(i, 1) + q(i, 2 + c)));
    feat += fmt::format("{}:2000,{},1\n", id, c);
    clusters += fmt::format("2000,0,{}\n", id);
  }
  write_file(dir / "m.csv", meta);
  write_file(dir / "r.csv", ret);
  write_file(dir / "f.csv", feat);
  write_file(dir / "clusters.csv", clusters);
}

std::string overall_line(const std::string& report) {
  const auto at = report.find(",overall:");
  REQUIRE(at != std::string::npos);
  return report.substr(at, report.find('\n', at) - at);
}

}  // namespace

TEST_CASE("every subcommand has help") {
  testutil::TempDir dir;
  for (const char* sub : {"", "ingest", "features", "features sum", "features hist", "pca", "pca fit", "pca info",
                          "cluster", "calibrate", "evaluate", "backtest", "interpret", "synth", "run"}) {
    const auto r = cli(fmt::format("{} --help", sub), dir);
    CHECK_MESSAGE(r.code == 0, sub);
    CHECK_FALSE(r.out.empty());
  }
  CHECK(cli("", dir).code != 0);
  CHECK(cli("nonsense", dir).code != 0);
}

TEST_CASE("synth then run produces every artifact") {
  testutil::TempDir dir;
  const auto u = synth(dir);
  const auto r = cli(fmt::format("run --config '{}/run.yaml'", u), dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const fs::path run = fs::path(u) / "run";
  for (const char* f : {"load_report.txt", "pca.bin", "pca_variance.csv", "clusters_cd.csv", "clusters_cdr.csv",
                        "clusters_sic.csv", "clusters_bisc.csv", "calibration.csv", "rolling_series.csv",
                        "evaluation.csv", "cointegration_cd.csv", "trades_cd.csv", "trajectory_cd.csv",
                        "sharpe_summary.csv", "importance.csv", "sparsity.csv", "feature_frequency.csv",
                        "run.manifest", "run.yaml"}) {
    CHECK_MESSAGE(fs::exists(run / f), f);
  }
  CHECK_FALSE(fs::exists(run / "FAILED"));
  const auto eval = read_file(run / "evaluation.csv");
  for (const char* m : {"CD,", "CDR,", "SIC,", "BISC,"}) CHECK(eval.find(std::string("\n") + m) != std::string::npos);
}

TEST_CASE("manifest is stable across reruns") {
  testutil::TempDir dir;
  const auto u = synth(dir);
  const fs::path run = fs::path(u) / "run";
  REQUIRE(cli(fmt::format("run --config '{}/run.yaml'", u), dir).code == 0);
  const auto first = manifest_without_times(run / "run.manifest");
  const auto evaluation = read_file(run / "evaluation.csv");
  REQUIRE(cli(fmt::format("run --config '{}/run.yaml'", u), dir).code == 0);
  CHECK(manifest_without_times(run / "run.manifest") == first);
  CHECK(read_file(run / "evaluation.csv") == evaluation);
  CHECK(first.find("config_sha256=") != std::string::npos);
}

TEST_CASE("missing prices fail the backtest stage") {
  testutil::TempDir dir;
  const auto u = synth(dir);
  fs::remove(fs::path(u) / "prices.csv");
  const auto r = cli(fmt::format("run --config '{}/run.yaml'", u), dir);
  CHECK(r.code == 2);
  const fs::path run = fs::path(u) / "run";
  REQUIRE(fs::exists(run / "FAILED"));
  CHECK(read_file(run / "FAILED").rfind("stage=backtest\n", 0) == 0);
  CHECK(r.err.find("backtest") != std::string::npos);
  CHECK(fs::exists(run / "evaluation.csv"));  // earlier stages are kept
  CHECK_FALSE(fs::exists(run / "run.manifest"));
}

TEST_CASE("trading disabled writes no backtest artifacts") {
  testutil::TempDir dir;
  const auto u = synth(dir);
  auto yaml = read_file(fs::path(u) / "run.yaml");
  const auto at = yaml.find("enabled: true");
  REQUIRE(at != std::string::npos);
  REQUIRE(yaml.rfind("trading:", at) != std::string::npos);
  yaml.replace(at, 13, "enabled: false");
  write_file(fs::path(u) / "run.yaml", yaml);
  REQUIRE(cli(fmt::format("run --config '{}/run.yaml'", u), dir).code == 0);
  for (const auto& e : fs::directory_iterator(fs::path(u) / "run")) {
    const auto name = e.path().filename().string();
    for (const char* prefix : {"trades", "trajectory", "cointegration", "sharpe", "backtest"}) {
      CHECK_MESSAGE(name.rfind(prefix, 0) != 0, name);
    }
  }
}

TEST_CASE("evaluate modes differ on equal pairwise correlations") {
  testutil::TempDir dir;
  four_company_fixture(dir);
  const auto base = fmt::format("evaluate --features '{}' --returns '{}' --metadata '{}' --dim 8 --clusters '{}'",
                                (dir / "f.csv").string(), (dir / "r.csv").string(), (dir / "m.csv").string(),
                                (dir / "clusters.csv").string());
  const auto pm = cli(base + " --mode pair_mean", dir);
  REQUIRE_MESSAGE(pm.code == 0, pm.err);
  const auto pl = cli(base + " --mode paper_literal", dir);
  REQUIRE_MESSAGE(pl.code == 0, pl.err);
  CHECK(overall_line(pm.out).rfind(",overall:pair_mean,0.5", 0) == 0);
  CHECK(overall_line(pl.out).rfind(",overall:paper_literal,0.75", 0) == 0);
}

TEST_CASE("backtest subcommand reads trading settings from a config") {
  testutil::TempDir dir;
  const auto u = synth(dir);
  REQUIRE(cli(fmt::format("run --config '{}/run.yaml'", u), dir).code == 0);
  const fs::path run = fs::path(u) / "run";
  const auto out = (dir / "bt").string();
  const auto r = cli(fmt::format("backtest --clusters '{}' --method CD --config '{}/run.yaml' --out-dir '{}'",
                                 (run / "clusters_cd.csv").string(), u, out),
                     dir);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_file(fs::path(out) / "trades.csv") == read_file(run / "trades_cd.csv"));
  CHECK(read_file(fs::path(out) / "trajectory.csv") == read_file(run / "trajectory_cd.csv"));

  const auto missing = cli(fmt::format("backtest --clusters '{}' --out-dir '{}'", (run / "clusters_cd.csv").string(), out),
                           dir);
  CHECK(missing.code != 0);
}
