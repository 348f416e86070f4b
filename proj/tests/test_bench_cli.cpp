#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "robustlr/bench.hpp"
#include "robustlr/robust_stats.hpp"
#include "robustlr/rng.hpp"

using namespace robustlr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "robustlr_test";
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("ROBUSTLR_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "ROBUSTLR_CLI must point at the CLI binary");
  const std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("dataset CSV round-trips bit-identically") {
  Rng rng(15);
  MatrixXd xs(37, 3);
  VectorXd ys(37);
  for (Index i = 0; i < 37; ++i) {
    for (Index j = 0; j < 3; ++j) xs(i, j) = rng.gaussian() * std::pow(10.0, rng.uniform(-8, 8));
    ys(i) = rng.gaussian();
  }
  std::vector<std::uint8_t> mask(37, 0);
  mask[5] = 1;
  const Dataset data(xs, ys, mask);

  const fs::path p = temp_dir() / "roundtrip.csv";
  write_dataset_csv(data, p.string());
  const Dataset back = read_dataset_csv(p.string());
  REQUIRE(back.n() == data.n());
  REQUIRE(back.dim() == data.dim());
  CHECK(back.xs() == data.xs());  // bit-identical
  CHECK(back.ys() == data.ys());
  CHECK(back.is_outlier(5));
  CHECK_FALSE(back.is_outlier(6));

  // Re-writing the parsed dataset reproduces the file byte for byte.
  const fs::path p2 = temp_dir() / "roundtrip2.csv";
  write_dataset_csv(back, p2.string());
  CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("dataset CSV uses LF endings and the documented header") {
  MatrixXd xs(1, 2);
  xs << 1.5, -2.5;
  VectorXd ys(1);
  ys << 3.5;
  const fs::path p = temp_dir() / "header.csv";
  write_dataset_csv(Dataset(xs, ys), p.string());
  const std::string content = slurp(p);
  CHECK(content.find("x_0,x_1,y\n") == 0);
  CHECK(content.find('\r') == std::string::npos);
}

TEST_CASE("instance JSON round-trip") {
  RegressionInstance inst;
  inst.beta = VectorXd::LinSpaced(4, -1.0, 2.0);
  inst.sigma = 0.5;
  inst.epsilon = 0.15;
  inst.tau = 0.05;
  inst.seed = 987654321;
  DiagonalSpikedCovariance spike;
  spike.direction = VectorXd::Unit(4, 1);
  spike.c2 = 0.25;
  inst.covariance = spike;

  const fs::path p = temp_dir() / "instance.json";
  write_instance_json(inst, p.string());
  const RegressionInstance back = read_instance_json(p.string());
  CHECK(back.beta == inst.beta);
  CHECK(back.sigma == inst.sigma);
  CHECK(back.epsilon == inst.epsilon);
  CHECK(back.seed == inst.seed);
  const auto* s = std::get_if<DiagonalSpikedCovariance>(&back.covariance);
  REQUIRE(s != nullptr);
  CHECK(s->c2 == 0.25);
}

TEST_CASE("run_experiment: accounting identity and reproducibility") {
  ExperimentConfig cfg;
  cfg.epsilons = {0.1};
  cfg.dims = {8};
  cfg.ns = {3000};
  cfg.beta_norms = {3.0};
  cfg.estimators = {EstimatorKind::Ols, EstimatorKind::Main};
  cfg.trials = 3;
  cfg.seed = 42;

  const ExperimentReport a = run_experiment(cfg);
  REQUIRE(a.rows.size() == 6);
  for (const auto& row : a.rows) {
    CHECK(row.status == "ok");
    if (row.estimator == EstimatorKind::Main) {
      Index clean = 0, corrupt = 0;
      for (const auto& ev : row.events) {
        clean += ev.removed_clean;
        corrupt += ev.removed_corrupt;
      }
      CHECK(clean == row.removed_clean);
      CHECK(corrupt == row.removed_corrupt);
      CHECK(row.delta_final <= row.delta_initial);
    }
  }

  // Identical config reproduces identical numeric columns.
  const ExperimentReport b = run_experiment(cfg);
  REQUIRE(b.rows.size() == a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].error == b.rows[i].error);
    CHECK(a.rows[i].removed_clean == b.rows[i].removed_clean);
    CHECK(a.rows[i].removed_corrupt == b.rows[i].removed_corrupt);
  }

  const fs::path csv = temp_dir() / "report.csv";
  const fs::path summary = temp_dir() / "summary.json";
  write_report_csv(a, csv.string());
  write_report_summary_json(a, summary.string());
  CHECK(slurp(csv).find("eps,d,n,beta_norm,trial,estimator") == 0);
  CHECK(slurp(summary).find("median_error") != std::string::npos);
}

TEST_CASE("run_experiment rejects empty estimator sets") {
  ExperimentConfig cfg;
  cfg.estimators.clear();
  CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("ConfigError"), Error);
}

TEST_CASE("run_experiment results do not depend on the thread cap") {
  ExperimentConfig cfg;
  cfg.epsilons = {0.1};
  cfg.dims = {6};
  cfg.ns = {2000};
  cfg.beta_norms = {2.0};
  cfg.estimators = {EstimatorKind::Main};
  cfg.trials = 4;
  cfg.seed = 77;

  setenv("ROBUSTLR_THREADS", "1", 1);
  const ExperimentReport serial = run_experiment(cfg);
  setenv("ROBUSTLR_THREADS", "4", 1);
  const ExperimentReport parallel = run_experiment(cfg);
  unsetenv("ROBUSTLR_THREADS");
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i)
    CHECK(serial.rows[i].error == parallel.rows[i].error);
}

TEST_CASE("condition reports serialize with pass/measured/threshold per condition") {
  ConditionReport report;
  report.conditions.push_back({"iii_mean", true, 0.02, 0.5});
  report.conditions.push_back({"iv_cov", false, 1.7, 0.5});
  const std::string j = condition_report_json(report);
  CHECK(j.find("\"iii_mean\"") != std::string::npos);
  CHECK(j.find("\"measured\"") != std::string::npos);
  CHECK(j.find("\"threshold\"") != std::string::npos);
  CHECK(j.find("\"all_pass\": false") != std::string::npos);
}

TEST_CASE("cli: gen writes the expected CSV and is deterministic") {
  const fs::path out = temp_dir() / "gen.csv";
  const fs::path inst = temp_dir() / "gen_instance.json";
  const std::string args = "gen --d 5 --n 100 --eps 0.1 --seed 7 --out " + out.string() +
                           " --instance-out " + inst.string();
  REQUIRE(run_cli(args) == 0);
  const Dataset data = read_dataset_csv(out.string());
  CHECK(data.n() == 100);
  CHECK(data.dim() == 5);
  Index masked = 0;
  for (Index i = 0; i < data.n(); ++i)
    if (data.is_outlier(i)) ++masked;
  CHECK(masked == 10);

  const std::string first = slurp(out);
  REQUIRE(run_cli(args) == 0);
  CHECK(slurp(out) == first);  // byte-identical regeneration

  CHECK(run_cli("gen --d 5 --n 100 --eps 0.6 --out " + out.string()) == 2);
}

TEST_CASE("cli: estimate on clean noiseless data reports near-zero error") {
  const fs::path out = temp_dir() / "noiseless.csv";
  const fs::path inst = temp_dir() / "noiseless_instance.json";
  REQUIRE(run_cli("gen --d 4 --n 400 --eps 0 --sigma 0 --adversary none --seed 3 --out " +
                  out.string() + " --instance-out " + inst.string()) == 0);
  const char* cli = std::getenv("ROBUSTLR_CLI");
  const std::string cmd = std::string(cli) + " estimate --in " + out.string() +
                          " --estimator main --eps 0 --instance " + inst.string() +
                          " > " + (temp_dir() / "est.txt").string() + " 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  const std::string text = slurp(temp_dir() / "est.txt");
  const auto pos = text.find("ell2_error = ");
  REQUIRE(pos != std::string::npos);
  const double err = std::stod(text.substr(pos + 13));
  CHECK(err <= 1e-6);
}

TEST_CASE("cli: missing input file exits with the IO code") {
  CHECK(run_cli("estimate --in /nonexistent/nowhere.csv --estimator main") == 2);
}

TEST_CASE("cli: verify-moments passes at the 1e-9 gate") {
  CHECK(run_cli("verify-moments --tol 1e-9") == 0);
}

TEST_CASE("cli: sqgen rejects c1 beyond 1/10 and writes an answer file") {
  const fs::path out = temp_dir() / "hard.csv";
  const fs::path ans = temp_dir() / "answer.json";
  CHECK(run_cli("sqgen --d 4 --n 200 --eps 0.1 --c1 0.2 --out " + out.string()) == 2);
  REQUIRE(run_cli("sqgen --d 4 --n 500 --eps 0.1 --c1 0.1 --seed 5 --out " + out.string() +
                  " --answer-out " + ans.string()) == 0);
  CHECK(read_dataset_csv(out.string()).n() == 500);
  CHECK(slurp(ans).find("\"v\"") != std::string::npos);
}

TEST_CASE("cli: bench runs a tiny grid end to end") {
  const fs::path cfg_path = temp_dir() / "bench_cfg.json";
  const fs::path out_dir = temp_dir() / "bench_out";
  {
    std::ofstream f(cfg_path);
    f << R"({"epsilons":[0.05,0.1],"dims":[5],"ns":[1500],"beta_norms":[2.0],)"
      << R"("estimators":["ols","main"],"trials":2,"seed":9,)"
      << R"("adversary":"adaptive-shift","output_dir":")" << out_dir.string() << R"("})";
  }
  REQUIRE(run_cli("bench --config " + cfg_path.string()) == 0);
  CHECK(fs::exists(out_dir / "run_seed9" / "report.csv"));
  CHECK(fs::exists(out_dir / "run_seed9" / "summary.json"));
}
