// Command-line front end: dataset generation, contamination, estimation,
// benchmark grids, mixture verification, and hard-instance generation.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "robustlr/bench.hpp"
#include "robustlr/rng.hpp"
#include "robustlr/robust_stats.hpp"
#include "robustlr/sq_hard.hpp"

namespace {

using namespace robustlr;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitEstimator = 1;
constexpr int kExitUsage = 2;

VectorXd random_direction(Index d, Rng& rng) {
  VectorXd v(d);
  double n2 = 0.0;
  do {
    for (Index i = 0; i < d; ++i) v(i) = rng.gaussian();
    n2 = v.squaredNorm();
  } while (n2 == 0.0);
  return v / std::sqrt(n2);
}

AdversarySpec make_adversary(const std::string& name, double eps, double shift_multiple,
                             double leverage) {
  AdversarySpec spec;
  spec.epsilon = eps;
  if (name == "none") {
    spec.kind = NoAdversary{};
  } else if (name == "adaptive-shift") {
    AdaptiveShift s;
    s.shift_multiple = shift_multiple;
    s.leverage = leverage;
    spec.kind = s;
  } else if (name == "huber") {
    HuberAdditive h;
    h.y_center = 10.0;
    h.y_std = 1.0;
    spec.kind = h;
  } else if (name == "label-flip") {
    spec.kind = LabelFlip{1.0};
  } else {
    raise(ErrorCode::ConfigError, "unknown adversary '" + name + "'");
  }
  return spec;
}

int cmd_gen(Index d, Index n, double eps, double tau, double sigma, double beta_norm,
            std::uint64_t seed, const std::string& adversary, double shift_multiple,
            double leverage, const std::string& out, const std::string& instance_out) {
  RegressionInstance instance;
  Rng rng(seed * 1099511628211ULL + 3);
  instance.beta = beta_norm * random_direction(d, rng);
  instance.sigma = sigma;
  instance.epsilon = eps;
  instance.tau = tau;
  instance.seed = seed;
  instance.validate();

  Dataset clean = generate_clean(instance, n);
  Dataset out_data = corrupt(clean, make_adversary(adversary, eps, shift_multiple, leverage),
                             seed + 7777);
  write_dataset_csv(out_data, out);
  if (!instance_out.empty()) write_instance_json(instance, instance_out);
  std::cout << "wrote " << out_data.n() << " rows (d=" << d << ", " << "eps=" << eps << ") to "
            << out << "\n";
  return kExitOk;
}

int cmd_corrupt(const std::string& in, const std::string& out, double eps, std::uint64_t seed,
                const std::string& adversary, double shift_multiple, double leverage) {
  Dataset data = read_dataset_csv(in);
  Dataset corrupted =
      corrupt(data.without_mask(), make_adversary(adversary, eps, shift_multiple, leverage), seed);
  write_dataset_csv(corrupted, out);
  std::cout << "corrupted " << static_cast<Index>(std::floor(eps * data.n())) << " of " << data.n()
            << " rows into " << out << "\n";
  return kExitOk;
}

int cmd_estimate(const std::string& in, const std::string& estimator, double eps, double tau,
                 int rounds, const std::string& instance_path, const std::string& audit_out) {
  Dataset data = read_dataset_csv(in).without_mask();

  VectorXd beta_hat;
  std::string audit;
  try {
    const EstimatorKind kind = estimator_from_name(estimator);
    switch (kind) {
      case EstimatorKind::Ols: {
        beta_hat = ols(data, -1.0);
        break;
      }
      case EstimatorKind::Basic: {
        BasicFilterConfig cfg;
        cfg.epsilon = eps;
        cfg.tau = tau;
        const auto res = estimate_basic(data, cfg);
        beta_hat = res.beta_hat;
        audit = basic_audit_json(res);
        break;
      }
      case EstimatorKind::Boosted: {
        BasicFilterConfig cfg;
        cfg.epsilon = eps;
        cfg.tau = tau;
        beta_hat = estimate_boosted(data, cfg, rounds);
        break;
      }
      case EstimatorKind::Main: {
        MainFilterConfig cfg;
        cfg.epsilon = eps;
        cfg.tau = tau;
        const auto res = estimate_main(data, cfg);
        beta_hat = res.beta_hat;
        audit = main_audit_json(res);
        break;
      }
    }
  } catch (const Error& e) {
    std::cerr << "estimator failed: " << e.what() << "\n";
    return kExitEstimator;
  }

  std::cout << "beta_hat =";
  for (Index i = 0; i < beta_hat.size(); ++i) std::printf(" %.17g", beta_hat(i));
  std::cout << "\n";
  if (!instance_path.empty()) {
    const RegressionInstance instance = read_instance_json(instance_path);
    std::printf("ell2_error = %.17g\n", ell2_error(beta_hat, instance.beta));
  }
  if (!audit_out.empty() && !audit.empty()) {
    std::ofstream f(audit_out, std::ios::binary);
    if (!f) raise(ErrorCode::IoError, "cannot open " + audit_out);
    f << audit << "\n";
  }
  return kExitOk;
}

int cmd_bench(const std::string& config_path) {
  ExperimentConfig cfg = experiment_config_from_json_file(config_path);
  const ExperimentReport report = run_experiment(cfg);
  std::string dir = cfg.output_dir.empty() ? "bench_out" : cfg.output_dir;
  std::filesystem::create_directories(dir);
  const std::string run = dir + "/run_seed" + std::to_string(cfg.seed);
  std::filesystem::create_directories(run);
  write_report_csv(report, run + "/report.csv");
  write_report_summary_json(report, run + "/summary.json");
  std::cout << "wrote " << report.rows.size() << " rows to " << run << "/report.csv\n";
  return kExitOk;
}

int cmd_verify_moments(double tol, const std::string& report_out) {
  double worst = 0.0;
  json rows = json::array();
  const std::vector<double> eps_grid = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> mu_grid;
  for (double mu = -3.0; mu <= 3.0 + 1e-12; mu += 0.15) mu_grid.push_back(mu);
  mu_grid.push_back(0.0);
  for (double eps : eps_grid) {
    mu_grid.push_back(std::sqrt(eps) / 20000.0);  // P4 branch
    for (double mu : mu_grid) {
      const auto [mix, eps_mu] = a_mu(mu, eps);
      const auto m = mix.moments();
      const double dev =
          std::max({std::abs(m[0]), std::abs(m[1] - 1.0), std::abs(m[2])});
      worst = std::max(worst, dev);
      std::vector<double> weights, means, variances;
      for (const auto& c : mix.components) {
        weights.push_back(c.weight);
        means.push_back(c.mean);
        variances.push_back(c.variance);
      }
      rows.push_back({{"mu", mu},
                      {"eps", eps},
                      {"eps_mu", eps_mu},
                      {"max_moment_deviation", dev},
                      {"weights", weights},
                      {"means", means},
                      {"variances", variances}});
    }
  }
  std::printf("max |moment deviation| over %zu mixtures = %.3e\n", rows.size(), worst);
  if (!report_out.empty()) {
    std::ofstream f(report_out, std::ios::binary);
    if (!f) raise(ErrorCode::IoError, "cannot open " + report_out);
    f << json{{"max_deviation", worst}, {"mixtures", rows}}.dump(2) << "\n";
  }
  return worst <= tol ? kExitOk : kExitEstimator;
}

int cmd_sqgen(Index d, Index n, double eps, double c1, std::uint64_t seed, const std::string& out,
              const std::string& answer_out) {
  HardInstanceSpec spec;
  Rng rng(seed * 6364136223846793005ULL + 1);
  spec.v = random_direction(d, rng);
  spec.epsilon = eps;
  spec.c1 = c1;
  spec.seed = seed;
  spec.validate();

  Dataset data = hard_instance(spec, n, seed);
  write_dataset_csv(data, out);
  if (!answer_out.empty()) {
    json j;
    const VectorXd beta = spec.beta();
    j["v"] = std::vector<double>(spec.v.data(), spec.v.data() + spec.v.size());
    j["beta"] = std::vector<double>(beta.data(), beta.data() + beta.size());
    j["sigma"] = spec.sigma();
    j["epsilon"] = spec.epsilon;
    j["c1"] = spec.c1;
    j["c2"] = spec.c2();
    j["seed"] = spec.seed;
    j["covariance_kind"] = "diagonal-spiked";
    std::ofstream f(answer_out, std::ios::binary);
    if (!f) raise(ErrorCode::IoError, "cannot open " + answer_out);
    f << j.dump(2) << "\n";
  }
  std::cout << "wrote " << n << " hard-instance rows to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust linear regression filters, adversaries, and benchmarks"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a (possibly corrupted) synthetic dataset");
  Index gen_d = 5, gen_n = 100;
  double gen_eps = 0.1, gen_tau = 0.1, gen_sigma = 1.0, gen_beta_norm = 5.0;
  double gen_shift = 3.0, gen_lev = 1.0;
  std::uint64_t gen_seed = 1;
  std::string gen_adv = "adaptive-shift", gen_out = "dataset.csv", gen_inst = "instance.json";
  gen->add_option("--d", gen_d, "dimension");
  gen->add_option("--n", gen_n, "sample count");
  gen->add_option("--eps", gen_eps, "corruption fraction");
  gen->add_option("--tau", gen_tau, "failure probability");
  gen->add_option("--sigma", gen_sigma, "noise std-dev");
  gen->add_option("--beta-norm", gen_beta_norm, "norm of the true beta");
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--adversary", gen_adv, "none|adaptive-shift|huber|label-flip");
  gen->add_option("--shift-multiple", gen_shift, "adaptive shift target in sigma_y units");
  gen->add_option("--leverage", gen_lev, "adaptive shift covariate radius");
  gen->add_option("--out", gen_out, "dataset CSV path");
  gen->add_option("--instance-out", gen_inst, "instance JSON path ('' to skip)");

  // corrupt
  auto* cor = app.add_subcommand("corrupt", "apply an adversary to an existing dataset");
  std::string cor_in, cor_out = "corrupted.csv", cor_adv = "adaptive-shift";
  double cor_eps = 0.1, cor_shift = 3.0, cor_lev = 1.0;
  std::uint64_t cor_seed = 1;
  cor->add_option("--in", cor_in, "input dataset CSV")->required();
  cor->add_option("--out", cor_out, "output dataset CSV");
  cor->add_option("--eps", cor_eps, "corruption fraction");
  cor->add_option("--seed", cor_seed, "seed");
  cor->add_option("--adversary", cor_adv, "none|adaptive-shift|huber|label-flip");
  cor->add_option("--shift-multiple", cor_shift, "adaptive shift target");
  cor->add_option("--leverage", cor_lev, "adaptive shift covariate radius");

  // estimate
  auto* est = app.add_subcommand("estimate", "run an estimator on a dataset");
  std::string est_in, est_name = "main", est_inst, est_audit;
  double est_eps = 0.1, est_tau = 0.1;
  int est_rounds = 5;
  est->add_option("--in", est_in, "dataset CSV")->required();
  est->add_option("--estimator", est_name, "ols|basic|boosted|main");
  est->add_option("--eps", est_eps, "corruption fraction");
  est->add_option("--tau", est_tau, "failure probability");
  est->add_option("--rounds", est_rounds, "boosting rounds");
  est->add_option("--instance", est_inst, "instance JSON for error reporting");
  est->add_option("--audit-out", est_audit, "write the iteration audit JSON here");

  // bench
  auto* ben = app.add_subcommand("bench", "run a benchmark grid from a JSON config");
  std::string ben_cfg;
  ben->add_option("--config", ben_cfg, "experiment config JSON")->required();

  // verify-moments
  auto* ver = app.add_subcommand("verify-moments", "check mixture constructors on a grid");
  double ver_tol = 1e-9;
  std::string ver_out;
  ver->add_option("--tol", ver_tol, "maximum allowed moment deviation");
  ver->add_option("--report-out", ver_out, "write the per-mixture report JSON here");

  // sqgen
  auto* sq = app.add_subcommand("sqgen", "generate a hidden-direction hard instance");
  Index sq_d = 10, sq_n = 50000;
  double sq_eps = 0.1, sq_c1 = 0.1;
  std::uint64_t sq_seed = 1;
  std::string sq_out = "hard.csv", sq_ans = "answer.json";
  sq->add_option("--d", sq_d, "dimension");
  sq->add_option("--n", sq_n, "sample count");
  sq->add_option("--eps", sq_eps, "contamination fraction");
  sq->add_option("--c1", sq_c1, "beta scale, in (0, 1/10]");
  sq->add_option("--seed", sq_seed, "seed");
  sq->add_option("--out", sq_out, "dataset CSV path");
  sq->add_option("--answer-out", sq_ans, "hidden-direction answer JSON ('' to skip)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed())
      return cmd_gen(gen_d, gen_n, gen_eps, gen_tau, gen_sigma, gen_beta_norm, gen_seed, gen_adv,
                     gen_shift, gen_lev, gen_out, gen_inst);
    if (cor->parsed())
      return cmd_corrupt(cor_in, cor_out, cor_eps, cor_seed, cor_adv, cor_shift, cor_lev);
    if (est->parsed())
      return cmd_estimate(est_in, est_name, est_eps, est_tau, est_rounds, est_inst, est_audit);
    if (ben->parsed()) return cmd_bench(ben_cfg);
    if (ver->parsed()) return cmd_verify_moments(ver_tol, ver_out);
    if (sq->parsed()) return cmd_sqgen(sq_d, sq_n, sq_eps, sq_c1, sq_seed, sq_out, sq_ans);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::IoError:
      case ErrorCode::ConfigError:
      case ErrorCode::EpsilonTooLarge:
      case ErrorCode::EpsOutOfRange:
        return kExitUsage;
      default:
        return kExitEstimator;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimator;
  }
  return kExitUsage;
}
