#include "robustlr/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <thread>

#include "robustlr/rng.hpp"
#include "robustlr/robust_stats.hpp"

namespace robustlr {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& token, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(token, &pos);
    if (pos != token.size()) raise(ErrorCode::IoError, "bad numeric field in " + path);
    return v;
  } catch (const std::exception&) {
    raise(ErrorCode::IoError, "bad numeric field '" + token + "' in " + path);
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

VectorXd random_direction(Index d, Rng& rng) {
  VectorXd v(d);
  double n2 = 0.0;
  do {
    for (Index i = 0; i < d; ++i) v(i) = rng.gaussian();
    n2 = v.squaredNorm();
  } while (n2 == 0.0);
  return v / std::sqrt(n2);
}

json trace_json(const FilterStepTrace& t) {
  json j{{"sigma_y_hat", t.sigma_y_hat},
         {"lambda_star", t.lambda_star},
         {"delta", t.delta},
         {"removed", t.removed}};
  if (t.threshold) j["threshold"] = *t.threshold;
  return j;
}

json trace_json(const MainFilterTrace& t) {
  json j{{"sigma_prime", t.sigma_prime},
         {"u_size", t.u_size},
         {"stage", main_stage_name(t.stage)},
         {"w_prime_norm", t.w_prime_norm},
         {"beta_ols", std::vector<double>(t.beta_ols.data(), t.beta_ols.data() + t.beta_ols.size())}};
  if (t.threshold) j["threshold"] = *t.threshold;
  if (t.lambda_star) j["lambda_star"] = *t.lambda_star;
  if (t.delta) j["delta"] = *t.delta;
  return j;
}

int max_threads() {
  if (const char* env = std::getenv("ROBUSTLR_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

void write_dataset_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path + " for writing");
  const Index d = dataset.dim();
  for (Index j = 0; j < d; ++j) out << "x_" << j << ",";
  out << "y";
  if (dataset.has_mask()) out << ",is_outlier";
  out << "\n";
  for (Index i = 0; i < dataset.n(); ++i) {
    for (Index j = 0; j < d; ++j) out << fmt17(dataset.xs()(i, j)) << ",";
    out << fmt17(dataset.y(i));
    if (dataset.has_mask()) out << "," << (dataset.is_outlier(i) ? 1 : 0);
    out << "\n";
  }
  if (!out) raise(ErrorCode::IoError, "failed writing " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) raise(ErrorCode::IoError, "empty file " + path);
  const auto header = split_csv_line(line);
  bool has_mask = !header.empty() && header.back() == "is_outlier";
  const Index d = static_cast<Index>(header.size()) - 1 - (has_mask ? 1 : 0);
  if (d < 1 || header[static_cast<std::size_t>(d)] != "y")
    raise(ErrorCode::IoError, "unexpected CSV header in " + path);

  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<std::uint8_t> mask;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<Index>(fields.size()) != d + 1 + (has_mask ? 1 : 0))
      raise(ErrorCode::IoError, "ragged CSV row in " + path);
    for (Index j = 0; j < d; ++j) xs.push_back(parse_double(fields[static_cast<std::size_t>(j)], path));
    ys.push_back(parse_double(fields[static_cast<std::size_t>(d)], path));
    if (has_mask) mask.push_back(fields.back() == "1" ? 1 : 0);
  }
  const Index n = static_cast<Index>(ys.size());
  if (n == 0) raise(ErrorCode::IoError, "no data rows in " + path);
  MatrixXd x(n, d);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = xs[static_cast<std::size_t>(i * d + j)];
    y(i) = ys[static_cast<std::size_t>(i)];
  }
  std::optional<std::vector<std::uint8_t>> m;
  if (has_mask) m = std::move(mask);
  return Dataset(std::move(x), std::move(y), std::move(m));
}

void write_instance_json(const RegressionInstance& instance, const std::string& path) {
  json j;
  j["beta"] = std::vector<double>(instance.beta.data(), instance.beta.data() + instance.beta.size());
  j["sigma"] = instance.sigma;
  j["epsilon"] = instance.epsilon;
  j["tau"] = instance.tau;
  j["seed"] = instance.seed;
  if (std::holds_alternative<IdentityCovariance>(instance.covariance)) {
    j["covariance_kind"] = "identity";
  } else if (const auto* s = std::get_if<DiagonalSpikedCovariance>(&instance.covariance)) {
    j["covariance_kind"] = "diagonal-spiked";
    j["spike_direction"] =
        std::vector<double>(s->direction.data(), s->direction.data() + s->direction.size());
    j["spike_c2"] = s->c2;
  } else {
    const auto& e = std::get<ExplicitCovariance>(instance.covariance);
    j["covariance_kind"] = "explicit";
    std::vector<std::vector<double>> rows;
    for (Index i = 0; i < e.sigma.rows(); ++i)
      rows.emplace_back(e.sigma.row(i).data(), e.sigma.row(i).data() + e.sigma.cols());
    j["covariance"] = rows;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

RegressionInstance read_instance_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    raise(ErrorCode::IoError, std::string("bad JSON in ") + path + ": " + e.what());
  }
  RegressionInstance inst;
  const auto beta = j.at("beta").get<std::vector<double>>();
  inst.beta = Eigen::Map<const VectorXd>(beta.data(), static_cast<Index>(beta.size()));
  inst.sigma = j.at("sigma").get<double>();
  inst.epsilon = j.at("epsilon").get<double>();
  inst.tau = j.value("tau", 0.1);
  inst.seed = j.at("seed").get<std::uint64_t>();
  const std::string kind = j.value("covariance_kind", "identity");
  if (kind == "identity") {
    inst.covariance = IdentityCovariance{};
  } else if (kind == "diagonal-spiked") {
    const auto dir = j.at("spike_direction").get<std::vector<double>>();
    DiagonalSpikedCovariance s;
    s.direction = Eigen::Map<const VectorXd>(dir.data(), static_cast<Index>(dir.size()));
    s.c2 = j.at("spike_c2").get<double>();
    inst.covariance = s;
  } else if (kind == "explicit") {
    const auto rows = j.at("covariance").get<std::vector<std::vector<double>>>();
    MatrixXd sigma(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k)
        sigma(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    inst.covariance = ExplicitCovariance{std::move(sigma)};
  } else {
    raise(ErrorCode::ConfigError, "unknown covariance_kind '" + kind + "'");
  }
  return inst;
}

const char* estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Ols: return "ols";
    case EstimatorKind::Basic: return "basic";
    case EstimatorKind::Boosted: return "boosted";
    case EstimatorKind::Main: return "main";
  }
  return "?";
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "ols") return EstimatorKind::Ols;
  if (name == "basic") return EstimatorKind::Basic;
  if (name == "boosted") return EstimatorKind::Boosted;
  if (name == "main") return EstimatorKind::Main;
  raise(ErrorCode::ConfigError, "unknown estimator '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (trials < 1) raise(ErrorCode::ConfigError, "trials must be >= 1");
  if (estimators.empty()) raise(ErrorCode::ConfigError, "estimator set must not be empty");
  if (epsilons.empty() || dims.empty() || ns.empty() || beta_norms.empty())
    raise(ErrorCode::ConfigError, "every grid axis needs at least one value");
  for (double e : epsilons)
    if (e < 0.0 || e >= 0.5) raise(ErrorCode::ConfigError, "grid epsilon outside [0, 1/2)");
  for (Index d : dims)
    if (d < 1) raise(ErrorCode::ConfigError, "grid dimension must be positive");
  for (double b : beta_norms)
    if (b < 0.0) raise(ErrorCode::ConfigError, "beta norm must be nonnegative");
}

Index resolve_n(const GridPoint& grid) {
  if (grid.n > 0) return grid.n;
  const double raw = 50.0 * static_cast<double>(grid.d) / (grid.epsilon * grid.epsilon);
  return static_cast<Index>(std::min(raw, 1e5));
}

namespace {

struct EstimatorOutcome {
  VectorXd beta_hat;
  std::vector<IterationEvent> events;
  bool fallback = false;
};

template <typename Audits>
std::vector<IterationEvent> audit_events(const Audits& audits, const Dataset& reference,
                                         double delta0, const char* default_stage) {
  std::vector<IterationEvent> events;
  const double n = static_cast<double>(reference.n());
  double delta = delta0;
  for (const auto& a : audits) {
    if (a.removed_provenance.empty()) continue;  // terminal accept
    IterationEvent ev;
    ev.stage = default_stage;
    if constexpr (requires { a.trace.stage; }) ev.stage = main_stage_name(a.trace.stage);
    for (Index src : a.removed_provenance) {
      if (reference.is_outlier(src))
        ++ev.removed_corrupt;
      else
        ++ev.removed_clean;
    }
    ev.delta_before = delta;
    delta += (static_cast<double>(ev.removed_clean) - static_cast<double>(ev.removed_corrupt)) / n;
    ev.delta_after = delta;
    events.push_back(std::move(ev));
  }
  return events;
}

EstimatorOutcome run_estimator(EstimatorKind kind, const Dataset& corrupted, double epsilon,
                               double tau, int boosted_rounds, double delta0) {
  EstimatorOutcome out;
  switch (kind) {
    case EstimatorKind::Ols: {
      out.beta_hat = ols(corrupted, -1.0);
      break;
    }
    case EstimatorKind::Basic: {
      BasicFilterConfig cfg;
      cfg.epsilon = epsilon;
      cfg.tau = tau;
      const auto res = estimate_basic(corrupted, cfg);
      out.beta_hat = res.beta_hat;
      out.fallback = res.fallback_used;
      out.events = audit_events(res.iterations, corrupted, delta0, "yx-filter");
      break;
    }
    case EstimatorKind::Boosted: {
      BasicFilterConfig cfg;
      cfg.epsilon = epsilon;
      cfg.tau = tau;
      out.beta_hat = estimate_boosted(corrupted, cfg, boosted_rounds);
      break;
    }
    case EstimatorKind::Main: {
      MainFilterConfig cfg;
      cfg.epsilon = epsilon;
      cfg.tau = tau;
      const auto res = estimate_main(corrupted, cfg);
      out.beta_hat = res.beta_hat;
      out.fallback = res.fallback_used;
      out.events = audit_events(res.iterations, corrupted, delta0, "?");
      break;
    }
  }
  return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<GridPoint> grid;
  for (double eps : config.epsilons)
    for (Index d : config.dims)
      for (Index n : config.ns)
        for (double b : config.beta_norms) grid.push_back({eps, d, n, b});

  struct Task {
    std::size_t grid_idx;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t g = 0; g < grid.size(); ++g)
    for (int t = 0; t < config.trials; ++t) tasks.push_back({g, t});

  std::vector<std::vector<TrialResult>> slots(tasks.size());
  auto worker = [&](std::size_t task_idx) {
    const Task& task = tasks[task_idx];
    const GridPoint& gp = grid[task.grid_idx];
    const Index n = resolve_n(gp);
    const std::uint64_t trial_seed =
        config.seed + static_cast<std::uint64_t>(task.trial) +
        1000003ULL * static_cast<std::uint64_t>(task.grid_idx);

    Rng dir_rng(trial_seed * 2654435761ULL + 17);
    RegressionInstance instance;
    instance.beta = gp.beta_norm * random_direction(gp.d, dir_rng);
    instance.sigma = config.sigma;
    instance.epsilon = gp.epsilon;
    instance.tau = config.tau;
    instance.seed = trial_seed;

    AdversarySpec adv = config.adversary;
    adv.epsilon = gp.epsilon;

    std::vector<TrialResult>& results = slots[task_idx];
    Dataset clean = generate_clean(instance, n);
    Dataset corrupted = corrupt(clean, adv, trial_seed + 7777);
    const double delta0 = sym_diff_progress(corrupted, corrupted);

    for (EstimatorKind kind : config.estimators) {
      TrialResult row;
      row.grid = gp;
      row.grid.n = n;
      row.trial = task.trial;
      row.estimator = kind;
      row.delta_initial = delta0;
      row.delta_final = delta0;
      const auto start = std::chrono::steady_clock::now();
      try {
        const EstimatorOutcome out = run_estimator(kind, corrupted, gp.epsilon, config.tau,
                                                   config.boosted_rounds, delta0);
        row.error = ell2_error(out.beta_hat, instance.beta);
        row.fallback_used = out.fallback;
        row.events = out.events;
        row.iterations = static_cast<int>(out.events.size());
        for (const auto& ev : out.events) {
          row.removed_clean += ev.removed_clean;
          row.removed_corrupt += ev.removed_corrupt;
          row.delta_final = ev.delta_after;
        }
      } catch (const Error& e) {
        row.status = error_code_name(e.code());
        row.error = std::numeric_limits<double>::quiet_NaN();
      }
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              start)
                        .count();
      results.push_back(std::move(row));
    }
  };

  const int threads = std::min<int>(max_threads(), static_cast<int>(tasks.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) worker(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        for (;;) {
          std::size_t idx;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= tasks.size()) return;
            idx = next++;
          }
          worker(idx);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  ExperimentReport report;
  report.config = config;
  for (auto& slot : slots)
    for (auto& row : slot) report.rows.push_back(std::move(row));
  return report;
}

void write_report_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << "eps,d,n,beta_norm,trial,estimator,status,error,iterations,removed_clean,removed_corrupt,"
         "delta_initial,delta_final,fallback,wall_ms\n";
  for (const auto& r : report.rows) {
    out << fmt17(r.grid.epsilon) << "," << r.grid.d << "," << r.grid.n << ","
        << fmt17(r.grid.beta_norm) << "," << r.trial << "," << estimator_name(r.estimator) << ","
        << r.status << "," << fmt17(r.error) << "," << r.iterations << "," << r.removed_clean << ","
        << r.removed_corrupt << "," << fmt17(r.delta_initial) << "," << fmt17(r.delta_final) << ","
        << (r.fallback_used ? 1 : 0) << "," << fmt17(r.wall_ms) << "\n";
  }
  if (!out) raise(ErrorCode::IoError, "failed writing " + path);
}

void write_report_summary_json(const ExperimentReport& report, const std::string& path) {
  json grid_summaries = json::array();
  struct Key {
    double eps, beta_norm;
    Index d, n;
    EstimatorKind est;
    bool operator<(const Key& o) const {
      return std::tie(eps, beta_norm, d, n, est) < std::tie(o.eps, o.beta_norm, o.d, o.n, o.est);
    }
  };
  std::map<Key, std::vector<double>> errors;
  for (const auto& r : report.rows)
    if (r.status == "ok")
      errors[{r.grid.epsilon, r.grid.beta_norm, r.grid.d, r.grid.n, r.estimator}].push_back(r.error);

  std::map<std::string, std::vector<std::pair<double, double>>> eps_curves;
  for (const auto& [key, errs] : errors) {
    const double med = median(errs);
    grid_summaries.push_back({{"eps", key.eps},
                              {"d", key.d},
                              {"n", key.n},
                              {"beta_norm", key.beta_norm},
                              {"estimator", estimator_name(key.est)},
                              {"trials", errs.size()},
                              {"median_error", med}});
    eps_curves[estimator_name(key.est)].push_back({key.eps, med});
  }

  json slopes = json::object();
  for (const auto& [name, pts] : eps_curves) {
    // least-squares slope of log(median error) vs log(eps)
    std::vector<std::pair<double, double>> usable;
    for (const auto& [eps, med] : pts)
      if (eps > 0.0 && med > 0.0) usable.push_back({std::log(eps), std::log(med)});
    if (usable.size() < 2) continue;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : usable) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = static_cast<double>(usable.size());
    const double denom = m * sxx - sx * sx;
    if (std::abs(denom) > 1e-12) slopes[name] = (m * sxy - sx * sy) / denom;
  }

  json j;
  j["library_version"] = kLibraryVersion;
  j["config"] = {{"epsilons", report.config.epsilons},
                 {"dims", report.config.dims},
                 {"ns", report.config.ns},
                 {"beta_norms", report.config.beta_norms},
                 {"sigma", report.config.sigma},
                 {"tau", report.config.tau},
                 {"trials", report.config.trials},
                 {"seed", report.config.seed}};
  j["grid"] = grid_summaries;
  j["log_error_vs_log_eps_slope"] = slopes;
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

std::string basic_audit_json(const BasicEstimateResult& result) {
  json iters = json::array();
  for (const auto& it : result.iterations) {
    json j = trace_json(it.trace);
    j["removed_provenance"] = it.removed_provenance;
    iters.push_back(std::move(j));
  }
  json j{{"estimator", "basic"},
         {"fallback_used", result.fallback_used},
         {"iterations", std::move(iters)},
         {"beta_hat", std::vector<double>(result.beta_hat.data(),
                                          result.beta_hat.data() + result.beta_hat.size())}};
  return j.dump(2);
}

std::string main_audit_json(const MainEstimateResult& result) {
  json iters = json::array();
  for (const auto& it : result.iterations) {
    json j = trace_json(it.trace);
    j["removed_provenance"] = it.removed_provenance;
    iters.push_back(std::move(j));
  }
  json j{{"estimator", "main"},
         {"fallback_used", result.fallback_used},
         {"iterations", std::move(iters)},
         {"beta_hat", std::vector<double>(result.beta_hat.data(),
                                          result.beta_hat.data() + result.beta_hat.size())}};
  return j.dump(2);
}

std::string condition_report_json(const ConditionReport& report) {
  json conditions = json::object();
  for (const auto& c : report.conditions)
    conditions[c.name] = {{"pass", c.pass}, {"measured", c.measured}, {"threshold", c.threshold}};
  return json{{"all_pass", report.all_pass()}, {"conditions", std::move(conditions)}}.dump(2);
}

ExperimentConfig experiment_config_from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    raise(ErrorCode::IoError, std::string("bad JSON in ") + path + ": " + e.what());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("epsilons")) cfg.epsilons = j["epsilons"].get<std::vector<double>>();
    if (j.contains("dims")) cfg.dims = j["dims"].get<std::vector<Index>>();
    if (j.contains("ns")) cfg.ns = j["ns"].get<std::vector<Index>>();
    if (j.contains("beta_norms")) cfg.beta_norms = j["beta_norms"].get<std::vector<double>>();
    cfg.sigma = j.value("sigma", cfg.sigma);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.trials = j.value("trials", cfg.trials);
    cfg.boosted_rounds = j.value("boosted_rounds", cfg.boosted_rounds);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    if (j.contains("estimators")) {
      cfg.estimators.clear();
      for (const auto& name : j["estimators"]) cfg.estimators.push_back(estimator_from_name(name));
    }
    const std::string adv = j.value("adversary", "adaptive-shift");
    if (adv == "none") {
      cfg.adversary.kind = NoAdversary{};
    } else if (adv == "adaptive-shift") {
      AdaptiveShift s;
      s.shift_multiple = j.value("shift_multiple", s.shift_multiple);
      s.leverage = j.value("leverage", s.leverage);
      cfg.adversary.kind = s;
    } else if (adv == "huber") {
      HuberAdditive h;
      h.x_std = j.value("huber_x_std", h.x_std);
      h.y_center = j.value("huber_y_center", h.y_center);
      h.y_std = j.value("huber_y_std", h.y_std);
      cfg.adversary.kind = h;
    } else if (adv == "label-flip") {
      cfg.adversary.kind = LabelFlip{j.value("flip_scale", 1.0)};
    } else {
      raise(ErrorCode::ConfigError, "unknown adversary '" + adv + "'");
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::ConfigError, std::string("bad experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace robustlr
