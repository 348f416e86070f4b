#pragma once

#include <string>
#include <vector>

#include "robustlr/filter_basic.hpp"
#include "robustlr/filter_main.hpp"
#include "robustlr/model.hpp"
#include "robustlr/synth.hpp"

namespace robustlr {

inline constexpr const char* kLibraryVersion = "0.1.0";

// ---- dataset / instance persistence ----------------------------------------

/// CSV with header x_0,...,x_{d-1},y[,is_outlier], 17 significant digits, LF
/// line endings. Round-trips doubles bit-identically.
void write_dataset_csv(const Dataset& dataset, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

void write_instance_json(const RegressionInstance& instance, const std::string& path);
RegressionInstance read_instance_json(const std::string& path);

// ---- experiment harness -----------------------------------------------------

enum class EstimatorKind { Ols, Basic, Boosted, Main };
const char* estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

struct GridPoint {
  double epsilon = 0.1;
  Index d = 20;
  Index n = 0;  // 0 = min(ceil(50 d / eps^2), 1e5)
  double beta_norm = 5.0;
};

struct ExperimentConfig {
  std::vector<double> epsilons = {0.1};
  std::vector<Index> dims = {20};
  std::vector<Index> ns = {0};
  std::vector<double> beta_norms = {5.0};
  double sigma = 1.0;
  double tau = 0.1;
  AdversarySpec adversary{AdaptiveShift{}, 0.0};  // epsilon filled per grid point
  std::vector<EstimatorKind> estimators = {EstimatorKind::Ols, EstimatorKind::Main};
  int trials = 1;
  int boosted_rounds = 5;
  std::uint64_t seed = 1;
  std::string output_dir;

  void validate() const;
};

struct IterationEvent {
  std::string stage;
  Index removed_clean = 0;
  Index removed_corrupt = 0;
  double delta_before = 0.0;
  double delta_after = 0.0;
};

struct TrialResult {
  GridPoint grid;
  int trial = 0;
  EstimatorKind estimator = EstimatorKind::Ols;
  std::string status = "ok";  // or the error code name
  double error = 0.0;
  int iterations = 0;
  Index removed_clean = 0;
  Index removed_corrupt = 0;
  double delta_initial = 0.0;
  double delta_final = 0.0;
  bool fallback_used = false;
  double wall_ms = 0.0;
  std::vector<IterationEvent> events;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<TrialResult> rows;
};

Index resolve_n(const GridPoint& grid);

/// Run the full grid x trials x estimators. Trials run concurrently with seeds
/// base_seed + trial index; ROBUSTLR_THREADS caps the worker count.
ExperimentReport run_experiment(const ExperimentConfig& config);

void write_report_csv(const ExperimentReport& report, const std::string& path);
void write_report_summary_json(const ExperimentReport& report, const std::string& path);

std::string basic_audit_json(const BasicEstimateResult& result);
std::string main_audit_json(const MainEstimateResult& result);
std::string condition_report_json(const ConditionReport& report);

ExperimentConfig experiment_config_from_json_file(const std::string& path);

}  // namespace robustlr
