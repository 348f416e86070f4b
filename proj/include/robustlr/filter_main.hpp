#pragma once

#include <utility>
#include <vector>

#include "robustlr/model.hpp"
#include "robustlr/robust_stats.hpp"

namespace robustlr {

struct MainFilterConfig {
  double epsilon = 0.1;
  double tau = 0.1;
  double variance_test_const = 10.0;  // constant in (1 + c * eps * log(1/eps))
  double spectral_test_const = 10.0;  // constant in (1 + c * eps * log^2(1/eps))
  double u_cut_mult = 6.0;            // U = { |resid| > u_cut_mult * sqrt(ln(1/eps)) * sigma' }
  std::pair<double, double> tail_consts = {15.0, 72.0};
  double ridge = -1.0;                // <0 = 1e-10 * trace(E[XX^T])
  Index max_iterations = 0;           // 0 = 2n

  void validate() const {
    if (variance_test_const <= 0.0 || spectral_test_const <= 0.0 || u_cut_mult <= 0.0)
      raise(ErrorCode::InvalidArgument, "filter constants must be positive");
    if (epsilon < 0.0 || epsilon >= 0.5) raise(ErrorCode::EpsilonTooLarge, "epsilon in [0, 1/2)");
    if (tau <= 0.0 || tau >= 1.0) raise(ErrorCode::InvalidArgument, "tau in (0, 1)");
  }
};

enum class MainStage { YFilter, XFilter, YXFilter, Accept };

const char* main_stage_name(MainStage stage);

struct MainFilterTrace {
  VectorXd beta_ols;
  double sigma_prime = 0.0;
  Index u_size = 0;
  MainStage stage = MainStage::Accept;
  std::optional<double> threshold;
  std::optional<double> lambda_star;
  std::optional<double> delta;
  double w_prime_norm = 0.0;  // |E_{S' \ U}[(y - beta'.x) x]|
};

/// Ordinary least squares via the (ridge-stabilized) normal equations.
VectorXd ols(const Dataset& dataset, double ridge);

/// One step of the OLS-anchored filter: residual filter, covariate filter,
/// then product filter over S' \ U with U re-added; accepts beta' when all
/// three tests pass.
std::pair<FilterOutcome, MainFilterTrace> filter_main_step(const Dataset& dataset,
                                                           const MainFilterConfig& cfg);

struct MainIterationAudit {
  MainFilterTrace trace;
  std::vector<Index> removed_provenance;
};

struct MainEstimateResult {
  VectorXd beta_hat;
  std::vector<MainIterationAudit> iterations;
  bool fallback_used = false;
};

/// Iterate filter_main_step to a fixed point (same fallback rule as the basic
/// driver when a firing test finds no admissible threshold).
MainEstimateResult estimate_main(const Dataset& dataset, const MainFilterConfig& cfg);

}  // namespace robustlr
