#pragma once

#include <utility>
#include <vector>

#include "robustlr/model.hpp"
#include "robustlr/robust_stats.hpp"

namespace robustlr {

struct BasicFilterConfig {
  double epsilon = 0.1;
  double tau = 0.1;
  double spectral_const = 10.0;            // hidden constant of the accept test
  std::pair<double, double> tail_consts = {32.0, 8.0};
  Index max_iterations = 0;                // 0 = 2n

  void validate() const {
    if (spectral_const <= 0.0) raise(ErrorCode::InvalidArgument, "spectral_const must be positive");
    if (epsilon < 0.0 || epsilon >= 0.5) raise(ErrorCode::EpsilonTooLarge, "epsilon in [0, 1/2)");
    if (tau <= 0.0 || tau >= 1.0) raise(ErrorCode::InvalidArgument, "tau in (0, 1)");
  }
};

struct FilterStepTrace {
  double sigma_y_hat = 0.0;
  double lambda_star = 0.0;
  double delta = 0.0;
  std::optional<double> threshold;
  Index removed = 0;
};

/// One step of the identity-covariance filter: certify the empirical mean of
/// yX via the spectral test, or remove a tail along the top direction.
std::pair<FilterOutcome, FilterStepTrace> filter_basic_step(const Dataset& dataset,
                                                            const BasicFilterConfig& cfg);

struct BasicIterationAudit {
  FilterStepTrace trace;
  std::vector<Index> removed_provenance;  // provenance ids of removed rows
};

struct BasicEstimateResult {
  VectorXd beta_hat;
  std::vector<BasicIterationAudit> iterations;
  bool fallback_used = false;  // a step fired the spectral test but no threshold existed
};

/// Iterate filter_basic_step to a fixed point. When a firing step finds no
/// admissible threshold, the driver falls back to the current mean of yX and
/// flags the audit instead of propagating the error.
BasicEstimateResult estimate_basic(const Dataset& dataset, const BasicFilterConfig& cfg);

/// Accuracy boosting: repeatedly subtract the current fit from the labels of
/// the original dataset and re-estimate, accumulating corrections.
VectorXd estimate_boosted(const Dataset& dataset, const BasicFilterConfig& cfg, int rounds);

/// log(1/eps) with eps clamped to <= 1/e so the factor stays >= 1.
inline double clamped_log_inv(double eps) {
  return std::log(1.0 / std::min(std::max(eps, 1e-300), 1.0 / M_E));
}

}  // namespace robustlr
