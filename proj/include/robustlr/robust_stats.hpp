#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "robustlr/model.hpp"

namespace robustlr {

/// Empirical mean and centered second moment of the vectors y*x.
struct EmpiricalYXMoments {
  VectorXd beta_s;  // E_S[yX]
  MatrixXd m_hat;   // E_S[(yX - beta_s)(yX - beta_s)^T]
};

struct EigenPair {
  double lambda_star = 0.0;  // largest-|.| eigenvalue
  VectorXd v_star;           // associated unit eigenvector
  bool converged = true;     // false when power iteration hit max_iter
};

/// Consistent Gaussian scale from the interquartile range (type-7 quantiles).
double robust_scale_iqr(const std::vector<double>& values);
double robust_scale_iqr(const VectorXd& values);

EmpiricalYXMoments yx_moments(const Dataset& dataset);

/// Top eigenpair by magnitude of a symmetric matrix. Exact solve for d <= 64,
/// shifted power iteration above.
EigenPair top_eigenpair(const MatrixXd& m, double tol = 1e-11, int max_iter = 10000);

/// Smallest T with empirical tail #{m_i > T + shift}/n strictly above
/// tail_budget(T). The tail is piecewise constant, so scanning one candidate
/// just below each distinct magnitude covers every value the inequality can
/// take; absent means no candidate qualifies. A candidate whose tail is the
/// whole sample is skipped (filtering may never empty the dataset).
std::optional<double> threshold_search(const std::vector<double>& magnitudes,
                                       const std::function<double(double)>& tail_budget,
                                       double shift);

/// Delta(S, S') where S is the clean multiset behind `reference` (replacement
/// corruption keeps |S| = reference rows) and `current` was filtered out of
/// `reference` (traced by row provenance).
double sym_diff_progress(const Dataset& reference, const Dataset& current);

struct ConditionResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;   // measured extreme value
  double threshold = 0.0;  // bound it is compared against
};

struct ConditionReport {
  std::vector<ConditionResult> conditions;
  bool all_pass() const {
    for (const auto& c : conditions)
      if (!c.pass) return false;
    return true;
  }
  const ConditionResult* find(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return &c;
    return nullptr;
  }
};

struct GoodSetOptions {
  double big_const = 10.0;      // hidden constant for mean/covariance closeness
  int tail_log_exponent = 1;    // exponent q in eps / (T^2 log^q(n/tau))
  std::uint64_t direction_seed = 12345;
};

/// Diagnostics for the regularity conditions behind the basic filter
/// (boundedness, directional tails, mean and covariance concentration of yX).
/// Test utility on clean data; not part of estimation.
ConditionReport verify_good_set(const Dataset& dataset, const VectorXd& beta, double sigma_y,
                                double epsilon, double tau, int n_directions,
                                const GoodSetOptions& opts = {});

struct RepresentativeOptions {
  double big_const = 10.0;
  int n_directions = 16;
  double t_prime_mult = 6.0;  // T' = t_prime_mult * sqrt(ln(1/eps))
  std::uint64_t direction_seed = 54321;
};

/// Diagnostics for the regularity conditions behind the main filter: condition
/// families on X alone, on residuals y - beta'.x per probe, and on the
/// restricted set with small residuals.
ConditionReport verify_representative(const Dataset& dataset, const VectorXd& beta, double sigma,
                                      const std::vector<VectorXd>& probes, double epsilon,
                                      double tau, const RepresentativeOptions& opts = {});

}  // namespace robustlr
