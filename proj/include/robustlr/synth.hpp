#pragma once

#include <optional>
#include <variant>

#include "robustlr/model.hpp"

namespace robustlr {

struct NoAdversary {};

/// Oblivious contamination: replacements are independent draws from a fixed
/// noise distribution (Huber-style).
struct HuberAdditive {
  VectorXd x_center;  // empty = origin
  double x_std = 1.0;
  double y_center = 0.0;
  double y_std = 1.0;
};

/// Data-inspecting adversary that shifts the empirical mean of yX by
/// shift_multiple * rms(y) along a chosen direction. Each replacement
/// contributes the same product y*(u.x) = m/eps, placed at x = leverage * u so
/// the covariate itself stays unremarkable.
struct AdaptiveShift {
  std::optional<VectorXd> direction;  // unit vector; absent = random under seed
  double shift_multiple = 3.0;
  double leverage = 1.0;
};

/// Keeps covariates, replaces y by -scale * y on the corrupted rows.
struct LabelFlip {
  double scale = 1.0;
};

struct AdversarySpec {
  std::variant<NoAdversary, HuberAdditive, AdaptiveShift, LabelFlip> kind = NoAdversary{};
  double epsilon = 0.0;
};

/// Draw n clean samples: X from the instance covariance, y = beta.X + eta.
/// Pure function of (instance, n); mask is all-false.
Dataset generate_clean(const RegressionInstance& instance, Index n);

/// Replace exactly floor(eps * n) rows according to the adversary; the mask
/// marks replacements. The adversary may inspect the clean data.
Dataset corrupt(const Dataset& dataset, const AdversarySpec& adversary, std::uint64_t seed);

/// Replace each x by sigma_hat^{-1/2} x (symmetric eigendecomposition).
Dataset whiten(const Dataset& dataset, const MatrixXd& sigma_hat);

/// Square root of a covariance descriptor (for samplers and tests).
MatrixXd covariance_sqrt(const CovarianceKind& kind, Index d);

}  // namespace robustlr
