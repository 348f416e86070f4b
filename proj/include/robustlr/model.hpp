#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "robustlr/errors.hpp"

namespace robustlr {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = std::int64_t;

struct LabeledSample {
  VectorXd x;
  double y = 0.0;
};

/// How covariates of a synthetic instance are distributed.
struct IdentityCovariance {};
struct DiagonalSpikedCovariance {
  VectorXd direction;  // unit vector v
  double c2 = 0.0;     // Sigma = I - c2 * v v^T
};
struct ExplicitCovariance {
  MatrixXd sigma;
};
using CovarianceKind = std::variant<IdentityCovariance, DiagonalSpikedCovariance, ExplicitCovariance>;

/// Immutable collection of labeled samples with uniform dimension.
///
/// The optional outlier mask (true = adversarially inserted) is metadata for
/// audits only; estimators must never read it. Row provenance tracks each
/// row's index in the dataset it was filtered from, so symmetric-difference
/// progress can be measured across filter iterations.
class Dataset {
 public:
  Dataset(MatrixXd xs, VectorXd ys, std::optional<std::vector<std::uint8_t>> mask = std::nullopt);

  Index n() const { return xs_.rows(); }
  Index dim() const { return xs_.cols(); }

  const MatrixXd& xs() const { return xs_; }
  const VectorXd& ys() const { return ys_; }
  Eigen::Ref<const VectorXd> x(Index i) const { return xs_.row(i).transpose(); }
  double y(Index i) const { return ys_(i); }

  bool has_mask() const { return mask_.has_value(); }
  bool is_outlier(Index i) const { return mask_ && (*mask_)[static_cast<std::size_t>(i)] != 0; }
  const std::optional<std::vector<std::uint8_t>>& mask() const { return mask_; }

  const std::vector<Index>& provenance() const { return provenance_; }

  /// New dataset keeping the given rows (order preserved); provenance composes.
  Dataset subset(const std::vector<Index>& keep) const;

  /// Same rows with replaced labels (provenance and mask preserved).
  Dataset with_labels(VectorXd new_ys) const;

  /// Same rows with replaced covariates (provenance and mask preserved).
  Dataset with_covariates(MatrixXd new_xs) const;

  /// Copy without the outlier mask.
  Dataset without_mask() const;

 private:
  Dataset(MatrixXd xs, VectorXd ys, std::optional<std::vector<std::uint8_t>> mask,
          std::vector<Index> provenance, bool validated);
  void validate() const;

  MatrixXd xs_;
  VectorXd ys_;
  std::optional<std::vector<std::uint8_t>> mask_;
  std::vector<Index> provenance_;
};

Dataset dataset_from_rows(const std::vector<std::pair<VectorXd, double>>& rows);

/// Ground-truth record for a synthetic regression instance.
struct RegressionInstance {
  VectorXd beta;
  double sigma = 1.0;
  CovarianceKind covariance = IdentityCovariance{};
  double epsilon = 0.0;
  double tau = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (sigma < 0.0) raise(ErrorCode::InvalidArgument, "sigma must be nonnegative");
    if (epsilon < 0.0 || epsilon >= 0.5) raise(ErrorCode::EpsilonTooLarge, "epsilon must lie in [0, 1/2)");
    if (tau <= 0.0 || tau >= 1.0) raise(ErrorCode::InvalidArgument, "tau must lie in (0, 1)");
  }
};

/// sigma_y = sqrt(sigma^2 + |beta|^2), the response scale under identity covariates.
struct SigmaYDecomposition {
  double sigma_y = 0.0;

  static SigmaYDecomposition from(double sigma, const VectorXd& beta) {
    return SigmaYDecomposition{std::sqrt(sigma * sigma + beta.squaredNorm())};
  }
};

struct Estimate {
  VectorXd beta_hat;
};
struct Filtered {
  Dataset dataset;
  std::vector<Index> removed_indices;  // row indices in the step's input
};
/// Result of one filter step: either a certified estimate or a strictly
/// smaller dataset.
using FilterOutcome = std::variant<Estimate, Filtered>;

inline bool is_estimate(const FilterOutcome& o) { return std::holds_alternative<Estimate>(o); }

double ell2_error(const VectorXd& beta_hat, const VectorXd& beta);

}  // namespace robustlr
