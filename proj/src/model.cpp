#include "robustlr/model.hpp"

#include <cmath>

namespace robustlr {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidCovariance: return "InvalidCovariance";
    case ErrorCode::EpsilonTooLarge: return "EpsilonTooLarge";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ProvenanceLost: return "ProvenanceLost";
    case ErrorCode::DegenerateScale: return "DegenerateScale";
    case ErrorCode::NoThresholdFound: return "NoThresholdFound";
    case ErrorCode::IterationLimitExceeded: return "IterationLimitExceeded";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::EpsOutOfRange: return "EpsOutOfRange";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::RootFindFailure: return "RootFindFailure";
    case ErrorCode::DivergentChiSquare: return "DivergentChiSquare";
    case ErrorCode::GridOverflow: return "GridOverflow";
    case ErrorCode::QueryOutOfRange: return "QueryOutOfRange";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

Dataset::Dataset(MatrixXd xs, VectorXd ys, std::optional<std::vector<std::uint8_t>> mask)
    : xs_(std::move(xs)), ys_(std::move(ys)), mask_(std::move(mask)) {
  validate();
  provenance_.resize(static_cast<std::size_t>(xs_.rows()));
  for (Index i = 0; i < xs_.rows(); ++i) provenance_[static_cast<std::size_t>(i)] = i;
}

Dataset::Dataset(MatrixXd xs, VectorXd ys, std::optional<std::vector<std::uint8_t>> mask,
                 std::vector<Index> provenance, bool)
    : xs_(std::move(xs)), ys_(std::move(ys)), mask_(std::move(mask)), provenance_(std::move(provenance)) {}

void Dataset::validate() const {
  if (xs_.rows() == 0) raise(ErrorCode::EmptyDataset, "dataset must contain at least one sample");
  if (xs_.rows() != ys_.size())
    raise(ErrorCode::DimensionMismatch, "covariate rows and label count differ");
  if (mask_ && static_cast<Index>(mask_->size()) != xs_.rows())
    raise(ErrorCode::DimensionMismatch, "outlier mask length differs from sample count");
  if (!xs_.allFinite() || !ys_.allFinite())
    raise(ErrorCode::NonFiniteValue, "dataset admits only finite values");
}

Dataset Dataset::subset(const std::vector<Index>& keep) const {
  MatrixXd xs(static_cast<Index>(keep.size()), dim());
  VectorXd ys(static_cast<Index>(keep.size()));
  std::optional<std::vector<std::uint8_t>> mask;
  if (mask_) mask.emplace(keep.size());
  std::vector<Index> prov(keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const Index i = keep[j];
    if (i < 0 || i >= n()) raise(ErrorCode::InvalidArgument, "subset index out of range");
    xs.row(static_cast<Index>(j)) = xs_.row(i);
    ys(static_cast<Index>(j)) = ys_(i);
    if (mask) (*mask)[j] = (*mask_)[static_cast<std::size_t>(i)];
    prov[j] = provenance_[static_cast<std::size_t>(i)];
  }
  if (xs.rows() == 0) raise(ErrorCode::EmptyDataset, "subset would be empty");
  return Dataset(std::move(xs), std::move(ys), std::move(mask), std::move(prov), true);
}

Dataset Dataset::with_labels(VectorXd new_ys) const {
  if (new_ys.size() != n()) raise(ErrorCode::DimensionMismatch, "label vector length differs");
  if (!new_ys.allFinite()) raise(ErrorCode::NonFiniteValue, "labels must be finite");
  return Dataset(xs_, std::move(new_ys), mask_, provenance_, true);
}

Dataset Dataset::with_covariates(MatrixXd new_xs) const {
  if (new_xs.rows() != n()) raise(ErrorCode::DimensionMismatch, "covariate row count differs");
  if (!new_xs.allFinite()) raise(ErrorCode::NonFiniteValue, "covariates must be finite");
  return Dataset(std::move(new_xs), ys_, mask_, provenance_, true);
}

Dataset Dataset::without_mask() const {
  return Dataset(xs_, ys_, std::nullopt, provenance_, true);
}

Dataset dataset_from_rows(const std::vector<std::pair<VectorXd, double>>& rows) {
  if (rows.empty()) raise(ErrorCode::EmptyDataset, "no rows supplied");
  const Index d = rows.front().first.size();
  MatrixXd xs(static_cast<Index>(rows.size()), d);
  VectorXd ys(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first.size() != d)
      raise(ErrorCode::DimensionMismatch, "all covariate vectors must share one dimension");
    xs.row(static_cast<Index>(i)) = rows[i].first.transpose();
    ys(static_cast<Index>(i)) = rows[i].second;
  }
  if (!xs.allFinite() || !ys.allFinite())
    raise(ErrorCode::NonFiniteValue, "rows contain NaN or Inf");
  return Dataset(std::move(xs), std::move(ys));
}

double ell2_error(const VectorXd& beta_hat, const VectorXd& beta) {
  if (beta_hat.size() != beta.size())
    raise(ErrorCode::DimensionMismatch, "vectors must share dimension");
  return (beta_hat - beta).norm();
}

}  // namespace robustlr
