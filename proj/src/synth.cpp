#include "robustlr/synth.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "robustlr/rng.hpp"

namespace robustlr {

namespace {

VectorXd random_unit(Index d, Rng& rng) {
  VectorXd v(d);
  double n2 = 0.0;
  do {
    for (Index i = 0; i < d; ++i) v(i) = rng.gaussian();
    n2 = v.squaredNorm();
  } while (n2 == 0.0);
  return v / std::sqrt(n2);
}

}  // namespace

MatrixXd covariance_sqrt(const CovarianceKind& kind, Index d) {
  if (std::holds_alternative<IdentityCovariance>(kind)) return MatrixXd::Identity(d, d);
  if (const auto* spiked = std::get_if<DiagonalSpikedCovariance>(&kind)) {
    if (spiked->direction.size() != d)
      raise(ErrorCode::DimensionMismatch, "spike direction dimension differs from d");
    if (spiked->c2 > 1.0)
      raise(ErrorCode::InvalidCovariance, "spiked covariance needs c2 <= 1");
    VectorXd v = spiked->direction.normalized();
    // (I - a vv^T)^2 = I - c2 vv^T  with  a = 1 - sqrt(1 - c2).
    const double a = 1.0 - std::sqrt(std::max(0.0, 1.0 - spiked->c2));
    return MatrixXd::Identity(d, d) - a * v * v.transpose();
  }
  const auto& expl = std::get<ExplicitCovariance>(kind);
  if (expl.sigma.rows() != d || expl.sigma.cols() != d)
    raise(ErrorCode::DimensionMismatch, "explicit covariance has wrong shape");
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(expl.sigma);
  const VectorXd& evals = solver.eigenvalues();
  const double scale = std::max(1.0, std::abs(evals.maxCoeff()));
  VectorXd roots(d);
  for (Index i = 0; i < d; ++i) {
    if (evals(i) < -1e-10 * scale)
      raise(ErrorCode::InvalidCovariance, "covariance is not positive semidefinite");
    roots(i) = std::sqrt(std::max(0.0, evals(i)));
  }
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

Dataset generate_clean(const RegressionInstance& instance, Index n) {
  instance.validate();
  if (n < 1) raise(ErrorCode::InvalidArgument, "need n >= 1 samples");
  const Index d = instance.beta.size();
  const MatrixXd root = covariance_sqrt(instance.covariance, d);
  const bool identity = std::holds_alternative<IdentityCovariance>(instance.covariance);

  Rng rng(instance.seed);
  MatrixXd xs(n, d);
  VectorXd ys(n);
  VectorXd z(d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) z(j) = rng.gaussian();
    if (identity)
      xs.row(i) = z.transpose();
    else
      xs.row(i) = (root * z).transpose();
    const double eta = instance.sigma > 0.0 ? rng.gaussian(0.0, instance.sigma) : 0.0;
    ys(i) = instance.beta.dot(xs.row(i)) + eta;
  }
  return Dataset(std::move(xs), std::move(ys), std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
}

Dataset corrupt(const Dataset& dataset, const AdversarySpec& adversary, std::uint64_t seed) {
  if (adversary.epsilon < 0.0 || adversary.epsilon >= 0.5)
    raise(ErrorCode::EpsilonTooLarge, "epsilon must lie in [0, 1/2)");
  if (dataset.has_mask()) {
    for (Index i = 0; i < dataset.n(); ++i)
      if (dataset.is_outlier(i))
        raise(ErrorCode::InvalidArgument, "dataset already carries corrupted rows");
  }
  const Index n = dataset.n();
  const Index d = dataset.dim();
  MatrixXd xs = dataset.xs();
  VectorXd ys = dataset.ys();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);

  const Index k = static_cast<Index>(std::floor(adversary.epsilon * static_cast<double>(n)));
  if (std::holds_alternative<NoAdversary>(adversary.kind) || k == 0)
    return Dataset(std::move(xs), std::move(ys), std::move(mask));

  Rng rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = n - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  order.resize(static_cast<std::size_t>(k));

  if (const auto* huber = std::get_if<HuberAdditive>(&adversary.kind)) {
    VectorXd center = huber->x_center.size() == d ? huber->x_center : VectorXd::Zero(d);
    for (Index idx : order) {
      for (Index j = 0; j < d; ++j) xs(idx, j) = center(j) + huber->x_std * rng.gaussian();
      ys(idx) = rng.gaussian(huber->y_center, huber->y_std);
      mask[static_cast<std::size_t>(idx)] = 1;
    }
  } else if (const auto* shift = std::get_if<AdaptiveShift>(&adversary.kind)) {
    // Inspect the clean data for the response scale, then make every
    // replacement contribute m/(eps n) to the empirical mean of yX.
    const double sigma_y_hat = std::sqrt(ys.squaredNorm() / static_cast<double>(n));
    const double m = shift->shift_multiple * std::max(sigma_y_hat, 1e-12);
    const double product = m / adversary.epsilon;
    VectorXd u = shift->direction ? shift->direction->normalized() : random_unit(d, rng);
    if (u.size() != d) raise(ErrorCode::DimensionMismatch, "shift direction has wrong dimension");
    const double r = shift->leverage;
    if (!(r > 0.0)) raise(ErrorCode::InvalidArgument, "leverage must be positive");
    const double s = product / r;
    for (Index idx : order) {
      xs.row(idx) = (r * u).transpose();
      ys(idx) = s;
      mask[static_cast<std::size_t>(idx)] = 1;
    }
  } else {
    const auto& flip = std::get<LabelFlip>(adversary.kind);
    for (Index idx : order) {
      ys(idx) = -flip.scale * ys(idx);
      mask[static_cast<std::size_t>(idx)] = 1;
    }
  }
  return Dataset(std::move(xs), std::move(ys), std::move(mask));
}

Dataset whiten(const Dataset& dataset, const MatrixXd& sigma_hat) {
  const Index d = dataset.dim();
  if (sigma_hat.rows() != d || sigma_hat.cols() != d)
    raise(ErrorCode::DimensionMismatch, "covariance estimate has wrong shape");
  if (!sigma_hat.isApprox(sigma_hat.transpose(), 1e-10))
    raise(ErrorCode::InvalidArgument, "covariance estimate must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(sigma_hat);
  const VectorXd& evals = solver.eigenvalues();
  const double scale = std::max(1.0, std::abs(evals.maxCoeff()));
  VectorXd inv_roots(d);
  for (Index i = 0; i < d; ++i) {
    if (evals(i) <= 1e-12 * scale)
      raise(ErrorCode::NotPositiveDefinite, "covariance estimate has an eigenvalue near zero");
    inv_roots(i) = 1.0 / std::sqrt(evals(i));
  }
  MatrixXd w = solver.eigenvectors() * inv_roots.asDiagonal() * solver.eigenvectors().transpose();
  return dataset.with_covariates(dataset.xs() * w.transpose());
}

}  // namespace robustlr
