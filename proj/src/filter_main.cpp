#include "robustlr/filter_main.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "robustlr/filter_basic.hpp"

namespace robustlr {

const char* main_stage_name(MainStage stage) {
  switch (stage) {
    case MainStage::YFilter: return "y-filter";
    case MainStage::XFilter: return "x-filter";
    case MainStage::YXFilter: return "yx-filter";
    case MainStage::Accept: return "accept";
  }
  return "?";
}

VectorXd ols(const Dataset& dataset, double ridge) {
  const Index n = dataset.n();
  const Index d = dataset.dim();
  if (n < d) raise(ErrorCode::TooFewSamples, "OLS needs n >= d");
  MatrixXd gram = dataset.xs().transpose() * dataset.xs() / static_cast<double>(n);
  VectorXd rhs = dataset.xs().transpose() * dataset.ys() / static_cast<double>(n);
  const double r = ridge >= 0.0 ? ridge : 1e-10 * gram.trace();
  gram.diagonal().array() += r;
  Eigen::LDLT<MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success)
    raise(ErrorCode::SingularSystem, "normal equations are not factorizable");
  VectorXd beta = solver.solve(rhs);
  const double residual = (gram * beta - rhs).norm();
  const double scale = gram.norm() * beta.norm() + rhs.norm();
  if (!beta.allFinite() || residual > 1e-8 * std::max(scale, 1e-300))
    raise(ErrorCode::SingularSystem, "normal equations solved too inaccurately");
  return beta;
}

std::pair<FilterOutcome, MainFilterTrace> filter_main_step(const Dataset& dataset,
                                                           const MainFilterConfig& cfg) {
  cfg.validate();
  const Index n = dataset.n();
  const Index d = dataset.dim();
  if (n < std::max<Index>(d + 1, 8))
    raise(ErrorCode::TooFewSamples, "main filter needs n >= max(d+1, 8)");

  MainFilterTrace trace;
  const double eps = cfg.epsilon;

  // (a) OLS anchor and robust residual scale.
  const VectorXd beta_prime = ols(dataset, cfg.ridge);
  trace.beta_ols = beta_prime;
  const VectorXd resid = dataset.ys() - dataset.xs() * beta_prime;
  const double sigma_p = robust_scale_iqr(resid);
  trace.sigma_prime = sigma_p;

  if (sigma_p <= 0.0) {
    if (resid.cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, dataset.ys().cwiseAbs().maxCoeff()))
      raise(ErrorCode::DegenerateScale, "residual IQR vanished on nonzero residuals");
    // Interpolation regime: the anchor is exact.
    return {Estimate{beta_prime}, trace};
  }
  if (eps <= 0.0) return {Estimate{beta_prime}, trace};

  const double logl = clamped_log_inv(eps);
  const double nn = static_cast<double>(n);
  const double log3 = std::pow(std::log(static_cast<double>(d) * nn / cfg.tau), 3.0);
  const double log1 = std::log(static_cast<double>(d) * nn / cfg.tau);
  const double c_gauss = cfg.tail_consts.first;
  const double c_prod = cfg.tail_consts.second;

  auto filtered_from_cut = [&](const std::vector<double>& mags, double cut, MainStage stage)
      -> std::pair<FilterOutcome, MainFilterTrace> {
    std::vector<Index> keep, removed;
    for (Index i = 0; i < n; ++i) {
      if (mags[static_cast<std::size_t>(i)] <= cut)
        keep.push_back(i);
      else
        removed.push_back(i);
    }
    trace.stage = stage;
    return {Filtered{dataset.subset(keep), std::move(removed)}, trace};
  };

  // (b) residual-variance test.
  const double resid_second = resid.squaredNorm() / nn;
  if (resid_second >= (1.0 + cfg.variance_test_const * eps * logl) * sigma_p * sigma_p) {
    std::vector<double> mags(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) mags[static_cast<std::size_t>(i)] = std::abs(resid(i));
    auto budget = [&](double t) {
      return c_gauss * std::exp(-t * t / (4.0 * sigma_p * sigma_p)) +
             eps * eps * sigma_p * sigma_p / (t * t * log3);
    };
    const auto t_opt = threshold_search(mags, budget, 0.0);
    if (!t_opt)
      raise(ErrorCode::NoThresholdFound, "residual-variance test fired but no threshold qualifies");
    trace.threshold = *t_opt;
    return filtered_from_cut(mags, *t_opt, MainStage::YFilter);
  }

  // (c) set aside large residuals; direction of the leftover residual mass.
  const double u_cut = cfg.u_cut_mult * std::sqrt(logl) * sigma_p;
  std::vector<Index> core;  // S' \ U
  core.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    if (std::abs(resid(i)) <= u_cut) core.push_back(i);
  trace.u_size = n - static_cast<Index>(core.size());
  if (core.empty()) raise(ErrorCode::DegenerateScale, "every sample exceeded the U cutoff");
  const double nc = static_cast<double>(core.size());

  VectorXd w_prime = VectorXd::Zero(d);
  for (Index i : core) w_prime += resid(i) * dataset.x(i);
  w_prime /= nc;
  trace.w_prime_norm = w_prime.norm();

  // (d) variance test along w over all of S'.
  if (trace.w_prime_norm > 0.0) {
    const VectorXd w = w_prime / trace.w_prime_norm;
    const VectorXd wx = dataset.xs() * w;
    const double second = wx.squaredNorm() / nn;
    if (second >= 1.0 + cfg.variance_test_const * eps * logl) {
      std::vector<double> mags(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) mags[static_cast<std::size_t>(i)] = std::abs(wx(i));
      auto budget = [&](double t) {
        return c_gauss * std::exp(-t * t / 4.0) + eps * eps / (t * t * log3);
      };
      const auto t_opt = threshold_search(mags, budget, 0.0);
      if (!t_opt)
        raise(ErrorCode::NoThresholdFound, "covariate test fired but no threshold qualifies");
      trace.threshold = *t_opt;
      return filtered_from_cut(mags, *t_opt, MainStage::XFilter);
    }
  }

  // (e) product filter on (y - beta'.x) x over S' \ U, centered at its mean.
  MatrixXd g(static_cast<Index>(core.size()), d);
  for (std::size_t j = 0; j < core.size(); ++j)
    g.row(static_cast<Index>(j)) = resid(core[j]) * dataset.xs().row(core[j]);
  MatrixXd gc = g.rowwise() - w_prime.transpose();
  MatrixXd m = gc.transpose() * gc / nc;
  m = 0.5 * (m + m.transpose());
  const EigenPair top = top_eigenpair(m);
  trace.lambda_star = std::abs(top.lambda_star);

  if (*trace.lambda_star >= (1.0 + cfg.spectral_test_const * eps * logl * logl) * sigma_p * sigma_p) {
    const double delta = 3.0 * std::sqrt(eps * *trace.lambda_star) / sigma_p;
    trace.delta = delta;
    // Magnitudes carry units of sigma' * (x units); normalize by sigma' so the
    // exponential budget reads exp(-T/16).
    std::vector<double> mags(core.size());
    const VectorXd proj = g * top.v_star;
    for (std::size_t j = 0; j < core.size(); ++j)
      mags[j] = std::abs(proj(static_cast<Index>(j))) / sigma_p;
    auto budget = [&](double t) {
      return c_prod * std::exp(-t / 16.0) + eps / (t * t * log1);
    };
    const auto t_opt = threshold_search(mags, budget, delta);
    if (!t_opt)
      raise(ErrorCode::NoThresholdFound, "product test fired but no threshold qualifies");
    trace.threshold = *t_opt;

    // Keep U (re-added) plus the core samples under the cut.
    const double cut = *t_opt + delta;
    std::vector<std::uint8_t> drop(static_cast<std::size_t>(n), 0);
    for (std::size_t j = 0; j < core.size(); ++j)
      if (mags[j] > cut) drop[static_cast<std::size_t>(core[j])] = 1;
    std::vector<Index> keep, removed;
    for (Index i = 0; i < n; ++i) {
      if (drop[static_cast<std::size_t>(i)])
        removed.push_back(i);
      else
        keep.push_back(i);
    }
    trace.stage = MainStage::YXFilter;
    return {Filtered{dataset.subset(keep), std::move(removed)}, trace};
  }

  // (f) all tests passed: the normal equations pin beta' near beta.
  trace.stage = MainStage::Accept;
  return {Estimate{beta_prime}, trace};
}

MainEstimateResult estimate_main(const Dataset& dataset, const MainFilterConfig& cfg) {
  cfg.validate();
  MainEstimateResult result;
  Dataset current = dataset;
  const Index limit = cfg.max_iterations > 0 ? cfg.max_iterations : 2 * dataset.n();
  for (Index it = 0; it <= limit; ++it) {
    if (it == limit)
      raise(ErrorCode::IterationLimitExceeded, "main filter failed to terminate");
    try {
      auto [outcome, trace] = filter_main_step(current, cfg);
      if (auto* est = std::get_if<Estimate>(&outcome)) {
        result.beta_hat = est->beta_hat;
        result.iterations.push_back({trace, {}});
        return result;
      }
      auto& filtered = std::get<Filtered>(outcome);
      MainIterationAudit audit{trace, {}};
      audit.removed_provenance.reserve(filtered.removed_indices.size());
      for (Index idx : filtered.removed_indices)
        audit.removed_provenance.push_back(current.provenance()[static_cast<std::size_t>(idx)]);
      result.iterations.push_back(std::move(audit));
      if (filtered.dataset.n() >= current.n())
        raise(ErrorCode::IterationLimitExceeded, "filter step did not shrink the dataset");
      current = std::move(filtered.dataset);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoThresholdFound) throw;
      result.beta_hat = ols(current, cfg.ridge);
      result.fallback_used = true;
      return result;
    }
  }
  raise(ErrorCode::IterationLimitExceeded, "unreachable");
}

}  // namespace robustlr
