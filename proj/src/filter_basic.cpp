#include "robustlr/filter_basic.hpp"

#include <algorithm>
#include <cmath>

namespace robustlr {

std::pair<FilterOutcome, FilterStepTrace> filter_basic_step(const Dataset& dataset,
                                                            const BasicFilterConfig& cfg) {
  cfg.validate();
  const Index n = dataset.n();
  const Index d = dataset.dim();
  if (n < std::max<Index>(4, d + 1))
    raise(ErrorCode::TooFewSamples, "basic filter needs n >= max(4, d+1)");

  FilterStepTrace trace;
  const double sigma_y = robust_scale_iqr(dataset.ys());
  trace.sigma_y_hat = sigma_y;

  const EmpiricalYXMoments mom = yx_moments(dataset);

  if (sigma_y <= 0.0) {
    const double y_scale = dataset.ys().cwiseAbs().maxCoeff();
    if (y_scale > 0.0)
      raise(ErrorCode::DegenerateScale, "IQR scale of y vanished on nonzero labels");
    // All labels are exactly zero: zero moments certify the zero vector.
    return {Estimate{mom.beta_s}, trace};
  }

  MatrixXd shifted = mom.m_hat - sigma_y * sigma_y * MatrixXd::Identity(d, d) -
                     mom.beta_s * mom.beta_s.transpose();
  const EigenPair top = top_eigenpair(shifted);
  trace.lambda_star = std::abs(top.lambda_star);

  const double eps = cfg.epsilon;
  if (eps <= 0.0) return {Estimate{mom.beta_s}, trace};

  const double logl = clamped_log_inv(eps);
  const double accept_bound = cfg.spectral_const * sigma_y * sigma_y * eps * logl * logl;
  if (trace.lambda_star <= accept_bound) return {Estimate{mom.beta_s}, trace};

  trace.delta = 3.0 * std::sqrt(eps * trace.lambda_star) / sigma_y;

  std::vector<double> magnitudes(static_cast<std::size_t>(n));
  VectorXd proj = (dataset.xs().array().colwise() * dataset.ys().array()).matrix() * top.v_star;
  const double center = top.v_star.dot(mom.beta_s);
  for (Index i = 0; i < n; ++i)
    magnitudes[static_cast<std::size_t>(i)] = std::abs(proj(i) - center) / sigma_y;

  const double c_exp = cfg.tail_consts.first;
  const double c_poly = cfg.tail_consts.second;
  const double log_n_tau = std::log(static_cast<double>(n) / cfg.tau);
  auto budget = [&](double t) {
    return c_exp * std::exp(-t / 16.0) + c_poly * eps / (t * t * log_n_tau);
  };
  const std::optional<double> t_opt = threshold_search(magnitudes, budget, trace.delta);
  if (!t_opt)
    raise(ErrorCode::NoThresholdFound, "spectral test fired but no tail threshold qualifies");
  trace.threshold = *t_opt;

  const double cut = *t_opt + trace.delta;
  std::vector<Index> keep, removed;
  for (Index i = 0; i < n; ++i) {
    if (magnitudes[static_cast<std::size_t>(i)] <= cut)
      keep.push_back(i);
    else
      removed.push_back(i);
  }
  trace.removed = static_cast<Index>(removed.size());
  return {Filtered{dataset.subset(keep), std::move(removed)}, trace};
}

BasicEstimateResult estimate_basic(const Dataset& dataset, const BasicFilterConfig& cfg) {
  cfg.validate();
  BasicEstimateResult result;
  Dataset current = dataset;
  const Index limit = cfg.max_iterations > 0 ? cfg.max_iterations : 2 * dataset.n();
  for (Index it = 0; it <= limit; ++it) {
    if (it == limit)
      raise(ErrorCode::IterationLimitExceeded, "basic filter failed to terminate");
    try {
      auto [outcome, trace] = filter_basic_step(current, cfg);
      if (auto* est = std::get_if<Estimate>(&outcome)) {
        result.beta_hat = est->beta_hat;
        result.iterations.push_back({trace, {}});
        return result;
      }
      auto& filtered = std::get<Filtered>(outcome);
      BasicIterationAudit audit{trace, {}};
      audit.removed_provenance.reserve(filtered.removed_indices.size());
      for (Index idx : filtered.removed_indices)
        audit.removed_provenance.push_back(current.provenance()[static_cast<std::size_t>(idx)]);
      result.iterations.push_back(std::move(audit));
      if (filtered.dataset.n() >= current.n())
        raise(ErrorCode::IterationLimitExceeded, "filter step did not shrink the dataset");
      current = std::move(filtered.dataset);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoThresholdFound) throw;
      // The paper guarantees a threshold under the regularity conditions; at
      // desk scale it can be missing, in which case the current mean is the
      // best available estimate.
      result.beta_hat = yx_moments(current).beta_s;
      result.fallback_used = true;
      return result;
    }
  }
  raise(ErrorCode::IterationLimitExceeded, "unreachable");
}

VectorXd estimate_boosted(const Dataset& dataset, const BasicFilterConfig& cfg, int rounds) {
  if (rounds < 1) raise(ErrorCode::InvalidArgument, "need rounds >= 1");
  VectorXd acc = estimate_basic(dataset, cfg).beta_hat;
  for (int r = 1; r < rounds; ++r) {
    const Dataset adjusted = dataset.with_labels(dataset.ys() - dataset.xs() * acc);
    acc += estimate_basic(adjusted, cfg).beta_hat;
  }
  return acc;
}

}  // namespace robustlr
