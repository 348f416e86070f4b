#include "robustlr/robust_stats.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "robustlr/rng.hpp"

namespace robustlr {

namespace {

// 2 * Phi^{-1}(3/4): divisor making the IQR a consistent sigma estimate.
constexpr double kIqrToSigma = 1.348979500392164;

double quantile_type7(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t i = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(i);
  if (i + 1 >= n) return sorted.back();
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

VectorXd random_unit_vector(Index d, Rng& rng) {
  VectorXd v(d);
  double norm2 = 0.0;
  do {
    for (Index i = 0; i < d; ++i) v(i) = rng.gaussian();
    norm2 = v.squaredNorm();
  } while (norm2 == 0.0);
  return v / std::sqrt(norm2);
}

// Log-spaced grid of test thresholds covering the observed range.
std::vector<double> threshold_grid(double t_max) {
  std::vector<double> grid;
  for (double t = 1.0; t <= std::max(2.0, t_max) * 1.5; t *= 1.5) grid.push_back(t);
  return grid;
}

}  // namespace

double robust_scale_iqr(const std::vector<double>& values) {
  if (values.size() < 4) raise(ErrorCode::TooFewSamples, "IQR scale needs at least 4 values");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const double q25 = quantile_type7(sorted, 0.25);
  const double q75 = quantile_type7(sorted, 0.75);
  return (q75 - q25) / kIqrToSigma;
}

double robust_scale_iqr(const VectorXd& values) {
  return robust_scale_iqr(std::vector<double>(values.data(), values.data() + values.size()));
}

EmpiricalYXMoments yx_moments(const Dataset& dataset) {
  const Index n = dataset.n();
  const Index d = dataset.dim();
  if (n == 0) raise(ErrorCode::EmptyDataset, "moments of an empty dataset");
  MatrixXd z = dataset.xs().array().colwise() * dataset.ys().array();  // rows are y_i * x_i
  VectorXd mean = z.colwise().mean().transpose();
  z.rowwise() -= mean.transpose();
  MatrixXd m_hat = (z.transpose() * z) / static_cast<double>(n);
  m_hat = 0.5 * (m_hat + m_hat.transpose());  // clear rounding asymmetry
  (void)d;
  return EmpiricalYXMoments{std::move(mean), std::move(m_hat)};
}

EigenPair top_eigenpair(const MatrixXd& m, double tol, int max_iter) {
  if (m.rows() != m.cols()) raise(ErrorCode::DimensionMismatch, "matrix must be square");
  if (!m.allFinite()) raise(ErrorCode::NonFiniteValue, "matrix must be finite");
  const Index d = m.rows();

  if (d <= 64) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(m);
    const VectorXd& evals = solver.eigenvalues();
    Index best = 0;
    for (Index i = 1; i < d; ++i)
      if (std::abs(evals(i)) > std::abs(evals(best))) best = i;
    VectorXd v = solver.eigenvectors().col(best);
    for (Index i = 0; i < d; ++i) {
      if (std::abs(v(i)) > 1e-14) {
        if (v(i) < 0) v = -v;
        break;
      }
    }
    return EigenPair{evals(best), std::move(v), true};
  }

  // Shifted power iteration: c +/- m both have the target eigenvalue dominant
  // for one of the two shifts; take the larger |lambda|.
  const double c = m.norm() + 1e-300;
  auto iterate = [&](const MatrixXd& a) {
    VectorXd v(d);
    for (Index i = 0; i < d; ++i) v(i) = 1.0 + static_cast<double>(i) / static_cast<double>(d);
    v /= v.norm();
    double lambda_prev = 0.0;
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
      const VectorXd w = a * v;
      const double lambda = v.dot(w);
      // Rayleigh deltas converge long before the eigenvector does, so the
      // residual gates convergence as well. The shift cancels in the residual
      // and |lambda - c| is the magnitude of the corresponding eigenvalue of m.
      const double resid = (w - lambda * v).norm();
      const double scale = std::max(std::abs(lambda - c), c * 1e-12);
      if (it > 0 && std::abs(lambda - lambda_prev) <= tol * (1.0 + std::abs(lambda)) &&
          resid <= 5.0 * tol * scale) {
        converged = true;
        break;
      }
      lambda_prev = lambda;
      const double norm = w.norm();
      if (norm == 0.0) return std::make_pair(VectorXd(VectorXd::Zero(d)), true);  // a == 0
      v = w / norm;
    }
    return std::make_pair(v, converged);
  };

  auto [v_hi, ok_hi] = iterate(MatrixXd(m + c * MatrixXd::Identity(d, d)));
  auto [v_lo, ok_lo] = iterate(MatrixXd(c * MatrixXd::Identity(d, d) - m));
  const double lam_hi = v_hi.dot(m * v_hi);
  const double lam_lo = v_lo.dot(m * v_lo);

  bool pick_hi = std::abs(lam_hi) >= std::abs(lam_lo);
  VectorXd v = pick_hi ? v_hi : v_lo;
  double lambda = pick_hi ? lam_hi : lam_lo;
  bool converged = pick_hi ? ok_hi : ok_lo;
  for (Index i = 0; i < d; ++i) {
    if (std::abs(v(i)) > 1e-14) {
      if (v(i) < 0) v = -v;
      break;
    }
  }
  return EigenPair{lambda, std::move(v), converged};
}

std::optional<double> threshold_search(const std::vector<double>& magnitudes,
                                       const std::function<double(double)>& tail_budget,
                                       double shift) {
  if (magnitudes.empty()) return std::nullopt;
  std::vector<double> sorted(magnitudes);
  for (double m : sorted)
    if (!std::isfinite(m)) raise(ErrorCode::NonFiniteValue, "magnitudes must be finite");
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  // The empirical tail is piecewise constant between observed magnitudes, so
  // candidates just below each distinct magnitude cover every possible value
  // of the inequality. At such a candidate the tail counts the tie block.
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;  // tie block [i, j)
    const double below = std::nextafter(sorted[i], -std::numeric_limits<double>::infinity());
    const double t = below - shift;
    if (t > 0.0) {
      const double tail = static_cast<double>(sorted.size() - i) / n;
      if (tail < 1.0 && tail > tail_budget(t)) return t;
    }
    i = j;
  }
  return std::nullopt;
}

double sym_diff_progress(const Dataset& reference, const Dataset& current) {
  const Index n_ref = reference.n();
  if (current.provenance().size() != static_cast<std::size_t>(current.n()))
    raise(ErrorCode::ProvenanceLost, "current dataset has no row provenance");
  Index clean_present = 0;
  Index corrupt_present = 0;
  for (Index i = 0; i < current.n(); ++i) {
    const Index src = current.provenance()[static_cast<std::size_t>(i)];
    if (src < 0 || src >= n_ref)
      raise(ErrorCode::ProvenanceLost, "provenance index outside reference dataset");
    if (reference.is_outlier(src))
      ++corrupt_present;
    else
      ++clean_present;
  }
  // |S| = n_ref: the adversary replaces points one for one, so the clean
  // multiset has as many rows as the reference. Deleted clean rows are the
  // ones not present.
  return static_cast<double>(n_ref - clean_present + corrupt_present) / static_cast<double>(n_ref);
}

ConditionReport verify_good_set(const Dataset& dataset, const VectorXd& beta, double sigma_y,
                                double epsilon, double tau, int n_directions,
                                const GoodSetOptions& opts) {
  if (sigma_y <= 0.0) raise(ErrorCode::InvalidArgument, "sigma_y must be positive");
  const Index n = dataset.n();
  const Index d = dataset.dim();
  const double nn = static_cast<double>(n);
  const double log_n_tau = std::log(nn / tau);
  ConditionReport report;

  // (i) per-sample boundedness of yX and y.
  double max_yx = 0.0, max_y = 0.0;
  MatrixXd z = dataset.xs().array().colwise() * dataset.ys().array();
  for (Index i = 0; i < n; ++i) {
    max_yx = std::max(max_yx, z.row(i).norm() / sigma_y);
    max_y = std::max(max_y, std::abs(dataset.y(i)) / sigma_y);
  }
  const double bound_yx = 4.0 * std::sqrt(static_cast<double>(d)) * log_n_tau;
  const double bound_y = std::sqrt(4.0 * log_n_tau);
  report.conditions.push_back({"i_yx_bound", max_yx <= bound_yx, max_yx, bound_yx});
  report.conditions.push_back({"i_y_bound", max_y <= bound_y, max_y, bound_y});

  // (ii) directional tail of y(v.X)/sigma_y against the exponential budget.
  {
    Rng rng(opts.direction_seed);
    double worst_excess = -std::numeric_limits<double>::infinity();
    bool ok = true;
    const double logq = std::pow(log_n_tau, opts.tail_log_exponent);
    for (int k = 0; k < n_directions; ++k) {
      VectorXd v = random_unit_vector(d, rng);
      const VectorXd proj = (z * v) / sigma_y;
      for (int sign = 0; sign < 2; ++sign) {
        const double s = sign == 0 ? 1.0 : -1.0;
        const double top = (s * proj).maxCoeff();
        for (double t : threshold_grid(top)) {
          const double tail =
              static_cast<double>((s * proj.array() > t).count()) / nn;
          const double budget = 16.0 * std::exp(-t / 16.0) + epsilon / (t * t * logq);
          const double excess = tail - budget;
          if (excess > worst_excess) worst_excess = excess;
          if (tail > budget) ok = false;
        }
      }
    }
    report.conditions.push_back({"ii_tail", ok, worst_excess, 0.0});
  }

  // (iii) mean concentration, (iv) covariance concentration of yX.
  const EmpiricalYXMoments mom = yx_moments(dataset);
  const double mean_err = (mom.beta_s - beta).norm();
  const double mean_bound = opts.big_const * sigma_y * epsilon;
  report.conditions.push_back({"iii_mean", mean_err <= mean_bound, mean_err, mean_bound});

  // M_S is centered at the true beta.
  MatrixXd m_s = mom.m_hat + (mom.beta_s - beta) * (mom.beta_s - beta).transpose();
  MatrixXd dev = m_s - sigma_y * sigma_y * MatrixXd::Identity(d, d) - beta * beta.transpose();
  const double cov_err = std::abs(top_eigenpair(dev).lambda_star);
  const double cov_bound = opts.big_const * sigma_y * sigma_y * epsilon;
  report.conditions.push_back({"iv_cov", cov_err <= cov_bound, cov_err, cov_bound});
  return report;
}

ConditionReport verify_representative(const Dataset& dataset, const VectorXd& beta, double sigma,
                                      const std::vector<VectorXd>& probes, double epsilon,
                                      double tau, const RepresentativeOptions& opts) {
  const Index n = dataset.n();
  const Index d = dataset.dim();
  const double nn = static_cast<double>(n);
  const double log_n_tau = std::log(nn / tau);
  const double C = opts.big_const;
  ConditionReport report;
  Rng rng(opts.direction_seed);
  std::vector<VectorXd> dirs;
  dirs.reserve(static_cast<std::size_t>(opts.n_directions));
  for (int k = 0; k < opts.n_directions; ++k) dirs.push_back(random_unit_vector(d, rng));

  // Condition family 1: X alone.
  {
    double max_x = 0.0;
    for (Index i = 0; i < n; ++i) max_x = std::max(max_x, dataset.x(i).norm());
    const double bound = C * std::sqrt(static_cast<double>(d) * log_n_tau);
    report.conditions.push_back({"1i_x_bound", max_x <= bound, max_x, bound});

    const double denom = std::log(static_cast<double>(d) *
                                  std::log(static_cast<double>(d) / (epsilon * tau)));
    bool ok = true;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& v : dirs) {
      const VectorXd proj = (dataset.xs() * v).cwiseAbs();
      for (double t : threshold_grid(proj.maxCoeff())) {
        const double tail = static_cast<double>((proj.array() > t).count()) / nn;
        const double budget = 5.0 * std::exp(-t * t / 4.0) + epsilon * epsilon / (t * t * denom);
        worst = std::max(worst, tail - budget);
        if (tail > budget) ok = false;
      }
    }
    report.conditions.push_back({"1ii_x_tail", ok, worst, 0.0});

    const double mean_norm = dataset.xs().colwise().mean().norm();
    report.conditions.push_back({"1iii_x_mean", mean_norm <= C * epsilon, mean_norm, C * epsilon});

    MatrixXd cov = dataset.xs().transpose() * dataset.xs() / nn - MatrixXd::Identity(d, d);
    const double cov_dev = std::abs(top_eigenpair(cov).lambda_star);
    report.conditions.push_back({"1iv_x_cov", cov_dev <= C * epsilon, cov_dev, C * epsilon});
  }

  // Condition families 2 and 3: residuals per probe.
  const double t_prime = opts.t_prime_mult * std::sqrt(std::log(1.0 / epsilon));
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const VectorXd& bp = probes[p];
    const std::string tag = "p" + std::to_string(p) + "_";
    const double sig_bp = std::sqrt(sigma * sigma + (beta - bp).squaredNorm());
    VectorXd resid = dataset.ys() - dataset.xs() * bp;

    double max_r = 0.0;
    for (Index i = 0; i < n; ++i) max_r = std::max(max_r, std::abs(resid(i)));
    const double bound_2i = C * std::sqrt(static_cast<double>(d) * log_n_tau) * sig_bp;
    report.conditions.push_back({tag + "2i_resid_bound", max_r <= bound_2i, max_r, bound_2i});

    {
      const double denom = std::log(static_cast<double>(d) *
                                    std::log(static_cast<double>(d) / (epsilon * tau)));
      const VectorXd araw = resid.cwiseAbs();
      bool ok = true;
      double worst = -std::numeric_limits<double>::infinity();
      for (double t : threshold_grid(araw.maxCoeff())) {
        const double tail = static_cast<double>((araw.array() > t).count()) / nn;
        const double budget = 5.0 * std::exp(-t * t / (4.0 * sig_bp * sig_bp)) +
                              epsilon * epsilon * sig_bp * sig_bp / (t * t * denom);
        worst = std::max(worst, tail - budget);
        if (tail > budget) ok = false;
      }
      report.conditions.push_back({tag + "2ii_resid_tail", ok, worst, 0.0});
    }

    const double mean_r = std::abs(resid.mean());
    report.conditions.push_back(
        {tag + "2iii_resid_mean", mean_r <= C * epsilon * sig_bp, mean_r, C * epsilon * sig_bp});
    const double second = resid.squaredNorm() / nn;
    const double dev2 = std::abs(second - sig_bp * sig_bp);
    report.conditions.push_back({tag + "2iv_resid_var", dev2 <= C * epsilon * sig_bp * sig_bp, dev2,
                                 C * epsilon * sig_bp * sig_bp});

    // Restricted set R_{beta', T'}.
    std::vector<Index> keep;
    for (Index i = 0; i < n; ++i)
      if (std::abs(resid(i)) <= t_prime * sig_bp) keep.push_back(i);
    if (keep.size() < 4) {
      report.conditions.push_back({tag + "3_restricted_nonempty", false,
                                   static_cast<double>(keep.size()), 4.0});
      continue;
    }
    const double nr = static_cast<double>(keep.size());
    MatrixXd g(static_cast<Index>(keep.size()), d);  // rows are (y - beta'.x) x
    for (std::size_t j = 0; j < keep.size(); ++j)
      g.row(static_cast<Index>(j)) = resid(keep[j]) * dataset.xs().row(keep[j]);

    double max_g = 0.0;
    for (Index i = 0; i < g.rows(); ++i) max_g = std::max(max_g, g.row(i).norm());
    const double bound_3i =
        C * std::sqrt(static_cast<double>(d) / epsilon) * log_n_tau * sig_bp;
    report.conditions.push_back({tag + "3i_g_bound", max_g <= bound_3i, max_g, bound_3i});

    {
      bool ok = true;
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& v : dirs) {
        const VectorXd proj = (g * v) / sig_bp;
        for (double t : threshold_grid(proj.maxCoeff() + 1.0)) {
          const double tail = static_cast<double>((proj.array() > t).count()) / nr;
          const double budget = 24.0 * std::exp(-t / 16.0) + epsilon / (t * t * log_n_tau);
          worst = std::max(worst, tail - budget);
          if (tail > budget) ok = false;
        }
      }
      report.conditions.push_back({tag + "3ii_g_tail", ok, worst, 0.0});
    }

    VectorXd g_mean = g.colwise().mean().transpose();
    const VectorXd target = beta - bp;
    const double dev3 = (g_mean - target).norm();
    const double bound_3iii = C * epsilon * std::log(1.0 / epsilon) * sig_bp;
    report.conditions.push_back({tag + "3iii_g_mean", dev3 <= bound_3iii, dev3, bound_3iii});

    MatrixXd gc = g.rowwise() - target.transpose();
    MatrixXd m = gc.transpose() * gc / nr;
    MatrixXd dev_m = m - sig_bp * sig_bp * MatrixXd::Identity(d, d) - target * target.transpose();
    const double dev4 = std::abs(top_eigenpair(dev_m).lambda_star);
    const double l = std::log(1.0 / epsilon);
    const double bound_3iv = C * l * l * epsilon * sig_bp * sig_bp;
    report.conditions.push_back({tag + "3iv_g_cov", dev4 <= bound_3iv, dev4, bound_3iv});
  }
  return report;
}

}  // namespace robustlr
