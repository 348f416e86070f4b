#include "robustlr/sq_hard.hpp"

#include <algorithm>
#include <cmath>

namespace robustlr {

namespace {

constexpr double kTwoThirds = 2.0 / 3.0;

double gauss_pdf(double x, double mean, double variance) {
  const double z = x - mean;
  return std::exp(-z * z / (2.0 * variance)) / std::sqrt(2.0 * M_PI * variance);
}

void check_variance_box(double value, const char* name) {
  if (!(value > 0.0 && value < 2.0))
    raise(ErrorCode::RangeViolation,
          std::string(name) + " variance left (0, 2): " + std::to_string(value));
}

/// Solve f(e) = target for monotone f by bisection on [lo, hi].
double bisect(const std::function<double(double)>& f, double target, double lo, double hi) {
  double flo = f(lo) - target;
  double fhi = f(hi) - target;
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    raise(ErrorCode::RootFindFailure, "dispatch equation does not bracket a root");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid) - target;
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (fhi > 0.0)) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

MixtureSpec reflect(MixtureSpec m) {
  for (auto& c : m.components) c.mean = -c.mean;
  return m;
}

}  // namespace

std::array<double, 3> MixtureSpec::moments() const {
  double m1 = 0.0, m2 = 0.0, m3 = 0.0;
  for (const auto& c : components) {
    m1 += c.weight * c.mean;
    m2 += c.weight * (c.mean * c.mean + c.variance);
    m3 += c.weight * (c.mean * c.mean * c.mean + 3.0 * c.mean * c.variance);
  }
  return {m1, m2, m3};
}

double MixtureSpec::weight_sum() const {
  double s = 0.0;
  for (const auto& c : components) s += c.weight;
  return s;
}

double MixtureSpec::pdf(double x) const {
  double p = 0.0;
  for (const auto& c : components) p += c.weight * gauss_pdf(x, c.mean, c.variance);
  return p;
}

double MixtureSpec::sample(Rng& rng) const {
  double u = rng.uniform();
  for (const auto& c : components) {
    if (u < c.weight || &c == &components.back())
      return c.mean + std::sqrt(c.variance) * rng.gaussian();
    u -= c.weight;
  }
  return 0.0;  // unreachable
}

void MixtureSpec::validate() const {
  if (std::abs(weight_sum() - 1.0) > 1e-12)
    raise(ErrorCode::RangeViolation, "mixture weights must sum to 1");
  for (const auto& c : components) {
    if (c.weight < 0.0) raise(ErrorCode::RangeViolation, "mixture weights must be nonnegative");
    if (c.variance <= 0.0) raise(ErrorCode::RangeViolation, "mixture variances must be positive");
  }
}

MixtureSpec mixture_p1(double eps) {
  // eps = 0 degenerates to N(0, 2/3), which breaks the unit second moment;
  // the dispatch drives eps as low as ~9 eps mu_cut^2, so the floor only
  // rejects the truly degenerate neighborhood.
  if (eps < 1e-12 || eps > 0.42)
    raise(ErrorCode::EpsOutOfRange, "P1 needs eps in [1e-12, 0.42]");
  const double om = 1.0 - eps;
  const double a = kTwoThirds - 1.0 / (3.0 * om) - 2.0 * eps / (27.0 * om * om);
  const double b = kTwoThirds - 1.0 / (12.0 * om) + eps / (108.0 * om * om);
  check_variance_box(a, "P1.a");
  check_variance_box(b, "P1.b");
  const double se = std::sqrt(eps);
  MixtureSpec m{{{eps / 9.0, -1.0 / se, a},
                 {8.0 * eps / 9.0, 1.0 / (2.0 * se), b},
                 {om, -se / (3.0 * om), kTwoThirds}}};
  m.validate();
  return m;
}

MixtureSpec mixture_p2(double eps) {
  if (eps < 0.35 || eps > 0.78) raise(ErrorCode::EpsOutOfRange, "P2 needs eps in [0.35, 0.78]");
  const double om = 1.0 - eps;
  const double e2 = eps * eps, e3 = eps * eps * eps;
  const double a = -(-162.0 * e3 + 161.0 * e2 + 144.0 * eps - 135.0) / (243.0 * om * om * eps);
  const double b = -(-648.0 * e3 + 1121.0 * e2 - 342.0 * eps - 135.0) / (972.0 * om * om * eps);
  check_variance_box(a, "P2.a");
  check_variance_box(b, "P2.b");
  const double se = std::sqrt(eps);
  MixtureSpec m{{{eps / 9.0, -2.0 / (3.0 * se), a},
                 {8.0 * eps / 9.0, 1.0 / (3.0 * se), b},
                 {om, -2.0 * se / (9.0 * om), kTwoThirds}}};
  m.validate();
  return m;
}

MixtureSpec mixture_p3(double eps) {
  if (eps < 0.49 || eps >= 1.0) raise(ErrorCode::EpsOutOfRange, "P3 needs eps in [0.49, 1)");
  const double om = 1.0 - eps;
  const double e2 = eps * eps, e3 = eps * eps * eps;
  const double a = 2.0 * (27.0 * e2 - 18.0 * eps + 7.0) / (3.0 * (27.0 * e2 - 12.0 * eps + 1.0));
  const double c = 2.0 * (243.0 * e3 - 105.0 * e2 - 15.0 * eps + 5.0) /
                   (3.0 * (3.0 * eps - 1.0) * (9.0 * eps - 1.0) * (9.0 * eps - 1.0));
  check_variance_box(a, "P3.a");
  check_variance_box(c, "P3.c");
  MixtureSpec m{{{om / 8.0, -1.0 / std::sqrt(9.0 * om / 8.0), a},
                 {om, std::sqrt(2.0) / (3.0 * std::sqrt(om)), kTwoThirds},
                 {(9.0 * eps - 1.0) / 8.0, -std::sqrt(8.0 * om) / (9.0 * eps - 1.0), c}}};
  m.validate();
  return m;
}

MixtureSpec mixture_p4(double mu, double eps) {
  if (eps <= 0.0 || eps > 0.5) raise(ErrorCode::EpsOutOfRange, "P4 needs eps in (0, 1/2]");
  if (!(std::abs(mu) < std::sqrt(eps) / 10000.0))
    raise(ErrorCode::RangeViolation, "P4 needs |mu| < sqrt(eps)/10000");
  const bool negate = mu < 0.0;
  mu = std::abs(mu);

  // Clean component N(mu, 2/3) with weight 1-eps; the two noise Gaussians at
  // mu1 and -c*mu1 carry weights eps c^3/(1+c^3) and eps/(1+c^3). (c, mu1)
  // solve the first-moment equation together with the requirement that the
  // noise means absorb all of the second moment surplus, which leaves a 2x2
  // linear system for the noise variances.
  double c = 1.0, mu1 = 0.0, s1 = 1.0, s2 = 1.0;
  if (mu < 1e-300) {
    mu1 = -std::sqrt((1.0 - eps) / (3.0 * eps));
  } else {
    const double surplus = (1.0 - eps) * (1.0 / 3.0 - mu * mu);  // eps mu1^2 c^2(c+1)/(1+c^3)
    const double k = std::sqrt(surplus / eps);
    const double t = (1.0 - eps) * mu / (eps * k);
    c = (2.0 - t * t + t * std::sqrt(4.0 - 3.0 * t * t)) / (2.0 * (1.0 - t * t));
    mu1 = -std::sqrt(surplus * (1.0 - c + c * c)) / (std::sqrt(eps) * c);
    const double c3 = c * c * c;
    const double q = -(1.0 + c3) * (1.0 - eps) * (mu * mu * mu + 2.0 * mu) / (3.0 * eps * mu1);
    s2 = ((1.0 + c3) - q) / (1.0 + c);
    s1 = ((1.0 + c3) - s2) / c3;
  }
  const double c3 = c * c * c;
  const double e1 = c3 * eps / (1.0 + c3);
  const double e2 = eps / (1.0 + c3);

  if (!(s1 > 0.9 && s1 < 1.1 && s2 > 0.9 && s2 < 1.1))
    raise(ErrorCode::RangeViolation, "P4 noise variances left (0.9, 1.1)");
  const double mean_cap = 2.0 / std::sqrt(eps);
  if (!(std::abs(mu1) < mean_cap && std::abs(c * mu1) < mean_cap))
    raise(ErrorCode::RangeViolation, "P4 noise means left (-2/sqrt(eps), 2/sqrt(eps))");

  MixtureSpec m{{{e1, mu1, s1}, {e2, -c * mu1, s2}, {1.0 - eps, mu, kTwoThirds}}};
  m.validate();
  return negate ? reflect(m) : m;
}

std::pair<MixtureSpec, double> a_mu(double mu, double eps) {
  if (eps <= 0.0 || eps > 0.5) raise(ErrorCode::EpsOutOfRange, "a_mu needs eps in (0, 1/2]");
  const double t = std::abs(mu);
  const double p4_cut = std::sqrt(eps) / 10000.0;

  if (t <= p4_cut) return {mixture_p4(mu, eps), eps};

  MixtureSpec m;
  double eps_mu = 0.0;
  if (t <= 0.3) {
    eps_mu = bisect([](double e) { return std::sqrt(e) / (3.0 * (1.0 - e)); }, t, 1e-12, 1.0 - 1e-12);
    m = mixture_p1(eps_mu);
  } else if (t < 0.7) {
    eps_mu =
        bisect([](double e) { return 2.0 * std::sqrt(e) / (9.0 * (1.0 - e)); }, t, 1e-12, 1.0 - 1e-12);
    m = mixture_p2(eps_mu);
  } else {
    eps_mu = 1.0 - 2.0 / (9.0 * mu * mu);
    m = mixture_p3(eps_mu);
  }
  // The printed constructions put the weight-(1-eps_mu) component at -|mu|;
  // reflect so it sits at mu.
  bool match = false;
  for (const auto& comp : m.components)
    if (std::abs(comp.weight - (1.0 - eps_mu)) < 1e-9 && std::abs(comp.mean - mu) < 1e-9)
      match = true;
  if (!match) m = reflect(m);
  return {m, eps_mu};
}

double chi2_gaussians(double mu1, double var1, double mu2, double var2) {
  if (var1 <= 0.0 || var2 <= 0.0) raise(ErrorCode::InvalidArgument, "variances must be positive");
  const double denom = 2.0 * var2 - var1;
  if (denom <= 0.0) raise(ErrorCode::DivergentChiSquare, "chi^2 requires 2 var2 > var1");
  const double diff = mu1 - mu2;
  return var2 / (std::sqrt(var1) * std::sqrt(denom)) * std::exp(diff * diff / denom) - 1.0;
}

double chi2_correlation_gaussians(double mu1, double var1, double mu2, double var2) {
  if (var1 <= 0.0 || var2 <= 0.0) raise(ErrorCode::InvalidArgument, "variances must be positive");
  const double denom = var1 + var2 - var1 * var2;
  if (denom <= 0.0)
    raise(ErrorCode::DivergentChiSquare, "correlation chi^2 requires var1 + var2 - var1 var2 > 0");
  const double expo = -(mu1 * mu1 * (var2 - 1.0) + 2.0 * mu1 * mu2 + mu2 * mu2 * (var1 - 1.0)) /
                      (2.0 * var1 * (var2 - 1.0) - 2.0 * var2);
  return std::exp(expo) / std::sqrt(denom) - 1.0;
}

double chi2_mixture(const MixtureSpec& b, const MixtureSpec& c, const MixtureSpec& reference) {
  if (reference.components.size() != 1)
    raise(ErrorCode::InvalidArgument, "reference must be a single Gaussian");
  const auto& ref = reference.components.front();
  const double rsd = std::sqrt(ref.variance);
  double total = 0.0;  // accumulates 1 + chi_D(B, C)
  for (const auto& cb : b.components) {
    for (const auto& cc : c.components) {
      // Affine change of variables reduces a general Gaussian reference to N(0,1).
      const double m1 = (cb.mean - ref.mean) / rsd;
      const double m2 = (cc.mean - ref.mean) / rsd;
      const double v1 = cb.variance / ref.variance;
      const double v2 = cc.variance / ref.variance;
      total += cb.weight * cc.weight * (1.0 + chi2_correlation_gaussians(m1, v1, m2, v2));
    }
  }
  return total - 1.0;
}

double HardInstanceSpec::c2() const {
  // c2 + (c1 (1 - c2))^2 eps = 1/3; with u = 1 - c2 this is a quadratic in u,
  // written in the cancellation-free form of its small root.
  const double a = c1 * c1 * epsilon;
  const double disc = 1.0 - 8.0 * a / 3.0;
  if (disc < 0.0) raise(ErrorCode::InvalidArgument, "no admissible c2 for these parameters");
  const double u = (4.0 / 3.0) / (1.0 + std::sqrt(disc));
  return 1.0 - u;
}

VectorXd HardInstanceSpec::beta() const { return c1 * std::sqrt(epsilon) * v.normalized(); }

double HardInstanceSpec::sigma() const {
  const double b2 = c1 * c1 * epsilon;  // |beta|^2
  return std::sqrt(1.0 - b2 * (1.0 - c2()));
}

RegressionInstance HardInstanceSpec::as_instance() const {
  RegressionInstance inst;
  inst.beta = beta();
  inst.sigma = sigma();
  inst.covariance = DiagonalSpikedCovariance{v.normalized(), c2()};
  inst.epsilon = epsilon;
  inst.seed = seed;
  return inst;
}

void HardInstanceSpec::validate() const {
  if (v.size() < 1 || v.norm() == 0.0) raise(ErrorCode::InvalidArgument, "need a nonzero direction");
  if (!(c1 > 0.0) || c1 > 0.1) raise(ErrorCode::ConfigError, "c1 must lie in (0, 1/10]");
  if (epsilon <= 0.0 || epsilon > 0.5) raise(ErrorCode::EpsOutOfRange, "epsilon must lie in (0, 1/2]");
  const double residual = c2() + std::pow(c1 * (1.0 - c2()), 2) * epsilon - 1.0 / 3.0;
  if (std::abs(residual) > 1e-10) raise(ErrorCode::InvalidArgument, "c2 equation unsatisfied");
}

HardInstanceSampler::HardInstanceSampler(HardInstanceSpec spec, int grid_cells,
                                         double grid_halfwidth)
    : spec_(std::move(spec)), grid_halfwidth_(grid_halfwidth) {
  spec_.validate();
  if (grid_cells < 10) raise(ErrorCode::InvalidArgument, "grid needs at least 10 cells");

  grid_y_.resize(static_cast<std::size_t>(grid_cells) + 1);
  grid_cdf_.resize(static_cast<std::size_t>(grid_cells) + 1);
  const double h = 2.0 * grid_halfwidth / static_cast<double>(grid_cells);
  double cum = 0.0;
  grid_cdf_[0] = 0.0;
  grid_y_[0] = -grid_halfwidth;
  for (int i = 0; i < grid_cells; ++i) {
    const double y_mid = -grid_halfwidth + (static_cast<double>(i) + 0.5) * h;
    const double mu = mu_of_y(y_mid);
    double eps_mu = spec_.epsilon;
    if (std::abs(mu) > std::sqrt(spec_.epsilon) / 10000.0) eps_mu = a_mu(mu, spec_.epsilon).second;
    if (eps_mu >= 1.0 - 1e-9)
      raise(ErrorCode::GridOverflow, "eps_mu approaches 1 inside the sampling grid");
    cum += gauss_pdf(y_mid, 0.0, 1.0) / (1.0 - eps_mu) * h;
    grid_y_[static_cast<std::size_t>(i) + 1] = -grid_halfwidth + static_cast<double>(i + 1) * h;
    grid_cdf_[static_cast<std::size_t>(i) + 1] = cum;
  }
  for (auto& c : grid_cdf_) c /= cum;
}

double HardInstanceSampler::mu_of_y(double y) const {
  return spec_.c1 * (1.0 - spec_.c2()) * std::sqrt(spec_.epsilon) * y;
}

Dataset HardInstanceSampler::sample(Index n, std::uint64_t seed) const {
  if (n < 1) raise(ErrorCode::InvalidArgument, "need n >= 1 samples");
  const Index d = spec_.v.size();
  const VectorXd v = spec_.v.normalized();
  Rng rng(seed);
  MatrixXd xs(n, d);
  VectorXd ys(n);
  VectorXd z(d);
  for (Index i = 0; i < n; ++i) {
    // Inverse-CDF draw of y from the reweighted marginal (piecewise linear).
    const double u = rng.uniform();
    const auto it = std::upper_bound(grid_cdf_.begin(), grid_cdf_.end(), u);
    const std::size_t cell = std::min(
        grid_cdf_.size() - 2, static_cast<std::size_t>(std::max<std::ptrdiff_t>(
                                  0, (it - grid_cdf_.begin()) - 1)));
    const double c0 = grid_cdf_[cell], c1 = grid_cdf_[cell + 1];
    const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
    const double y = grid_y_[cell] + frac * (grid_y_[cell + 1] - grid_y_[cell]);

    const auto [mix, eps_mu] = a_mu(mu_of_y(y), spec_.epsilon);
    (void)eps_mu;
    const double xi = mix.sample(rng);
    for (Index j = 0; j < d; ++j) z(j) = rng.gaussian();
    const VectorXd x = z - (v.dot(z)) * v + xi * v;
    xs.row(i) = x.transpose();
    ys(i) = y;
  }
  return Dataset(std::move(xs), std::move(ys));
}

Dataset hard_instance(const HardInstanceSpec& spec, Index n, std::uint64_t seed) {
  return HardInstanceSampler(spec).sample(n, seed);
}

double stat_oracle(const Dataset& data,
                   const std::function<double(const VectorXd&, double)>& query, double tolerance,
                   OracleMode mode, Rng& rng,
                   const std::function<double(double)>* adversary_objective) {
  if (tolerance < 0.0) raise(ErrorCode::InvalidArgument, "tolerance must be nonnegative");
  double sum = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const double q = query(data.x(i), data.y(i));
    if (!(q >= 0.0 && q <= 1.0))
      raise(ErrorCode::QueryOutOfRange, "query must map into [0, 1]");
    sum += q;
  }
  const double exact = sum / static_cast<double>(data.n());
  if (tolerance == 0.0) return exact;
  if (mode == OracleMode::Honest) return exact + rng.uniform(-tolerance, tolerance);

  const double lo = exact - tolerance;
  const double hi = exact + tolerance;
  if (adversary_objective != nullptr)
    return (*adversary_objective)(hi) >= (*adversary_objective)(lo) ? hi : lo;
  return hi;  // both endpoints are equally far from the exact value
}

double stat_oracle(const HardInstanceSampler& distribution, Index n_eval, std::uint64_t sample_seed,
                   const std::function<double(const VectorXd&, double)>& query, double tolerance,
                   OracleMode mode, Rng& rng,
                   const std::function<double(double)>* adversary_objective) {
  if (n_eval < 1) raise(ErrorCode::InvalidArgument, "held sample needs n_eval >= 1");
  return stat_oracle(distribution.sample(n_eval, sample_seed), query, tolerance, mode, rng,
                     adversary_objective);
}

}  // namespace robustlr
