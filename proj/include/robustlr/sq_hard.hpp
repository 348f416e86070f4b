#pragma once

#include <array>
#include <functional>
#include <utility>
#include <vector>

#include "robustlr/model.hpp"
#include "robustlr/rng.hpp"

namespace robustlr {

/// Weighted univariate Gaussian mixture.
struct MixtureComponent {
  double weight = 0.0;
  double mean = 0.0;
  double variance = 1.0;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;

  /// First three raw moments in closed form.
  std::array<double, 3> moments() const;
  double weight_sum() const;
  double pdf(double x) const;
  double sample(Rng& rng) const;
  void validate() const;
};

/// Three-component mixtures matching the first three standard normal moments
/// while carrying mass 1-eps on a Gaussian with variance 2/3.
MixtureSpec mixture_p1(double eps);                  // eps in [1e-6, 0.42]
MixtureSpec mixture_p2(double eps);                  // eps in [0.35, 0.78]
MixtureSpec mixture_p3(double eps);                  // eps in [0.49, 1)
MixtureSpec mixture_p4(double mu, double eps);       // |mu| < sqrt(eps)/10000

/// Moment-matched contamination of N(mu, 2/3): dispatches on |mu| to P1..P4,
/// reflecting so the clean component sits at +mu. Returns the mixture and the
/// contamination fraction eps_mu it uses.
std::pair<MixtureSpec, double> a_mu(double mu, double eps);

/// chi^2(N(mu1, var1), N(mu2, var2)); needs 2 var2 > var1.
double chi2_gaussians(double mu1, double var1, double mu2, double var2);

/// Correlation chi^2 of two Gaussians relative to N(0,1).
double chi2_correlation_gaussians(double mu1, double var1, double mu2, double var2);

/// chi_D(B, C) for mixtures B, C and a single-component Gaussian reference D,
/// by bilinear expansion over component pairs.
double chi2_mixture(const MixtureSpec& b, const MixtureSpec& c, const MixtureSpec& reference);

/// Hidden-direction hard instance: y is drawn from the reweighted marginal,
/// the v-coordinate of X from a_mu(mu(y), eps), the rest standard normal.
struct HardInstanceSpec {
  VectorXd v;         // hidden unit direction
  double epsilon = 0.1;
  double c1 = 0.1;    // beta = c1 sqrt(eps) v, requires 0 < c1 <= 1/10
  std::uint64_t seed = 0;

  double c2() const;                      // solves c2 + (c1 (1-c2))^2 eps = 1/3
  VectorXd beta() const;                  // c1 sqrt(eps) v
  double sigma() const;                   // sqrt(1 - beta^T Sigma beta)
  RegressionInstance as_instance() const;
  void validate() const;
};

class HardInstanceSampler {
 public:
  explicit HardInstanceSampler(HardInstanceSpec spec, int grid_cells = 100000,
                               double grid_halfwidth = 12.0);

  Dataset sample(Index n, std::uint64_t seed) const;
  const HardInstanceSpec& spec() const { return spec_; }
  double mu_of_y(double y) const;

 private:
  HardInstanceSpec spec_;
  double grid_halfwidth_;
  std::vector<double> grid_y_;    // cell edges
  std::vector<double> grid_cdf_;  // cumulative weights at cell edges
};

Dataset hard_instance(const HardInstanceSpec& spec, Index n, std::uint64_t seed);

enum class OracleMode { Honest, Adversarial };

/// STAT-oracle simulator: empirical expectation of a [0,1]-valued query plus a
/// perturbation within +-tolerance. Honest mode adds uniform noise; the
/// adversarial mode picks the endpoint maximizing the supplied objective
/// (default: distance from the exact value, ties toward +tolerance).
double stat_oracle(const Dataset& data,
                   const std::function<double(const VectorXd&, double)>& query, double tolerance,
                   OracleMode mode, Rng& rng,
                   const std::function<double(double)>* adversary_objective = nullptr);

/// Distribution-input flavor: the expectation is taken over a freshly held
/// sample of n_eval points drawn from the hard instance.
double stat_oracle(const HardInstanceSampler& distribution, Index n_eval, std::uint64_t sample_seed,
                   const std::function<double(const VectorXd&, double)>& query, double tolerance,
                   OracleMode mode, Rng& rng,
                   const std::function<double(double)>* adversary_objective = nullptr);

}  // namespace robustlr
