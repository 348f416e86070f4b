#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "robustlr/filter_main.hpp"
#include "robustlr/robust_stats.hpp"
#include "robustlr/rng.hpp"
#include "robustlr/synth.hpp"

using namespace robustlr;

TEST_CASE("generate_clean: zero beta and zero noise give zero labels") {
  RegressionInstance inst;
  inst.beta = VectorXd::Zero(1);
  inst.sigma = 0.0;
  inst.seed = 3;
  const Dataset d = generate_clean(inst, 3);
  CHECK(d.ys().cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.has_mask());
  for (Index i = 0; i < d.n(); ++i) CHECK_FALSE(d.is_outlier(i));
}

TEST_CASE("generate_clean: noiseless labels satisfy y = beta.x exactly") {
  RegressionInstance inst;
  inst.beta = VectorXd::Constant(1, 2.0);
  inst.sigma = 0.0;
  inst.seed = 4;
  const Dataset d = generate_clean(inst, 1000);
  for (Index i = 0; i < d.n(); ++i) CHECK(d.y(i) == doctest::Approx(2.0 * d.x(i)(0)).epsilon(1e-15));
}

TEST_CASE("generate_clean: empirical response variance matches sigma_y^2") {
  const Index d = 50;
  RegressionInstance inst;
  inst.beta = VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  inst.sigma = 1.0;
  inst.seed = 99;
  const Dataset data = generate_clean(inst, 20000);
  const double mean = data.ys().mean();
  const double var = (data.ys().array() - mean).square().mean();
  CHECK(var > 1.9);  // sigma_y^2 = sigma^2 + |beta|^2 = 2
  CHECK(var < 2.1);
}

TEST_CASE("generate_clean is deterministic under the seed") {
  RegressionInstance inst;
  inst.beta = VectorXd::Constant(4, 0.5);
  inst.sigma = 1.0;
  inst.seed = 1234;
  const Dataset a = generate_clean(inst, 50);
  const Dataset b = generate_clean(inst, 50);
  CHECK(a.xs() == b.xs());
  CHECK(a.ys() == b.ys());
}

TEST_CASE("generate_clean: explicit covariance must be PSD") {
  RegressionInstance inst;
  inst.beta = VectorXd::Zero(2);
  MatrixXd bad(2, 2);
  bad << 1, 0, 0, -1;
  inst.covariance = ExplicitCovariance{bad};
  CHECK_THROWS_WITH_AS(generate_clean(inst, 10), doctest::Contains("InvalidCovariance"), Error);
}

TEST_CASE("corrupt: eps = 0 leaves the data untouched") {
  RegressionInstance inst;
  inst.beta = VectorXd::Constant(3, 1.0);
  inst.seed = 8;
  const Dataset clean = generate_clean(inst, 40);
  const Dataset out = corrupt(clean, {AdaptiveShift{}, 0.0}, 5);
  CHECK(out.xs() == clean.xs());
  CHECK(out.ys() == clean.ys());
}

TEST_CASE("corrupt: replaces exactly floor(eps n) rows and masks them") {
  RegressionInstance inst;
  inst.beta = VectorXd::Constant(3, 1.0);
  inst.seed = 8;
  const Dataset clean = generate_clean(inst, 10);
  const Dataset out = corrupt(clean, {AdaptiveShift{}, 0.2}, 5);
  Index masked = 0;
  for (Index i = 0; i < out.n(); ++i)
    if (out.is_outlier(i)) ++masked;
  CHECK(masked == 2);
  CHECK(sym_diff_progress(out, out) == doctest::Approx(2.0 * 2.0 / 10.0));
}

TEST_CASE("corrupt: epsilon >= 1/2 rejected; pre-masked data rejected") {
  RegressionInstance inst;
  inst.beta = VectorXd::Constant(2, 1.0);
  inst.seed = 9;
  const Dataset clean = generate_clean(inst, 20);
  CHECK_THROWS_WITH_AS(corrupt(clean, {AdaptiveShift{}, 0.5}, 1),
                       doctest::Contains("EpsilonTooLarge"), Error);
  const Dataset once = corrupt(clean, {AdaptiveShift{}, 0.2}, 1);
  CHECK_THROWS_AS(corrupt(once, {AdaptiveShift{}, 0.2}, 2), Error);
}

TEST_CASE("corrupt: huber and label-flip adversaries mark the right count") {
  RegressionInstance inst;
  inst.beta = VectorXd::Constant(2, 1.0);
  inst.seed = 10;
  const Dataset clean = generate_clean(inst, 50);
  HuberAdditive h;
  h.y_center = 25.0;
  const Dataset hub = corrupt(clean, {h, 0.1}, 3);
  Index masked = 0;
  for (Index i = 0; i < hub.n(); ++i)
    if (hub.is_outlier(i)) ++masked;
  CHECK(masked == 5);

  const Dataset flip = corrupt(clean, {LabelFlip{2.0}, 0.1}, 3);
  for (Index i = 0; i < flip.n(); ++i) {
    if (flip.is_outlier(i)) {
      CHECK(flip.x(i) == clean.x(i));
      CHECK(flip.y(i) == doctest::Approx(-2.0 * clean.y(i)));
    }
  }
}

TEST_CASE("adaptive_shift drags OLS while the main filter recovers") {
  // Oracle: the ground-truth beta of the instance.
  const Index d = 20;
  RegressionInstance inst;
  inst.beta = VectorXd::Unit(d, 2) * 3.0;
  inst.sigma = 1.0;
  inst.epsilon = 0.1;
  inst.seed = 31;
  const Dataset clean = generate_clean(inst, 10000);
  const Dataset bad = corrupt(clean, {AdaptiveShift{}, 0.1}, 77);

  const double ols_err = ell2_error(ols(bad, -1.0), inst.beta);
  MainFilterConfig cfg;
  cfg.epsilon = 0.1;
  const auto main_res = estimate_main(bad, cfg);
  const double main_err = ell2_error(main_res.beta_hat, inst.beta);
  CHECK(ols_err >= 5.0 * main_err);
}

TEST_CASE("whiten: identity is a no-op, scalar covariance rescales") {
  MatrixXd xs(2, 2);
  xs << 2, 0, 0, 2;
  VectorXd ys(2);
  ys << 1, 2;
  const Dataset data(xs, ys);
  const Dataset same = whiten(data, MatrixXd::Identity(2, 2));
  CHECK((same.xs() - data.xs()).norm() == doctest::Approx(0.0));

  const Dataset scaled = whiten(data, 4.0 * MatrixXd::Identity(2, 2));
  CHECK(scaled.xs()(0, 0) == doctest::Approx(1.0));
  CHECK(scaled.ys() == data.ys());
}

TEST_CASE("whiten: rejects non-PSD estimates") {
  MatrixXd xs = MatrixXd::Random(5, 2);
  VectorXd ys = VectorXd::Random(5);
  MatrixXd bad(2, 2);
  bad << 1, 0, 0, 0;
  CHECK_THROWS_WITH_AS(whiten(Dataset(xs, ys), bad), doctest::Contains("NotPositiveDefinite"),
                       Error);
}

TEST_CASE("whiten: perturbed-identity covariance whitens to near-identity") {
  const Index d = 20;
  Rng rng(17);
  // Random symmetric perturbation with eigenvalues in [0.95, 1.05].
  MatrixXd a(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = rng.gaussian();
  MatrixXd sym = 0.5 * (a + a.transpose());
  sym *= 0.05 / std::abs(top_eigenpair(sym).lambda_star);
  MatrixXd sigma = MatrixXd::Identity(d, d) + sym;

  RegressionInstance inst;
  inst.beta = VectorXd::Unit(d, 0);
  inst.sigma = 1.0;
  inst.covariance = ExplicitCovariance{sigma};
  inst.seed = 23;
  const Dataset data = generate_clean(inst, 20000);
  const Dataset white = whiten(data, sigma);
  MatrixXd emp = white.xs().transpose() * white.xs() / static_cast<double>(white.n());
  const double dev = std::abs(top_eigenpair(emp - MatrixXd::Identity(d, d)).lambda_star);
  CHECK(dev < 0.1);

  // After whitening with the true covariance the good-set diagnostics hold
  // with the effective beta_w = Sigma^{1/2} beta.
  const MatrixXd root = covariance_sqrt(inst.covariance, d);
  const VectorXd beta_w = root * inst.beta;
  const double sigma_y = std::sqrt(inst.sigma * inst.sigma + beta_w.squaredNorm());
  const auto report = verify_good_set(white, beta_w, sigma_y, 0.1, 0.1, 8);
  CHECK(report.all_pass());
}

TEST_CASE("diagonal-spiked covariance generates Var(v.x) = 1 - c2") {
  const Index d = 6;
  RegressionInstance inst;
  inst.beta = VectorXd::Zero(d);
  inst.sigma = 0.0;
  DiagonalSpikedCovariance spike;
  spike.direction = VectorXd::Unit(d, 1);
  spike.c2 = 1.0 / 3.0;
  inst.covariance = spike;
  inst.seed = 77;
  const Dataset data = generate_clean(inst, 40000);
  const VectorXd proj = data.xs() * spike.direction;
  const double var = (proj.array() - proj.mean()).square().mean();
  CHECK(var == doctest::Approx(2.0 / 3.0).epsilon(0.05));
}
