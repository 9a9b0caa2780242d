#include <cmath>
#include <random>

#include "doctest.h"
#include "fgmi/errors.hpp"
#include "fgmi/glm.hpp"

using namespace fgmi;

TEST_CASE("fit_glm closed forms") {
  std::vector<double> y(50, 0.0);
  for (int i = 0; i < 20; ++i) y[i] = 1.0;
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(50, 1);
  auto fit = fit_glm(y, ones, GlmFamily::Logistic);
  CHECK(fit.coefficients(0) == doctest::Approx(std::log(0.4 / 0.6)).epsilon(1e-8));
  CHECK(fit.coefficients(0) == doctest::Approx(-0.4055).epsilon(1e-3));
  // Var of the logit of a proportion: 1 / (n p (1 - p)).
  CHECK(fit.covariance(0, 0) == doctest::Approx(1.0 / (50 * 0.4 * 0.6)).epsilon(1e-6));
  CHECK(fit.converged);

  std::vector<double> zeros(30, 0.0);
  CHECK_THROWS_WITH_AS(fit_glm(zeros, Eigen::MatrixXd::Ones(30, 1), GlmFamily::Logistic),
                       doctest::Contains("separation"), NumericalError);

  Eigen::MatrixXd design(6, 2);
  std::vector<double> lin(6);
  for (int i = 0; i < 6; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = i;
    lin[i] = 2.0 * i;
  }
  auto ls = fit_glm(lin, design, GlmFamily::Linear);
  CHECK(ls.coefficients(1) == doctest::Approx(2.0));
  CHECK(std::abs(ls.coefficients(0)) < 1e-10);
  CHECK(*ls.residual_sd < 1e-10);

  Eigen::MatrixXd dup(6, 3);
  dup << design, 2.0 * design.col(1);
  CHECK_THROWS_WITH_AS(fit_glm(lin, dup, GlmFamily::Linear), "singular design", NumericalError);

  // Perfectly separated slope.
  Eigen::MatrixXd sep(8, 2);
  std::vector<double> ys(8);
  for (int i = 0; i < 8; ++i) {
    sep(i, 0) = 1.0;
    sep(i, 1) = i;
    ys[i] = i >= 4 ? 1.0 : 0.0;
  }
  CHECK_THROWS_AS(fit_glm(ys, sep, GlmFamily::Logistic), NumericalError);
}

TEST_CASE("logistic fit against a brute-force likelihood maximum") {
  Rng rng = substream(21);
  std::normal_distribution<double> norm;
  const int n = 400;
  Eigen::MatrixXd x(n, 2);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = norm(rng);
    y[i] = uniform_open(rng) < expit(-0.3 + 0.8 * x(i, 1)) ? 1.0 : 0.0;
  }
  auto fit = fit_glm(y, x, GlmFamily::Logistic);
  auto loglik = [&](double a, double b) {
    double l = 0.0;
    for (int i = 0; i < n; ++i) {
      const double pr = expit(a + b * x(i, 1));
      l += y[i] * std::log(pr) + (1 - y[i]) * std::log(1 - pr);
    }
    return l;
  };
  double best = -1e300, ba = 0, bb = 0;
  for (double a = -1.0; a <= 0.5; a += 0.005) {
    for (double b = 0.0; b <= 1.6; b += 0.005) {
      const double l = loglik(a, b);
      if (l > best) {
        best = l;
        ba = a;
        bb = b;
      }
    }
  }
  CHECK(std::abs(fit.coefficients(0) - ba) < 0.006);
  CHECK(std::abs(fit.coefficients(1) - bb) < 0.006);
}

TEST_CASE("draw_glm_params") {
  GlmFit fixed;
  fixed.family = GlmFamily::Logistic;
  fixed.coefficients = Eigen::Vector2d(0.3, -1.2);
  fixed.covariance = Eigen::Matrix2d::Zero();
  Rng rng = substream(5);
  auto d = draw_glm_params(fixed, rng);
  CHECK(d.coefficients(0) == 0.3);
  CHECK(d.coefficients(1) == -1.2);

  // A logistic fit on an uncentred covariate has strongly correlated estimates.
  Rng data_rng = substream(6);
  const int n = 300;
  Eigen::MatrixXd x(n, 2);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = 1.0 + 2.0 * uniform_open(data_rng);
    y[i] = uniform_open(data_rng) < expit(-1.0 + 0.7 * x(i, 1)) ? 1.0 : 0.0;
  }
  auto fit = fit_glm(y, x, GlmFamily::Logistic);
  const int draws = 10000;
  Eigen::MatrixXd sample(draws, 2);
  Rng draw_rng = substream(7);
  for (int k = 0; k < draws; ++k) sample.row(k) = draw_glm_params(fit, draw_rng).coefficients.transpose();
  const Eigen::RowVector2d mean = sample.colwise().mean();
  const Eigen::MatrixXd centred = sample.rowwise() - mean;
  const Eigen::Matrix2d emp = centred.transpose() * centred / (draws - 1.0);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) CHECK(std::abs(emp(a, b) / fit.covariance(a, b) - 1.0) < 0.10);
  }

  Rng again = substream(7);
  CHECK(draw_glm_params(fit, again).coefficients == sample.row(0).transpose());

  // Linear family: sigma^2 = RSS / chi^2_df has mean RSS / (df - 2).
  Eigen::MatrixXd lx(40, 2);
  std::vector<double> ly(40);
  std::normal_distribution<double> norm;
  for (int i = 0; i < 40; ++i) {
    lx(i, 0) = 1.0;
    lx(i, 1) = i / 10.0;
    ly[i] = 1.0 + 0.5 * lx(i, 1) + norm(data_rng);
  }
  auto lfit = fit_glm(ly, lx, GlmFamily::Linear);
  const double rss = *lfit.residual_sd * *lfit.residual_sd * lfit.df_residual;
  double mean_s2 = 0.0;
  Rng lrng = substream(8);
  for (int k = 0; k < 20000; ++k) {
    const double s = draw_glm_params(lfit, lrng).residual_sd;
    mean_s2 += s * s;
  }
  mean_s2 /= 20000;
  CHECK(mean_s2 == doctest::Approx(rss / (lfit.df_residual - 2.0)).epsilon(0.03));
}

TEST_CASE("independent_columns") {
  Eigen::MatrixXd d(5, 4);
  for (int i = 0; i < 5; ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = i;
    d(i, 2) = 3.0 * i;
    d(i, 3) = 0.0;
  }
  auto keep = independent_columns(d);
  REQUIRE(keep.size() == 2);
  CHECK(keep[0] == 0);
  CHECK(keep[1] == 1);
}
