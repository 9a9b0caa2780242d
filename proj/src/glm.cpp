#include "fgmi/glm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "fgmi/errors.hpp"

namespace fgmi {

namespace {

constexpr int kMaxIrls = 50;
// |eta| beyond this means fitted probabilities are numerically 0 or 1.
constexpr double kSeparationEta = 23.0;

void check_rank(const Eigen::MatrixXd& design) {
  if (design.rows() < design.cols() || design.cols() == 0) throw NumericalError("singular design");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols()) throw NumericalError("singular design");
}

double binomial_deviance(std::span<const double> y, const Eigen::VectorXd& eta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // -2 log-likelihood with log(1 + e^eta) evaluated stably.
    const double e = eta(i);
    const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    dev += 2.0 * (log1pexp - y[static_cast<std::size_t>(i)] * e);
  }
  return dev;
}

}  // namespace

double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GlmFit fit_glm(std::span<const double> outcome, const Eigen::MatrixXd& design, GlmFamily family,
               std::vector<std::string> names) {
  if (static_cast<Eigen::Index>(outcome.size()) != design.rows()) {
    throw DataError("glm: outcome and design row counts differ");
  }
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != design.cols()) {
    throw DataError("glm: names and design columns differ");
  }
  check_rank(design);
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  Eigen::Map<const Eigen::VectorXd> y(outcome.data(), n);

  GlmFit fit;
  fit.family = family;
  fit.names = std::move(names);
  fit.df_residual = static_cast<double>(n - p);

  if (family == GlmFamily::Linear) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    fit.coefficients = qr.solve(y);
    const Eigen::VectorXd resid = y - design * fit.coefficients;
    const double rss = resid.squaredNorm();
    const double sigma2 = n > p ? rss / static_cast<double>(n - p) : 0.0;
    fit.unscaled_covariance = (design.transpose() * design).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    fit.unscaled_covariance = 0.5 * (fit.unscaled_covariance + fit.unscaled_covariance.transpose()).eval();
    fit.covariance = sigma2 * fit.unscaled_covariance;
    fit.residual_sd = std::sqrt(sigma2);
    fit.converged = true;
    return fit;
  }

  for (double v : outcome) {
    if (v != 0.0 && v != 1.0) throw DataError("glm: logistic outcome must be 0/1");
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = design * beta;
  double dev = binomial_deviance(outcome, eta);
  Eigen::MatrixXd info;
  bool converged = false;
  int iter = 0;
  while (!converged && iter < kMaxIrls) {
    ++iter;
    Eigen::VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = expit(eta(i));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    info = design.transpose() * w.asDiagonal() * design;
    const Eigen::VectorXd score = design.transpose() * (y - mu);
    const Eigen::VectorXd step = info.ldlt().solve(score);
    Eigen::VectorXd candidate = beta + step;
    Eigen::VectorXd cand_eta = design * candidate;
    double cand_dev = binomial_deviance(outcome, cand_eta);
    for (int h = 0; h < 30 && !(cand_dev <= dev); ++h) {
      candidate = beta + std::ldexp(1.0, -(h + 1)) * step;
      cand_eta = design * candidate;
      cand_dev = binomial_deviance(outcome, cand_eta);
    }
    if (!std::isfinite(cand_dev)) throw NumericalError("separation detected in logistic model");
    converged = std::abs(cand_dev - dev) / (std::abs(cand_dev) + 0.1) < 1e-10;
    beta = candidate;
    eta = cand_eta;
    dev = cand_dev;
  }
  if (!converged || eta.cwiseAbs().maxCoeff() > kSeparationEta) {
    throw NumericalError("separation detected in logistic model");
  }
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = expit(eta(i));
    w(i) = mu * (1.0 - mu);
  }
  info = design.transpose() * w.asDiagonal() * design;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff()) {
    throw NumericalError("separation detected in logistic model");
  }
  fit.coefficients = beta;
  fit.covariance = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  fit.converged = converged;
  fit.n_iterations = iter;
  return fit;
}

Eigen::VectorXd draw_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance, Rng& rng) {
  std::normal_distribution<double> norm;
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = norm(rng);
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() == Eigen::Success) return mean + llt.matrixL() * z;
  // Semidefinite fallback through the eigendecomposition.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return mean + es.eigenvectors() * root.asDiagonal() * z;
}

GlmDraw draw_glm_params(const GlmFit& fit, Rng& rng) {
  GlmDraw draw;
  if (fit.family == GlmFamily::Logistic) {
    draw.coefficients = draw_mvn(fit.coefficients, fit.covariance, rng);
    return draw;
  }
  const double sigma = fit.residual_sd.value_or(0.0);
  if (sigma > 0.0 && fit.df_residual > 0.0) {
    std::chi_squared_distribution<double> chisq(fit.df_residual);
    const double rss = sigma * sigma * fit.df_residual;
    draw.residual_sd = std::sqrt(rss / chisq(rng));
  }
  draw.coefficients = draw_mvn(fit.coefficients, draw.residual_sd * draw.residual_sd * fit.unscaled_covariance, rng);
  return draw;
}

std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& design) {
  std::vector<Eigen::Index> keep;
  if (design.cols() == 0) return keep;
  // Greedy in column order: keep a column if it raises the rank.
  Eigen::MatrixXd kept(design.rows(), 0);
  for (Eigen::Index c = 0; c < design.cols(); ++c) {
    Eigen::MatrixXd trial(design.rows(), kept.cols() + 1);
    trial << kept, design.col(c);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(1e-9);
    if (qr.rank() == trial.cols()) {
      kept = std::move(trial);
      keep.push_back(c);
    }
  }
  return keep;
}

}  // namespace fgmi
