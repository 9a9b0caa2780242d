#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fgmi/rng.hpp"

namespace fgmi {

enum class GlmFamily { Logistic, Linear };

struct GlmFit {
  GlmFamily family = GlmFamily::Linear;
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  // (X'X)^-1 for the linear family; the covariance is residual_sd^2 times this.
  Eigen::MatrixXd unscaled_covariance;
  std::optional<double> residual_sd;
  double df_residual = 0.0;
  bool converged = false;
  int n_iterations = 0;
};

struct GlmDraw {
  Eigen::VectorXd coefficients;
  double residual_sd = 0.0;  // linear family only
};

/// Maximum likelihood fit: IRLS for the logistic family, least squares for the
/// linear family. Throws NumericalError("singular design") on rank deficiency
/// and NumericalError("separation detected") when a logistic fit diverges.
GlmFit fit_glm(std::span<const double> outcome, const Eigen::MatrixXd& design, GlmFamily family,
               std::vector<std::string> names = {});

/// Posterior-style parameter draw for proper imputation. Logistic: multivariate
/// normal around the estimate. Linear: sigma^2 from RSS / chi^2_{df}, then the
/// coefficients from N(beta_hat, sigma^2 (X'X)^-1).
GlmDraw draw_glm_params(const GlmFit& fit, Rng& rng);

/// Multivariate normal draw; accepts positive-semidefinite (including zero) covariance.
Eigen::VectorXd draw_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance, Rng& rng);

/// Indices of a maximal linearly independent subset of columns, in increasing
/// order. Column 0 is always kept when it is nonzero.
std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& design);

double expit(double x);

}  // namespace fgmi
