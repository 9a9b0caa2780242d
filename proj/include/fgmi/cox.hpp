#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fgmi/data.hpp"
#include "fgmi/step_function.hpp"

namespace fgmi {

struct CoxOptions {
  int max_iterations = 50;
  double score_tolerance = 1e-9;
  double relative_loglik_tolerance = 1e-12;
  // Fits whose coefficients leave [-bound, bound] are treated as monotone likelihood.
  double separation_bound = 15.0;
};

// Proportional hazards fit (Breslow ties). When the outcome is (V, I(D=1)) on
// censoring-complete data this is the Fine–Gray model for cause 1.
struct CoxFit {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  StepFunction baseline_cumhaz;
  double loglik = 0.0;
  double loglik_null = 0.0;
  bool converged = false;
  int n_iterations = 0;
  Eigen::VectorXd score;
  std::size_t n_obs = 0;
  std::size_t n_events = 0;

  // Variance ingredients of the Breslow estimator:
  //   baseline_var(t)      = sum_{t_i <= t} d_i / S0(t_i)^2
  //   baseline_dbeta[k](t) = sum_{t_i <= t} d_i S1_k(t_i) / S0(t_i)^2  (= -dLambda0/dbeta_k)
  StepFunction baseline_var;
  std::vector<StepFunction> baseline_dbeta;

  double coefficient(const std::string& name) const;
  double std_error(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
};

/// Maximizes the Breslow partial likelihood by Newton–Raphson from beta = 0.
/// Throws NumericalError("singular information") when a covariate has no
/// contrast, and NumericalError("separation detected") on divergence.
CoxFit fit_cox(std::span<const double> time, std::span<const int> event, const Eigen::MatrixXd& x,
               std::vector<std::string> names, const CoxOptions& options = {});

/// Fine–Gray fit on a censoring-complete dataset: outcome (V, I(D=1)).
CoxFit fit_cox(const SubdistributionDataset& data, const std::vector<std::string>& formula,
               const CoxOptions& options = {});

/// Breslow cumulative baseline hazard at an arbitrary coefficient vector.
StepFunction breslow_cumhaz(std::span<const double> time, std::span<const int> event,
                            const Eigen::MatrixXd& x, const Eigen::VectorXd& beta);

/// Log partial likelihood (Breslow ties).
double cox_log_partial_likelihood(std::span<const double> time, std::span<const int> event,
                                  const Eigen::MatrixXd& x, const Eigen::VectorXd& beta);

using NamedValues = std::map<std::string, double>;

/// Linear predictor beta'z with z given by name; every coefficient must be supplied
/// and no unknown names are accepted.
double linear_predictor(const CoxFit& fit, const NamedValues& covariates);

/// F1(t | z) = 1 - exp{-exp(beta'z) Lambda0(t)}.
std::vector<double> predict_cuminc(const CoxFit& fit, const NamedValues& covariates,
                                   std::span<const double> times);

/// Delta-method standard error of log(-log(1 - F1(t | z))) = log Lambda0(t) + beta'z.
/// Combines the Breslow variance with the coefficient covariance through the
/// usual profile expansion:
///   var = sum d/S0^2 / Lambda0^2 + (z - e(t))' V (z - e(t)),
///   e(t) = sum d S1/S0^2 / Lambda0(t).
std::vector<double> cuminc_se(const CoxFit& fit, const NamedValues& covariates,
                              std::span<const double> times);

}  // namespace fgmi
