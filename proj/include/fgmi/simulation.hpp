#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fgmi/data.hpp"
#include "fgmi/rng.hpp"

namespace fgmi {

// Cumulative incidence of cause 1 specified directly as a Fine–Gray model with
// baseline F0(t) = p (1 - exp(-b1 t^a1)); cause-2 times given D = 2 follow a
// Weibull PH model with coefficients beta*_1, beta*_2.
struct FgDgmParams {
  double p = 0.15;
  double a1 = 0.75;
  double b1 = 1.0;
  double beta1 = 0.75;
  double beta2 = 0.5;
  double a2 = 0.75;
  double b2 = 1.0;
  double beta1_star = 0.75;
  double beta2_star = 0.5;

  void validate() const;
};

// Weibull cause-specific hazards h_k(t) = a_k b_k t^(a_k - 1) exp(g_k1 X + g_k2 Z).
struct CsDgmParams {
  double a1 = 1.0, b1 = 1.0, gamma11 = 0.0, gamma12 = 0.0;
  double a2 = 1.0, b2 = 1.0, gamma21 = 0.0, gamma22 = 0.0;

  void validate() const;
};

using Dgm = std::variant<FgDgmParams, CsDgmParams>;

enum class CensoringType { None, Administrative, Random };

struct CensoringSpec {
  CensoringType type = CensoringType::None;
  double rate = 0.49;  // exponential censoring rate
};

// Simulated data with covariates {X, Z}; `censoring_times` holds the
// potential censoring time of every record whenever censoring was applied.
struct SimulatedData {
  CompetingRisksData data;
  std::vector<double> censoring_times;
};

struct Covariates {
  std::vector<double> z;
  std::vector<double> x;
};

/// Z ~ N(0, 1), X | Z ~ Bernoulli(expit(Z)).
Covariates gen_covariates(std::size_t n, Rng& rng);

/// Inverse of P(T <= t | D = 1, X, Z) under the FG mechanism, with eta = b1 X + b2 Z.
double fg_inverse_time(double u, double eta, const FgDgmParams& params);

/// Indirect generation under a correctly specified Fine–Gray model (no censoring).
CompetingRisksData gen_fg_correct(std::size_t n, const FgDgmParams& params, Rng& rng);

/// Latent Weibull times per cause; T = min, D = argmin (no censoring).
CompetingRisksData gen_cs_latent(std::size_t n, const CsDgmParams& params, Rng& rng);

CompetingRisksData generate(const Dgm& dgm, std::size_t n, Rng& rng);

/// T = min(C, T), D = 0 when C < T, with C ~ Exp(rate).
SimulatedData apply_censoring(const CompetingRisksData& data, const CensoringSpec& spec, Rng& rng);

/// eta0 with mean_i expit(eta0 + eta1 z_i) = target, by bisection on [-20, 20].
double solve_mar_intercept(std::span<const double> z, double eta1, double target);

/// Masks `covariate` with P(missing | z) = expit(eta0 + eta1 z), z the `by`
/// covariate. Returns eta0.
double impose_mar(CompetingRisksData& data, double eta1, double target_prob, Rng& rng,
                  const std::string& covariate = "X", const std::string& by = "Z");

/// True F1(t | X, Z): closed form for the FG mechanism, adaptive quadrature of
/// the cause-1 subdensity for the cause-specific mechanism.
double true_cuminc(const Dgm& dgm, double x, double z, double t);
/// Cause-2 analogue for the cause-specific mechanism (used for checks).
double true_cuminc_cause2(const CsDgmParams& params, double x, double z, double t);

struct WeibullFit {
  double shape = 1.0;
  double rate = 1.0;
  Eigen::VectorXd gamma;
  // Covariance of (log shape, log rate, gamma).
  Eigen::MatrixXd covariance;
  double loglik = 0.0;
  int n_iterations = 0;
};

/// Parametric Weibull PH fit by full-likelihood Newton–Raphson.
WeibullFit fit_weibull_ph(std::span<const double> time, std::span<const int> event, const Eigen::MatrixXd& x);

/// Cause-specific Weibull PH fits on a large censored FG dataset ("least false"
/// cause-specific parameters).
CsDgmParams calibrate_cs_params(const FgDgmParams& fg, const CensoringSpec& censoring, std::size_t n_big, Rng& rng);

/// Fine–Gray coefficients (X, Z) on a large dataset from the cause-specific
/// mechanism, with censoring times treated as known.
Eigen::Vector2d least_false_beta(const CsDgmParams& params, const CensoringSpec& censoring, std::size_t n_big,
                                 Rng& rng);

}  // namespace fgmi
