#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fgmi/data.hpp"
#include "fgmi/glm.hpp"
#include "fgmi/rng.hpp"
#include "fgmi/step_function.hpp"

namespace fgmi {

enum class ImputationMethod { FgSmc, CsSmc, FgApprox, CsApprox };
enum class CovariateModel { LogisticBinary, LinearNormal };
enum class OutcomeFlavor { FineGray, CauseSpecific };

struct ImputationConfig {
  ImputationMethod method = ImputationMethod::FgSmc;
  int iterations = 20;
  int rejection_cap = 10000;
  // Covariates with missing entries must appear here.
  std::map<std::string, CovariateModel> covariate_models;
  // When false the point estimates are used instead of posterior draws.
  bool draw_parameters = true;

  void validate() const;
};

OutcomeFlavor flavor_of(ImputationMethod method);
bool is_smc(ImputationMethod method);

// Proportional hazards contribution for one outcome: beta over all dataset
// covariates (dataset order) and the cumulative baseline hazard.
struct HazardComponent {
  Eigen::VectorXd beta;
  StepFunction cumhaz;
  Status cause = Status::Cause1;
};

// FG: one component evaluated at (V, I(D=1)). CS: one per cause at (T, I(D=k)).
struct SubstantiveModel {
  OutcomeFlavor flavor = OutcomeFlavor::FineGray;
  std::vector<HazardComponent> components;
};

/// log of [lambda0 e^{beta'x}]^{d} exp{-Lambda0 e^{beta'x}} summed over the
/// components, dropping factors constant in x.
double smc_log_density(const Eigen::VectorXd& x, const SubdistributionRecord& record,
                       const SubstantiveModel& model);
double smc_conditional_density(const Eigen::VectorXd& x, const SubdistributionRecord& record,
                               const SubstantiveModel& model);

/// Design row for the model of covariate j: intercept, the other covariates in
/// dataset order, then the outcome summaries used by the Approx flavor (none for SMC).
Eigen::RowVectorXd covariate_predictors(const SubdistributionRecord& record, std::size_t j,
                                        ImputationMethod method);

/// P(X_j = 1 | rest) for a binary covariate given the covariate-model linear
/// predictor (log-odds) and substantive parameters.
double smc_binary_probability(const SubdistributionRecord& record, std::size_t j,
                              const SubstantiveModel& model, double prior_logit);

/// One SMC update of covariate j on the listed rows, with given parameters.
/// `draw` holds the covariate-model coefficients over covariate_predictors.
void smc_impute_step(SubdistributionDataset& data, std::size_t j, const std::vector<std::size_t>& rows,
                     const SubstantiveModel& model, const GlmDraw& draw, CovariateModel type,
                     int rejection_cap, Rng& rng);

/// Fits the substantive model(s) on fully observed data and (optionally) draws beta.
SubstantiveModel fit_substantive(const SubdistributionDataset& data, OutcomeFlavor flavor,
                                 bool draw_parameters, Rng& rng);

SubdistributionDataset impute_approx(const SubdistributionDataset& data, const ImputationConfig& config,
                                     OutcomeFlavor flavor, Rng& rng);
SubdistributionDataset impute_smc(const SubdistributionDataset& data, const ImputationConfig& config,
                                  OutcomeFlavor flavor, Rng& rng);
/// Dispatch on config.method.
SubdistributionDataset impute_covariates(const SubdistributionDataset& data, const ImputationConfig& config,
                                         Rng& rng);

}  // namespace fgmi
