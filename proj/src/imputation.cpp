#include "fgmi/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "fgmi/cox.hpp"
#include "fgmi/errors.hpp"

namespace fgmi {

namespace {

Eigen::VectorXd covariate_vector(const SubdistributionRecord& r) {
  return Eigen::Map<const Eigen::VectorXd>(r.covariates.data(), static_cast<Eigen::Index>(r.covariates.size()));
}

// (time, event) of a record as seen by one hazard component.
std::pair<double, int> outcome_for(const SubdistributionRecord& r, OutcomeFlavor flavor, Status cause) {
  if (flavor == OutcomeFlavor::FineGray) return {r.v_time, r.event1() ? 1 : 0};
  return {r.time, r.status == cause ? 1 : 0};
}

Eigen::MatrixXd covariate_matrix(const SubdistributionDataset& data) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.covariate_names.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < data.covariate_names.size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = data.records[i].covariates[k];
    }
  }
  return x;
}

// Fits the model of covariate j on `rows`, dropping collinear predictors, and
// returns coefficients over the full predictor row (zeros where dropped).
GlmDraw fit_covariate_model(const SubdistributionDataset& data, std::size_t j, const std::vector<std::size_t>& rows,
                            ImputationMethod method, CovariateModel type, bool draw_parameters, Rng& rng) {
  const auto& name = data.covariate_names[j];
  if (rows.empty()) throw DataError(fmt::format("covariate '{}' has no rows to fit its imputation model", name));
  const Eigen::Index p = covariate_predictors(data.records[rows[0]], j, method).size();
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), p);
  std::vector<double> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    design.row(static_cast<Eigen::Index>(r)) = covariate_predictors(data.records[rows[r]], j, method);
    y[r] = data.records[rows[r]].covariates[j];
  }
  const auto keep = independent_columns(design);
  Eigen::MatrixXd reduced(design.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) reduced.col(static_cast<Eigen::Index>(c)) = design.col(keep[c]);

  GlmFit fit;
  try {
    fit = fit_glm(y, reduced, type == CovariateModel::LogisticBinary ? GlmFamily::Logistic : GlmFamily::Linear);
  } catch (const Error&) {
    rethrow_with_context(fmt::format("imputation model for '{}': ", name));
  }
  GlmDraw reduced_draw;
  if (draw_parameters) {
    reduced_draw = draw_glm_params(fit, rng);
  } else {
    reduced_draw.coefficients = fit.coefficients;
    reduced_draw.residual_sd = fit.residual_sd.value_or(0.0);
  }
  GlmDraw full;
  full.residual_sd = reduced_draw.residual_sd;
  full.coefficients = Eigen::VectorXd::Zero(p);
  for (std::size_t c = 0; c < keep.size(); ++c) full.coefficients(keep[c]) = reduced_draw.coefficients(static_cast<Eigen::Index>(c));
  return full;
}

struct PartialCovariate {
  std::size_t index;
  CovariateModel type;
  std::vector<std::size_t> missing;
  std::vector<std::size_t> observed;
};

std::vector<PartialCovariate> find_partial(const SubdistributionDataset& data, const ImputationConfig& config) {
  std::vector<PartialCovariate> out;
  for (std::size_t j = 0; j < data.covariate_names.size(); ++j) {
    PartialCovariate pc{j, CovariateModel::LinearNormal, {}, {}};
    for (std::size_t i = 0; i < data.size(); ++i) (data.records[i].mask[j] ? pc.observed : pc.missing).push_back(i);
    if (pc.missing.empty()) continue;
    const auto& name = data.covariate_names[j];
    auto it = config.covariate_models.find(name);
    if (it == config.covariate_models.end()) {
      throw ConfigError(fmt::format("no imputation model given for covariate '{}'", name));
    }
    pc.type = it->second;
    if (pc.observed.empty()) throw DataError(fmt::format("covariate '{}' has no observed values", name));
    if (pc.type == CovariateModel::LogisticBinary) {
      for (auto i : pc.observed) {
        const double v = data.records[i].covariates[j];
        if (v != 0.0 && v != 1.0) throw DataError(fmt::format("binary covariate '{}' has value {}", name, v));
      }
    }
    out.push_back(std::move(pc));
  }
  return out;
}

void initialize_missing(SubdistributionDataset& data, const std::vector<PartialCovariate>& partial, Rng& rng) {
  for (const auto& pc : partial) {
    std::uniform_int_distribution<std::size_t> pick(0, pc.observed.size() - 1);
    for (auto i : pc.missing) data.records[i].covariates[pc.index] = data.records[pc.observed[pick(rng)]].covariates[pc.index];
  }
}

void check_summaries(const SubdistributionDataset& data, OutcomeFlavor flavor) {
  for (const auto& r : data.records) {
    if (flavor == OutcomeFlavor::FineGray && is_missing(r.subdist_cumhaz)) {
      throw DataError("FG-Approx requires the subdistribution cumulative hazard at V");
    }
    if (flavor == OutcomeFlavor::CauseSpecific && (is_missing(r.cs_cumhaz1) || is_missing(r.cs_cumhaz2))) {
      throw DataError("CS-Approx requires both cause-specific cumulative hazards");
    }
  }
}

SubdistributionDataset run_fcs(const SubdistributionDataset& data, const ImputationConfig& config, OutcomeFlavor flavor,
                               bool smc, Rng& rng) {
  config.validate();
  SubdistributionDataset out = data;
  const auto partial = find_partial(data, config);
  if (partial.empty()) return out;
  if (!smc) check_summaries(data, flavor);

  const ImputationMethod method =
      smc ? (flavor == OutcomeFlavor::FineGray ? ImputationMethod::FgSmc : ImputationMethod::CsSmc)
          : (flavor == OutcomeFlavor::FineGray ? ImputationMethod::FgApprox : ImputationMethod::CsApprox);
  const int cycles = (!smc && partial.size() == 1) ? 1 : config.iterations;
  initialize_missing(out, partial, rng);

  std::vector<std::size_t> all_rows(out.size());
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;

  for (int cycle = 1; cycle <= cycles; ++cycle) {
    for (const auto& pc : partial) {
      if (smc) {
        SubstantiveModel model;
        try {
          model = fit_substantive(out, flavor, config.draw_parameters, rng);
        } catch (const Error&) {
          rethrow_with_context(fmt::format("substantive model refit failed in cycle {}: ", cycle));
        }
        const GlmDraw draw = fit_covariate_model(out, pc.index, all_rows, method, pc.type, config.draw_parameters, rng);
        smc_impute_step(out, pc.index, pc.missing, model, draw, pc.type, config.rejection_cap, rng);
      } else {
        const GlmDraw draw = fit_covariate_model(out, pc.index, pc.observed, method, pc.type, config.draw_parameters, rng);
        std::normal_distribution<double> norm;
        for (auto i : pc.missing) {
          auto& rec = out.records[i];
          const double eta = covariate_predictors(rec, pc.index, method).dot(draw.coefficients);
          if (pc.type == CovariateModel::LogisticBinary) {
            rec.covariates[pc.index] = uniform_open(rng) < expit(eta) ? 1.0 : 0.0;
          } else {
            rec.covariates[pc.index] = eta + draw.residual_sd * norm(rng);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

void ImputationConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  if (rejection_cap < 100) throw ConfigError("rejection_cap must be at least 100");
}

OutcomeFlavor flavor_of(ImputationMethod method) {
  return (method == ImputationMethod::FgSmc || method == ImputationMethod::FgApprox) ? OutcomeFlavor::FineGray
                                                                                     : OutcomeFlavor::CauseSpecific;
}

bool is_smc(ImputationMethod method) { return method == ImputationMethod::FgSmc || method == ImputationMethod::CsSmc; }

double smc_log_density(const Eigen::VectorXd& x, const SubdistributionRecord& record, const SubstantiveModel& model) {
  double ld = 0.0;
  for (const auto& c : model.components) {
    const auto [t, d] = outcome_for(record, model.flavor, c.cause);
    const double lp = c.beta.dot(x);
    ld += d * lp - c.cumhaz(t) * std::exp(lp);
  }
  return ld;
}

double smc_conditional_density(const Eigen::VectorXd& x, const SubdistributionRecord& record,
                               const SubstantiveModel& model) {
  return std::exp(smc_log_density(x, record, model));
}

Eigen::RowVectorXd covariate_predictors(const SubdistributionRecord& record, std::size_t j, ImputationMethod method) {
  const auto p = record.covariates.size();
  std::size_t extra = 0;
  if (method == ImputationMethod::FgApprox) extra = 2;
  if (method == ImputationMethod::CsApprox) extra = 4;
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(p + extra));
  Eigen::Index c = 0;
  row(c++) = 1.0;
  for (std::size_t k = 0; k < p; ++k) {
    if (k != j) row(c++) = record.covariates[k];
  }
  if (method == ImputationMethod::FgApprox) {
    row(c++) = record.event1() ? 1.0 : 0.0;
    row(c++) = record.subdist_cumhaz;
  } else if (method == ImputationMethod::CsApprox) {
    row(c++) = record.status == Status::Cause1 ? 1.0 : 0.0;
    row(c++) = record.status == Status::Cause2 ? 1.0 : 0.0;
    row(c++) = record.cs_cumhaz1;
    row(c++) = record.cs_cumhaz2;
  }
  return row;
}

double smc_binary_probability(const SubdistributionRecord& record, std::size_t j, const SubstantiveModel& model,
                              double prior_logit) {
  Eigen::VectorXd x = covariate_vector(record);
  x(static_cast<Eigen::Index>(j)) = 0.0;
  const double ld0 = smc_log_density(x, record, model);
  x(static_cast<Eigen::Index>(j)) = 1.0;
  const double ld1 = smc_log_density(x, record, model);
  return expit(prior_logit + ld1 - ld0);
}

void smc_impute_step(SubdistributionDataset& data, std::size_t j, const std::vector<std::size_t>& rows,
                     const SubstantiveModel& model, const GlmDraw& draw, CovariateModel type, int rejection_cap,
                     Rng& rng) {
  const ImputationMethod method =
      model.flavor == OutcomeFlavor::FineGray ? ImputationMethod::FgSmc : ImputationMethod::CsSmc;
  std::normal_distribution<double> norm;
  for (auto i : rows) {
    auto& rec = data.records[i];
    const double eta = covariate_predictors(rec, j, method).dot(draw.coefficients);
    if (type == CovariateModel::LogisticBinary) {
      rec.covariates[j] = uniform_open(rng) < smc_binary_probability(rec, j, model, eta) ? 1.0 : 0.0;
      continue;
    }
    // Each factor u^d e^{d - u} (event) or e^{-u} (no event), u = Lambda e^{lp},
    // is bounded by 1, so their product is a valid acceptance probability.
    Eigen::VectorXd x = covariate_vector(rec);
    bool accepted = false;
    for (int attempt = 0; attempt < rejection_cap && !accepted; ++attempt) {
      const double candidate = eta + draw.residual_sd * norm(rng);
      x(static_cast<Eigen::Index>(j)) = candidate;
      double log_accept = 0.0;
      for (const auto& c : model.components) {
        const auto [t, d] = outcome_for(rec, model.flavor, c.cause);
        const double u = c.cumhaz(t) * std::exp(c.beta.dot(x));
        log_accept += d ? (u > 0.0 ? 1.0 + std::log(u) - u : -INFINITY) : -u;
      }
      if (std::log(uniform_open(rng)) < log_accept) {
        rec.covariates[j] = candidate;
        accepted = true;
      }
    }
    if (!accepted) {
      throw NumericalError(fmt::format("rejection sampling failed for record '{}', covariate '{}'", rec.id,
                                       data.covariate_names[j]));
    }
  }
}

SubstantiveModel fit_substantive(const SubdistributionDataset& data, OutcomeFlavor flavor, bool draw_parameters,
                                 Rng& rng) {
  SubstantiveModel model;
  model.flavor = flavor;
  const Eigen::MatrixXd x = covariate_matrix(data);
  std::vector<Status> causes =
      flavor == OutcomeFlavor::FineGray ? std::vector<Status>{Status::Cause1} : std::vector<Status>{Status::Cause1, Status::Cause2};
  for (Status cause : causes) {
    std::vector<double> t(data.size());
    std::vector<int> d(data.size());
    int n_events = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::tie(t[i], d[i]) = outcome_for(data.records[i], flavor, cause);
      n_events += d[i];
    }
    // A cause without events contributes nothing to the CS likelihood.
    if (flavor == OutcomeFlavor::CauseSpecific && n_events == 0) continue;
    const CoxFit fit = fit_cox(t, d, x, data.covariate_names);
    HazardComponent comp;
    comp.cause = cause;
    if (draw_parameters) {
      comp.beta = draw_mvn(fit.coefficients, fit.covariance, rng);
      comp.cumhaz = breslow_cumhaz(t, d, x, comp.beta);
    } else {
      comp.beta = fit.coefficients;
      comp.cumhaz = fit.baseline_cumhaz;
    }
    model.components.push_back(std::move(comp));
  }
  return model;
}

SubdistributionDataset impute_approx(const SubdistributionDataset& data, const ImputationConfig& config,
                                     OutcomeFlavor flavor, Rng& rng) {
  return run_fcs(data, config, flavor, false, rng);
}

SubdistributionDataset impute_smc(const SubdistributionDataset& data, const ImputationConfig& config,
                                  OutcomeFlavor flavor, Rng& rng) {
  return run_fcs(data, config, flavor, true, rng);
}

SubdistributionDataset impute_covariates(const SubdistributionDataset& data, const ImputationConfig& config, Rng& rng) {
  const OutcomeFlavor flavor = flavor_of(config.method);
  return is_smc(config.method) ? impute_smc(data, config, flavor, rng) : impute_approx(data, config, flavor, rng);
}

}  // namespace fgmi
