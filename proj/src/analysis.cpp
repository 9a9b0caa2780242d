#include "fgmi/analysis.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "fgmi/censoring.hpp"
#include "fgmi/errors.hpp"
#include "fgmi/parallel.hpp"

namespace fgmi {

namespace {

constexpr std::uint64_t kCovariateStream = 2;

bool any_missing(const CompetingRisksData& data) {
  for (const auto& r : data.records) {
    for (bool observed : r.mask) {
      if (!observed) return true;
    }
  }
  return false;
}

ImputationMethod imputation_method(AnalysisMethod m) {
  switch (m) {
    case AnalysisMethod::CsSmc: return ImputationMethod::CsSmc;
    case AnalysisMethod::CsApprox: return ImputationMethod::CsApprox;
    case AnalysisMethod::FgSmc: return ImputationMethod::FgSmc;
    case AnalysisMethod::FgApprox: return ImputationMethod::FgApprox;
    default: throw ConfigError("method does not impute covariates");
  }
}

}  // namespace

std::string_view method_name(AnalysisMethod method) {
  switch (method) {
    case AnalysisMethod::Full: return "full";
    case AnalysisMethod::Cca: return "cca";
    case AnalysisMethod::CsSmc: return "cs-smc";
    case AnalysisMethod::CsApprox: return "cs-approx";
    case AnalysisMethod::FgSmc: return "fg-smc";
    case AnalysisMethod::FgApprox: return "fg-approx";
  }
  return "?";
}

AnalysisMethod parse_method(std::string_view name) {
  for (auto m : all_methods()) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError(fmt::format("unknown method '{}' (expected full, cca, cs-smc, cs-approx, fg-smc or fg-approx)", name));
}

std::vector<AnalysisMethod> all_methods() {
  return {AnalysisMethod::Full,  AnalysisMethod::Cca,   AnalysisMethod::CsSmc,
          AnalysisMethod::CsApprox, AnalysisMethod::FgSmc, AnalysisMethod::FgApprox};
}

const PooledResult& AnalysisResult::coefficient(std::string_view term) const {
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k] == term) return coefficients[k];
  }
  throw DataError(fmt::format("unknown term '{}'", term));
}

AnalysisResult pool_completed(const std::vector<SubdistributionDataset>& completed, const std::vector<double>& horizons,
                              const std::vector<NamedValues>& references, double confidence) {
  if (completed.empty()) throw DataError("no completed datasets to pool");
  AnalysisResult res;
  res.terms = completed[0].covariate_names;
  res.n_used = completed[0].size();
  for (std::size_t k = 0; k < completed.size(); ++k) {
    try {
      res.fits.push_back(fit_cox(completed[k], res.terms));
    } catch (const Error&) {
      rethrow_with_context(fmt::format("Fine-Gray fit on completed dataset {}: ", k + 1));
    }
  }
  const double complete_df = static_cast<double>(res.n_used) - static_cast<double>(res.terms.size());
  for (std::size_t j = 0; j < res.terms.size(); ++j) {
    std::vector<double> est, var;
    for (const auto& f : res.fits) {
      est.push_back(f.coefficients(static_cast<Eigen::Index>(j)));
      var.push_back(f.covariance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
    }
    res.coefficients.push_back(rubin_pool(est, var, confidence, complete_df));
  }
  if (!horizons.empty()) {
    for (const auto& ref : references) {
      std::vector<CumincCurve> curves;
      for (const auto& f : res.fits) {
        curves.push_back({horizons, predict_cuminc(f, ref, horizons), cuminc_se(f, ref, horizons)});
      }
      res.cuminc.push_back(pool_cuminc(curves, confidence, complete_df));
    }
  }
  return res;
}

AnalysisResult analyze(const CompetingRisksData& input, const AnalysisOptions& options) {
  if (options.m < 1) throw ConfigError("m must be at least 1");
  if (options.bootstrap_censoring) throw ConfigError("bootstrap of the censoring distribution is not implemented");
  input.validate();
  CompetingRisksData data = input;
  std::optional<std::vector<double>> known = options.known_censoring_times;
  if (known && known->size() != data.size()) throw DataError("known censoring times do not match the records");

  if (options.method == AnalysisMethod::Full && any_missing(data)) {
    throw DataError("method 'full' requires complete covariates");
  }
  if (options.method == AnalysisMethod::Cca) {
    CompetingRisksData cc;
    cc.covariate_names = data.covariate_names;
    std::vector<double> cc_known;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& m = data.records[i].mask;
      if (std::all_of(m.begin(), m.end(), [](bool b) { return b; })) {
        cc.records.push_back(data.records[i]);
        if (known) cc_known.push_back((*known)[i]);
      }
    }
    if (cc.records.empty()) throw DataError("no complete cases");
    data = std::move(cc);
    if (known) known = std::move(cc_known);
  }

  const bool random = !known && std::any_of(data.records.begin(), data.records.end(),
                                            [](const auto& r) { return r.status == Status::Censored; });
  const bool imputing = options.method != AnalysisMethod::Full && options.method != AnalysisMethod::Cca &&
                        any_missing(data);
  const auto m = static_cast<std::size_t>(options.m);

  std::vector<SubdistributionDataset> bases;
  try {
    if (random) {
      bases = impute_censoring_times(data, fit_censoring_km(data, options.censoring_strata), options.m, options.seed);
    } else if (known) {
      bases.push_back(make_censoring_complete(data, Administrative{*known}));
    } else {
      bases.push_back(make_censoring_complete(data, NoCensoring{}));
    }
  } catch (const Error&) {
    rethrow_with_context("censoring-complete data: ");
  }

  std::vector<SubdistributionDataset> completed;
  if (!imputing) {
    completed = std::move(bases);
  } else {
    ImputationConfig cfg;
    cfg.method = imputation_method(options.method);
    cfg.iterations = options.iterations;
    cfg.rejection_cap = options.rejection_cap;
    cfg.covariate_models = options.covariate_models;
    cfg.validate();
    completed.resize(m);
    parallel_for(m, options.threads, [&](std::size_t k) {
      Rng rng = substream(options.seed, {kCovariateStream, k});
      const auto& base = random ? bases[k] : bases[0];
      try {
        completed[k] = impute_covariates(base, cfg, rng);
      } catch (const Error&) {
        rethrow_with_context(fmt::format("covariate imputation {}: ", k + 1));
      }
    });
  }

  AnalysisResult res = pool_completed(completed, options.horizons, options.references, options.confidence);
  res.random_censoring = random;
  if (options.keep_datasets) res.completed = std::move(completed);
  return res;
}

}  // namespace fgmi
