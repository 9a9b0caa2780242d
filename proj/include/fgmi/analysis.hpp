#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fgmi/cox.hpp"
#include "fgmi/data.hpp"
#include "fgmi/imputation.hpp"
#include "fgmi/pooling.hpp"

namespace fgmi {

enum class AnalysisMethod { Full, Cca, CsSmc, CsApprox, FgSmc, FgApprox };

/// "full", "cca", "cs-smc", "cs-approx", "fg-smc", "fg-approx".
std::string_view method_name(AnalysisMethod method);
AnalysisMethod parse_method(std::string_view name);
std::vector<AnalysisMethod> all_methods();

struct AnalysisOptions {
  AnalysisMethod method = AnalysisMethod::FgSmc;
  int m = 10;
  int iterations = 20;
  int rejection_cap = 10000;
  std::uint64_t seed = 1;
  std::map<std::string, CovariateModel> covariate_models;
  std::vector<std::string> censoring_strata;
  // Known potential censoring time per record (administrative censoring).
  std::optional<std::vector<double>> known_censoring_times;
  std::vector<double> horizons;
  std::vector<NamedValues> references;
  double confidence = 0.95;
  int threads = 1;
  bool keep_datasets = false;
  // Reserved: resampling the censoring distribution before each imputation. Not implemented.
  bool bootstrap_censoring = false;
};

struct AnalysisResult {
  std::vector<std::string> terms;
  std::vector<PooledResult> coefficients;
  // One pooled curve per reference, on the horizon grid.
  std::vector<std::vector<PooledCumincPoint>> cuminc;
  std::vector<CoxFit> fits;
  std::vector<SubdistributionDataset> completed;  // when keep_datasets
  bool random_censoring = false;
  std::size_t n_used = 0;

  const PooledResult& coefficient(std::string_view term) const;
};

/// Censoring-complete data, covariate imputation, one Fine–Gray fit per
/// completed dataset and Rubin pooling.
///
/// Records with D = 0 and no known censoring times trigger censoring-time
/// imputation: m censoring-complete datasets, each followed by a single
/// covariate imputation. Otherwise V is deterministic and the covariates are
/// imputed m times. Full requires complete covariates; CCA drops incomplete
/// records before anything else.
AnalysisResult analyze(const CompetingRisksData& data, const AnalysisOptions& options);

/// Fine–Gray fit on each completed dataset and pooling, without imputation.
AnalysisResult pool_completed(const std::vector<SubdistributionDataset>& completed,
                              const std::vector<double>& horizons, const std::vector<NamedValues>& references,
                              double confidence = 0.95);

}  // namespace fgmi
