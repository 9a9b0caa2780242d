#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "fgmi/data.hpp"
#include "fgmi/rng.hpp"
#include "fgmi/step_function.hpp"

namespace fgmi {

using StratumKey = std::vector<double>;

// Kaplan–Meier estimate of the censoring survivor G(t) = P(C > t), one curve per
// level of the categorical stratification covariates.
struct CensoringModel {
  std::vector<std::string> strata_covariates;
  std::map<StratumKey, StepFunction> strata;
  // Imputed V when the conditional censoring law has mass past the last jump.
  double tail_time = 0.0;

  const StepFunction& survival(const StratumKey& key) const;
};

/// Reverse Kaplan–Meier of the censoring times (event = I(D = 0)); records
/// failing from either cause are right-censored observations of C at T.
/// Administrative censoring times enter as ordinary D = 0 observations, so the
/// estimate has support at random and administrative censoring times alike.
CensoringModel fit_censoring_km(const CompetingRisksData& data,
                                const std::vector<std::string>& strata_covariates = {});

StratumKey stratum_key(const CompetingRisksRecord& record, const CompetingRisksData& data,
                       const std::vector<std::string>& strata_covariates);

/// One draw of a potential censoring time for a record failing from cause 2 at T:
/// V = inf{t > T jump : G(t)/G(T-) <= u}, or tail_time if none.
double draw_censoring_time(const StepFunction& g, double t, double tail_time, double u);

/// Step 2 of the pipeline: m censoring-complete datasets. Imputation k uses the
/// substream (seed, k), so output depends only on (data, model, m, seed).
/// Outcome summaries H1(T), H2(T) and Lambda1(V) are attached to every record.
std::vector<SubdistributionDataset> impute_censoring_times(const CompetingRisksData& data,
                                                           const CensoringModel& model, int m,
                                                           std::uint64_t seed);

struct NoCensoring {};
struct Administrative {
  std::vector<double> censoring_times;  // known C per record, same order as data
};
using CensoringCompleteMode = std::variant<NoCensoring, Administrative>;

/// Deterministic censoring-complete dataset when C is known (administrative) or
/// absent. Under NoCensoring, cause-2 records get V = 2 * max(T).
SubdistributionDataset make_censoring_complete(const CompetingRisksData& data,
                                               const CensoringCompleteMode& mode);

/// Nelson–Aalen on (V, I(D = 1)): Lambda1(V_i) per record and the full curve.
struct SubdistCumhaz {
  std::vector<double> per_record;
  StepFunction function;
};
SubdistCumhaz marginal_subdist_cumhaz(const SubdistributionDataset& data);

/// Fills cs_cumhaz1/cs_cumhaz2 from the original outcome data.
void attach_cs_cumhaz(SubdistributionDataset& out, const CompetingRisksData& data);
/// Fills subdist_cumhaz from marginal_subdist_cumhaz.
void attach_subdist_cumhaz(SubdistributionDataset& data);

}  // namespace fgmi
