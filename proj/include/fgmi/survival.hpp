#pragma once

#include <span>
#include <vector>

#include "fgmi/data.hpp"
#include "fgmi/step_function.hpp"

namespace fgmi {

/// Product-limit survival estimate. `events` is nonzero where the event was
/// observed; other records are right-censored at their time. Ties: events at a
/// time t are removed from the risk set of t together with censorings at t.
StepFunction kaplan_meier(std::span<const double> times, std::span<const int> events);

/// Nelson–Aalen cumulative hazard, sum over event times of d/n.
StepFunction nelson_aalen(std::span<const double> times, std::span<const int> events);

/// Marginal cause-specific cumulative hazard H_cause(T_i) for every record.
std::vector<double> marginal_cs_cumhaz(const CompetingRisksData& data, Status cause);

}  // namespace fgmi
