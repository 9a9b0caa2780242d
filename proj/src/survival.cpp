#include "fgmi/survival.hpp"

#include <algorithm>
#include <numeric>

#include "fgmi/errors.hpp"

namespace fgmi {

namespace {

struct EventRow {
  double time;
  double n_at_risk;
  double n_events;
};

// Distinct event times in increasing order with their risk-set sizes.
std::vector<EventRow> event_table(std::span<const double> times, std::span<const int> events) {
  if (times.empty()) throw DataError("empty dataset");
  if (times.size() != events.size()) throw DataError("times and events differ in length");
  for (double t : times) {
    if (!(t > 0.0)) throw DataError("times must be positive");
  }
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  std::vector<EventRow> table;
  double at_risk = static_cast<double>(times.size());
  for (std::size_t k = 0; k < order.size();) {
    const double t = times[order[k]];
    double d = 0.0;
    double removed = 0.0;
    while (k < order.size() && times[order[k]] == t) {
      if (events[order[k]] != 0) d += 1.0;
      removed += 1.0;
      ++k;
    }
    if (d > 0.0) table.push_back({t, at_risk, d});
    at_risk -= removed;
  }
  return table;
}

}  // namespace

StepFunction kaplan_meier(std::span<const double> times, std::span<const int> events) {
  auto table = event_table(times, events);
  std::vector<double> jt, vals;
  jt.reserve(table.size());
  vals.reserve(table.size());
  double s = 1.0;
  for (const auto& row : table) {
    s *= 1.0 - row.n_events / row.n_at_risk;
    jt.push_back(row.time);
    vals.push_back(s);
  }
  return StepFunction(std::move(jt), std::move(vals), 1.0);
}

StepFunction nelson_aalen(std::span<const double> times, std::span<const int> events) {
  auto table = event_table(times, events);
  std::vector<double> jt, vals;
  jt.reserve(table.size());
  vals.reserve(table.size());
  double h = 0.0;
  for (const auto& row : table) {
    h += row.n_events / row.n_at_risk;
    jt.push_back(row.time);
    vals.push_back(h);
  }
  return StepFunction(std::move(jt), std::move(vals), 0.0);
}

std::vector<double> marginal_cs_cumhaz(const CompetingRisksData& data, Status cause) {
  auto t = data.times();
  auto d = data.cause_indicator(cause);
  auto na = nelson_aalen(t, d);
  return na.evaluate(t);
}

}  // namespace fgmi
