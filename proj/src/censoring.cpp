#include "fgmi/censoring.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fgmi/errors.hpp"
#include "fgmi/survival.hpp"

namespace fgmi {

const StepFunction& CensoringModel::survival(const StratumKey& key) const {
  auto it = strata.find(key);
  if (it == strata.end()) {
    throw DataError(fmt::format("empty stratum: no censoring model for level ({})", fmt::join(key, ", ")));
  }
  return it->second;
}

StratumKey stratum_key(const CompetingRisksRecord& record, const CompetingRisksData& data,
                       const std::vector<std::string>& strata_covariates) {
  StratumKey key;
  key.reserve(strata_covariates.size());
  for (const auto& name : strata_covariates) {
    const double v = record.covariates[data.covariate_index(name)];
    if (is_missing(v)) throw DataError("stratification covariates must be complete");
    key.push_back(v);
  }
  return key;
}

CensoringModel fit_censoring_km(const CompetingRisksData& data,
                                const std::vector<std::string>& strata_covariates) {
  if (data.records.empty()) throw DataError("empty dataset");
  std::map<StratumKey, std::pair<std::vector<double>, std::vector<int>>> groups;
  double max_time = 0.0;
  for (const auto& r : data.records) {
    auto key = stratum_key(r, data, strata_covariates);
    for (double v : key) {
      if (v != std::round(v)) {
        throw DataError("stratification covariates must be categorical (integer-coded)");
      }
    }
    auto& g = groups[key];
    g.first.push_back(r.time);
    g.second.push_back(r.status == Status::Censored ? 1 : 0);
    max_time = std::max(max_time, r.time);
  }
  CensoringModel model;
  model.strata_covariates = strata_covariates;
  for (auto& [key, g] : groups) {
    if (g.first.empty()) throw DataError("empty stratum");
    model.strata.emplace(key, kaplan_meier(g.first, g.second));
  }
  model.tail_time = 1.01 * max_time;
  return model;
}

double draw_censoring_time(const StepFunction& g, double t, double tail_time, double u) {
  const double g_before = g.left_limit(t);
  if (!(g_before > 0.0)) return tail_time;
  const auto times = g.jump_times();
  const auto values = g.values();
  auto first = std::upper_bound(times.begin(), times.end(), t);
  const auto offset = first - times.begin();
  // Survivor values are nonincreasing: find the first jump with G(s) <= u * G(T-).
  const double threshold = u * g_before;
  auto vbegin = values.begin() + offset;
  auto hit = std::partition_point(vbegin, values.end(), [&](double v) { return v > threshold; });
  if (hit == values.end()) return tail_time;
  return times[static_cast<std::size_t>(hit - values.begin())];
}

namespace {

SubdistributionDataset skeleton(const CompetingRisksData& data) {
  SubdistributionDataset out;
  out.covariate_names = data.covariate_names;
  out.records.reserve(data.records.size());
  for (const auto& r : data.records) {
    SubdistributionRecord s;
    s.id = r.id;
    s.time = r.time;
    s.status = r.status;
    s.v_time = r.time;
    s.covariates = r.covariates;
    s.mask = r.mask;
    out.records.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void attach_cs_cumhaz(SubdistributionDataset& out, const CompetingRisksData& data) {
  const auto h1 = marginal_cs_cumhaz(data, Status::Cause1);
  const auto h2 = marginal_cs_cumhaz(data, Status::Cause2);
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    out.records[i].cs_cumhaz1 = h1[i];
    out.records[i].cs_cumhaz2 = h2[i];
  }
}

SubdistCumhaz marginal_subdist_cumhaz(const SubdistributionDataset& data) {
  const auto v = data.v_times();
  const auto d = data.event1();
  SubdistCumhaz out{{}, nelson_aalen(v, d)};
  out.per_record = out.function.evaluate(v);
  return out;
}

void attach_subdist_cumhaz(SubdistributionDataset& data) {
  auto lam = marginal_subdist_cumhaz(data);
  for (std::size_t i = 0; i < data.records.size(); ++i) data.records[i].subdist_cumhaz = lam.per_record[i];
}

std::vector<SubdistributionDataset> impute_censoring_times(const CompetingRisksData& data,
                                                           const CensoringModel& model, int m,
                                                           std::uint64_t seed) {
  if (m < 1) throw ConfigError("number of imputations must be at least 1");
  SubdistributionDataset base = skeleton(data);
  attach_cs_cumhaz(base, data);

  // Resolve each cause-2 record's curve once.
  std::vector<const StepFunction*> curves(data.records.size(), nullptr);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    if (data.records[i].status == Status::Cause2) {
      curves[i] = &model.survival(stratum_key(data.records[i], data, model.strata_covariates));
    }
  }

  std::vector<SubdistributionDataset> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    Rng rng = substream(seed, {static_cast<std::uint64_t>(k)});
    SubdistributionDataset ds = base;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      auto& r = ds.records[i];
      if (r.status != Status::Cause2) continue;
      r.v_time = draw_censoring_time(*curves[i], r.time, model.tail_time, uniform_open(rng));
      r.v_imputed = true;
    }
    attach_subdist_cumhaz(ds);
    out.push_back(std::move(ds));
  }
  return out;
}

SubdistributionDataset make_censoring_complete(const CompetingRisksData& data,
                                               const CensoringCompleteMode& mode) {
  if (data.records.empty()) throw DataError("empty dataset");
  SubdistributionDataset out = skeleton(data);
  attach_cs_cumhaz(out, data);
  if (std::holds_alternative<NoCensoring>(mode)) {
    double max_time = 0.0;
    for (const auto& r : data.records) max_time = std::max(max_time, r.time);
    for (auto& r : out.records) {
      if (r.status == Status::Cause2) r.v_time = 2.0 * max_time;
    }
  } else {
    const auto& admin = std::get<Administrative>(mode);
    if (admin.censoring_times.size() != data.records.size()) {
      throw DataError("administrative censoring requires a known C for every record");
    }
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      auto& r = out.records[i];
      if (r.status != Status::Cause2) continue;
      const double c = admin.censoring_times[i];
      if (is_missing(c)) throw DataError(fmt::format("record {}: censoring time unknown", r.id));
      if (c < r.time) throw DataError(fmt::format("censoring time precedes failure for record {}", r.id));
      r.v_time = c;
    }
  }
  attach_subdist_cumhaz(out);
  return out;
}

}  // namespace fgmi
