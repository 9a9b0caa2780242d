#include "fgmi/data.hpp"

#include <algorithm>
#include <unordered_set>

#include <fmt/format.h>

#include "fgmi/errors.hpp"

namespace fgmi {

Status status_from_int(int code) {
  switch (code) {
    case 0: return Status::Censored;
    case 1: return Status::Cause1;
    case 2: return Status::Cause2;
    default: throw DataError(fmt::format("status must be 0, 1 or 2 (got {})", code));
  }
}

namespace {

std::size_t find_name(const std::vector<std::string>& names, std::string_view name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError(fmt::format("unknown covariate '{}'", name));
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

std::size_t CompetingRisksData::covariate_index(std::string_view name) const {
  return find_name(covariate_names, name);
}

void CompetingRisksData::validate() const {
  std::unordered_set<std::string> ids;
  ids.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!(r.time > 0.0) || !std::isfinite(r.time)) {
      throw DataError(fmt::format("record {}: time must be positive and finite", r.id));
    }
    if (r.covariates.size() != covariate_names.size() || r.mask.size() != r.covariates.size()) {
      throw DataError(fmt::format("record {}: covariate/mask length mismatch", r.id));
    }
    for (std::size_t j = 0; j < r.covariates.size(); ++j) {
      if (r.mask[j] == is_missing(r.covariates[j])) {
        throw DataError(fmt::format("record {}: mask disagrees with missing sentinel for '{}'",
                                    r.id, covariate_names[j]));
      }
    }
    if (!ids.insert(r.id).second) {
      throw DataError(fmt::format("duplicate identifiers: '{}'", r.id));
    }
  }
}

std::vector<double> CompetingRisksData::times() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.time);
  return out;
}

std::vector<int> CompetingRisksData::cause_indicator(Status cause) const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.status == cause ? 1 : 0);
  return out;
}

std::size_t SubdistributionDataset::covariate_index(std::string_view name) const {
  return find_name(covariate_names, name);
}

std::vector<double> SubdistributionDataset::v_times() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.v_time);
  return out;
}

std::vector<double> SubdistributionDataset::times() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.time);
  return out;
}

std::vector<int> SubdistributionDataset::event1() const { return cause_indicator(Status::Cause1); }

std::vector<int> SubdistributionDataset::cause_indicator(Status cause) const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.status == cause ? 1 : 0);
  return out;
}

Eigen::MatrixXd SubdistributionDataset::design(const std::vector<std::string>& formula) const {
  std::vector<std::size_t> cols;
  cols.reserve(formula.size());
  for (const auto& name : formula) cols.push_back(covariate_index(name));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      double v = records[i].covariates[cols[k]];
      if (is_missing(v)) {
        throw DataError(fmt::format("covariate '{}' is missing for record {}; impute first",
                                    formula[k], records[i].id));
      }
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return x;
}

bool SubdistributionDataset::has_missing(const std::vector<std::string>& formula) const {
  for (const auto& name : formula) {
    auto j = covariate_index(name);
    for (const auto& r : records) {
      if (is_missing(r.covariates[j])) return true;
    }
  }
  return false;
}

SubdistributionDataset SubdistributionDataset::complete_cases(
    const std::vector<std::string>& formula) const {
  std::vector<std::size_t> cols;
  for (const auto& name : formula) cols.push_back(covariate_index(name));
  SubdistributionDataset out;
  out.covariate_names = covariate_names;
  for (const auto& r : records) {
    bool complete = std::none_of(cols.begin(), cols.end(),
                                 [&](std::size_t j) { return is_missing(r.covariates[j]); });
    if (complete) out.records.push_back(r);
  }
  return out;
}

}  // namespace fgmi
