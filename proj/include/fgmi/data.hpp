#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fgmi {

enum class Status : int { Censored = 0, Cause1 = 1, Cause2 = 2 };

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

Status status_from_int(int code);

// One subject: follow-up time T, cause indicator D and covariates. Missing
// covariate entries hold kMissing and have mask == false.
struct CompetingRisksRecord {
  std::string id;
  double time = 0.0;
  Status status = Status::Censored;
  std::vector<double> covariates;
  std::vector<bool> mask;
};

struct CompetingRisksData {
  std::vector<std::string> covariate_names;
  std::vector<CompetingRisksRecord> records;

  std::size_t size() const { return records.size(); }
  std::size_t covariate_index(std::string_view name) const;
  // Checks times, mask/covariate consistency, and that ids are unique.
  void validate() const;

  std::vector<double> times() const;
  // 1 where status == cause, else 0.
  std::vector<int> cause_indicator(Status cause) const;
};

// One subject of a censoring-complete dataset. `time` and `status` keep the
// original (T, D); `v_time` is the subdistribution time V.
struct SubdistributionRecord {
  std::string id;
  double time = 0.0;
  Status status = Status::Censored;
  double v_time = 0.0;
  bool v_imputed = false;
  std::vector<double> covariates;
  std::vector<bool> mask;

  // Outcome summaries consumed by the directly specified imputation models.
  double cs_cumhaz1 = kMissing;      // H1(T)
  double cs_cumhaz2 = kMissing;      // H2(T)
  double subdist_cumhaz = kMissing;  // Lambda1(V)

  bool event1() const { return status == Status::Cause1; }
};

struct SubdistributionDataset {
  std::vector<std::string> covariate_names;
  std::vector<SubdistributionRecord> records;

  std::size_t size() const { return records.size(); }
  std::size_t covariate_index(std::string_view name) const;

  std::vector<double> v_times() const;
  std::vector<double> times() const;
  std::vector<int> event1() const;
  std::vector<int> cause_indicator(Status cause) const;

  // Rows x formula.size(); throws DataError if any entry is missing.
  Eigen::MatrixXd design(const std::vector<std::string>& formula) const;
  bool has_missing(const std::vector<std::string>& formula) const;
  // Records whose formula covariates are all present.
  SubdistributionDataset complete_cases(const std::vector<std::string>& formula) const;
};

}  // namespace fgmi
