#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fgmi/analysis.hpp"
#include "fgmi/data.hpp"

namespace fgmi {

// Comma-separated table with a header row. Fields may be double-quoted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  std::size_t column(const std::string& name) const;  // throws DataError if absent
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Empty field or "NA" is missing; anything else must parse fully as a number.
double parse_field(const std::string& field, std::size_t line, const std::string& column);

struct CovariateColumn {
  std::string name;
  CovariateModel type = CovariateModel::LinearNormal;
};

struct AnalysisSpec {
  std::string input_path;
  std::string id_column;  // empty: ids are row numbers
  std::string time_column = "time";
  std::string status_column = "status";
  std::vector<CovariateColumn> covariates;
  std::vector<std::string> strata_columns;
  std::string censoring_time_column;  // non-empty: administrative censoring
  AnalysisMethod method = AnalysisMethod::FgSmc;
  int m = 10;
  int iterations = 20;
  std::uint64_t seed = 1;
  std::vector<double> horizons;
  std::vector<NamedValues> references;
  std::string output_dir = ".";
  int threads = 1;
  bool save_imputed = false;
};

struct LoadedData {
  CompetingRisksData data;
  std::optional<std::vector<double>> censoring_times;
};

/// Builds the competing-risks records. Strata columns must also be covariates.
LoadedData load_competing_risks(const CsvTable& table, const AnalysisSpec& spec);

/// Parses "X:binary,Z:continuous".
std::vector<CovariateColumn> parse_covariate_list(const std::string& text);
/// Parses "X=1,Z=0".
NamedValues parse_reference(const std::string& text);
/// Parses "1,2.5,3".
std::vector<double> parse_number_list(const std::string& text);
std::string reference_label(const NamedValues& ref);

/// Deciles of the observed cause-1 times (distinct values).
std::vector<double> default_horizons(const CompetingRisksData& data);

void write_pooled_coefficients(std::ostream& out, const AnalysisResult& result);
void write_pooled_cuminc(std::ostream& out, const std::vector<NamedValues>& references,
                         const std::vector<std::vector<PooledCumincPoint>>& curves);
/// Long format: .imp, id, time, status, v_time, covariates (full precision).
void write_imputed_datasets(std::ostream& out, const std::vector<SubdistributionDataset>& completed);
std::vector<SubdistributionDataset> read_imputed_datasets(const CsvTable& table);

/// Per-imputation Fine–Gray fits, enough to predict and pool incidences later.
struct SavedModel {
  std::vector<CoxFit> fits;
  double confidence = 0.95;
  double complete_df = kInfiniteDf;
  std::string method;
};
void write_model_json(std::ostream& out, const SavedModel& model);
SavedModel read_model_json(std::istream& in);
/// Predict-then-pool at the given horizons for one reference.
std::vector<PooledCumincPoint> predict_pooled(const SavedModel& model, const NamedValues& reference,
                                              const std::vector<double>& horizons);

/// Full-precision number formatting used by every writer.
std::string format_number(double v);

}  // namespace fgmi
