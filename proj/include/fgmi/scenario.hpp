#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fgmi/analysis.hpp"
#include "fgmi/simulation.hpp"

namespace fgmi {

enum class DgmKind { FgCorrect, CsLatent };

struct ScenarioConfig {
  std::string name = "scenario";
  DgmKind dgm = DgmKind::FgCorrect;
  FgDgmParams fg;
  // Cause-specific parameters; calibrated from `fg` when absent.
  std::optional<CsDgmParams> cs;
  // Censoring applied to the large FG dataset used for calibration.
  CensoringSpec calibration_censoring{CensoringType::None, 0.49};
  CensoringSpec censoring{CensoringType::Random, 0.49};
  std::size_t n = 1000;
  int n_sim = 100;
  int m = 10;
  int iterations = 20;
  double eta1 = 1.5;
  double target_prob = 0.4;
  std::vector<AnalysisMethod> methods = all_methods();
  std::uint64_t seed = 2024;
  std::vector<double> horizons{1.0, 3.0, 5.0};
  std::vector<std::pair<double, double>> references{{0.0, 0.0}, {1.0, 1.0}};
  std::size_t n_big = 200000;
  int threads = 1;
  double max_failure_fraction = 0.02;

  void validate() const;
};

struct ReplicationRecord {
  int replication = 0;
  AnalysisMethod method = AnalysisMethod::Full;
  bool ok = false;
  std::string error;
  std::vector<PooledResult> beta;                          // X, Z
  std::vector<std::vector<PooledCumincPoint>> cuminc;      // reference x horizon
};

struct PerformanceRow {
  AnalysisMethod method = AnalysisMethod::Full;
  std::string estimand;   // "beta.X", "beta.Z" or "cuminc"
  std::string reference;  // "X=1,Z=1" for incidences
  double time = 0.0;      // horizon for incidences
  double true_value = 0.0;
  std::string metric;     // bias, relative_bias, emp_se, mod_se, coverage, rmse
  double value = 0.0;
  double mcse = 0.0;
  int n_ok = 0;
};

struct ScenarioResult {
  ScenarioConfig config;
  CsDgmParams cs_params;  // used when dgm == CsLatent
  std::vector<double> beta_target;
  std::vector<std::vector<double>> true_cuminc;  // reference x horizon
  std::vector<ReplicationRecord> replications;   // replication-major, method-minor
  std::vector<PerformanceRow> performance;
  std::map<AnalysisMethod, int> failures;

  const PerformanceRow& row(AnalysisMethod method, const std::string& estimand, const std::string& metric,
                            const std::string& reference = "", double time = 0.0) const;
};

std::string reference_label(double x, double z);

// Monte Carlo summaries of one estimand.
struct Summary {
  double bias, bias_mcse;
  double relative_bias, relative_bias_mcse;
  double emp_se, emp_se_mcse;
  double mod_se, mod_se_mcse;
  double coverage, coverage_mcse;
  double rmse, rmse_mcse;
};
Summary summarize(const std::vector<double>& estimates, const std::vector<double>& std_errors,
                  const std::vector<bool>& covered, double truth);

struct ReplicationData {
  SimulatedData full;           // censored, covariates complete
  CompetingRisksData masked;    // X made MAR-missing
};

/// Generates, censors and masks one replication dataset from its own substream.
ReplicationData simulate_replication(const ScenarioConfig& config, const CsDgmParams& cs, int replication);

ScenarioResult run_scenario(const ScenarioConfig& config);

void write_performance_csv(std::ostream& out, const ScenarioResult& result, bool with_header = true);
void write_replications_csv(std::ostream& out, const ScenarioResult& result, bool with_header = true);
/// Bias table, SE/coverage table and incidence-curve grid extracts.
void write_bias_extract(std::ostream& out, const ScenarioResult& result, bool with_header = true);
void write_se_coverage_extract(std::ostream& out, const ScenarioResult& result, bool with_header = true);
void write_cuminc_extract(std::ostream& out, const ScenarioResult& result, bool with_header = true);

}  // namespace fgmi
