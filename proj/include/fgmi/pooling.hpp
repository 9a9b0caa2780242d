#pragma once

#include <limits>
#include <span>
#include <vector>

namespace fgmi {

inline constexpr double kInfiniteDf = std::numeric_limits<double>::infinity();

struct PooledResult {
  double estimate = 0.0;
  double within_var = 0.0;   // mean of the per-imputation variances
  double between_var = 0.0;  // sample variance of the estimates
  double total_var = 0.0;    // within + (1 + 1/M) between
  double df = kInfiniteDf;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int m = 0;
  bool single_imputation = false;  // M = 1: between-variance unavailable

  double std_error() const;
  double statistic() const;  // estimate / std_error
  double p_value() const;    // two-sided, t with df degrees of freedom
};

/// Rubin's rules with Barnard–Rubin small-sample degrees of freedom.
/// `complete_df` is the complete-data residual df (infinite disables the
/// small-sample adjustment).
PooledResult rubin_pool(std::span<const double> estimates, std::span<const double> variances,
                        double confidence = 0.95, double complete_df = kInfiniteDf);

/// Barnard–Rubin df for given between/total variance, M and complete-data df.
double barnard_rubin_df(double between_var, double total_var, int m, double complete_df);

/// Two-sided t quantile (normal when df is infinite).
double t_quantile(double probability, double df);

double cloglog(double f);
double inv_cloglog(double theta);

// One imputation's cumulative incidence estimates on a common grid.
struct CumincCurve {
  std::vector<double> times;
  std::vector<double> estimates;   // F1(t)
  std::vector<double> se_cloglog;  // SE of log(-log(1 - F1(t)))
};

struct PooledCumincPoint {
  double time = 0.0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  PooledResult cloglog_scale;
};

/// Predict-then-pool: Rubin's rules per time point on the cloglog scale, then
/// back-transformed. Curves must share the same time grid.
std::vector<PooledCumincPoint> pool_cuminc(std::span<const CumincCurve> curves, double confidence = 0.95,
                                           double complete_df = kInfiniteDf);

}  // namespace fgmi
