#include "fgmi/pooling.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "fgmi/errors.hpp"

namespace fgmi {

double PooledResult::std_error() const { return std::sqrt(total_var); }

double PooledResult::statistic() const { return estimate / std_error(); }

double PooledResult::p_value() const {
  const double z = std::abs(statistic());
  if (!std::isfinite(df)) {
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z));
  }
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), z));
}

double t_quantile(double probability, double df) {
  if (!std::isfinite(df)) return boost::math::quantile(boost::math::normal_distribution<double>(), probability);
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), probability);
}

double barnard_rubin_df(double between_var, double total_var, int m, double complete_df) {
  const double lambda = total_var > 0.0 ? (1.0 + 1.0 / m) * between_var / total_var : 0.0;
  const double df_old = lambda > 0.0 && m > 1 ? (m - 1) / (lambda * lambda) : kInfiniteDf;
  if (!std::isfinite(complete_df)) return df_old;
  const double df_obs = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - lambda);
  if (!std::isfinite(df_old)) return df_obs;
  return df_old * df_obs / (df_old + df_obs);
}

PooledResult rubin_pool(std::span<const double> estimates, std::span<const double> variances,
                        double confidence, double complete_df) {
  if (estimates.size() != variances.size()) throw DataError("rubin_pool: estimates and variances differ in length");
  if (estimates.empty()) throw DataError("rubin_pool: no estimates");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0, 1)");
  const auto m = static_cast<int>(estimates.size());
  PooledResult r;
  r.m = m;
  double sum = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (variances[i] < 0.0) throw DataError("rubin_pool: negative variance");
    sum += estimates[i];
    wsum += variances[i];
  }
  r.estimate = sum / m;
  r.within_var = wsum / m;
  if (m > 1) {
    double ss = 0.0;
    for (double e : estimates) ss += (e - r.estimate) * (e - r.estimate);
    r.between_var = ss / (m - 1);
  } else {
    r.single_imputation = true;
  }
  r.total_var = r.within_var + (1.0 + 1.0 / m) * r.between_var;
  r.df = barnard_rubin_df(r.between_var, r.total_var, m, complete_df);
  const double q = t_quantile(0.5 + confidence / 2.0, r.df);
  r.ci_low = r.estimate - q * std::sqrt(r.total_var);
  r.ci_high = r.estimate + q * std::sqrt(r.total_var);
  return r;
}

double cloglog(double f) { return std::log(-std::log1p(-f)); }

double inv_cloglog(double theta) { return -std::expm1(-std::exp(theta)); }

std::vector<PooledCumincPoint> pool_cuminc(std::span<const CumincCurve> curves, double confidence,
                                           double complete_df) {
  if (curves.empty()) throw DataError("pool_cuminc: no curves");
  const auto& grid = curves.front().times;
  for (const auto& c : curves) {
    if (c.times != grid || c.estimates.size() != grid.size() || c.se_cloglog.size() != grid.size()) {
      throw DataError("pool_cuminc: curves must share a common time grid");
    }
  }
  std::vector<PooledCumincPoint> out;
  out.reserve(grid.size());
  std::vector<double> theta(curves.size()), var(curves.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const double f = curves[i].estimates[k];
      if (!(f > 0.0 && f < 1.0)) {
        throw DataError(fmt::format("transformation undefined at t = {}; restrict grid", grid[k]));
      }
      theta[i] = cloglog(f);
      var[i] = curves[i].se_cloglog[k] * curves[i].se_cloglog[k];
    }
    PooledCumincPoint p;
    p.time = grid[k];
    p.cloglog_scale = rubin_pool(theta, var, confidence, complete_df);
    p.estimate = inv_cloglog(p.cloglog_scale.estimate);
    p.ci_low = inv_cloglog(p.cloglog_scale.ci_low);
    p.ci_high = inv_cloglog(p.cloglog_scale.ci_high);
    out.push_back(p);
  }
  return out;
}

}  // namespace fgmi
