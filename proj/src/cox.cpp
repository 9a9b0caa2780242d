#include "fgmi/cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "fgmi/errors.hpp"

namespace fgmi {

namespace {

// Records sorted by time and grouped into tied blocks, with covariates centred
// at their means for numerical stability (coefficients are invariant to the shift).
struct RiskSets {
  std::vector<std::size_t> order;                           // ascending time
  std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [begin, end) into order
  Eigen::MatrixXd xc;                                       // centred covariates, original row order
  Eigen::VectorXd mean;
  std::span<const double> time;
  std::span<const int> event;
  std::size_t n_events = 0;
};

RiskSets make_risk_sets(std::span<const double> time, std::span<const int> event,
                        const Eigen::MatrixXd& x) {
  if (time.empty()) throw DataError("empty dataset");
  if (time.size() != event.size() || static_cast<Eigen::Index>(time.size()) != x.rows()) {
    throw DataError("cox: time, event and design row counts differ");
  }
  RiskSets rs;
  rs.time = time;
  rs.event = event;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (!(time[i] > 0.0) || !std::isfinite(time[i])) throw DataError("cox: times must be positive and finite");
    if (event[i] != 0) ++rs.n_events;
  }
  if (rs.n_events == 0) throw DataError("cox: no events");
  rs.mean = x.colwise().mean().transpose();
  rs.xc = x.rowwise() - rs.mean.transpose();
  rs.order.resize(time.size());
  std::iota(rs.order.begin(), rs.order.end(), std::size_t{0});
  std::stable_sort(rs.order.begin(), rs.order.end(),
                   [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
  for (std::size_t k = 0; k < rs.order.size();) {
    std::size_t j = k;
    while (j < rs.order.size() && time[rs.order[j]] == time[rs.order[k]]) ++j;
    rs.blocks.emplace_back(k, j);
    k = j;
  }
  return rs;
}

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;
};

Evaluation evaluate(const RiskSets& rs, const Eigen::VectorXd& beta) {
  const Eigen::Index p = rs.xc.cols();
  Evaluation ev;
  ev.score = Eigen::VectorXd::Zero(p);
  ev.info = Eigen::MatrixXd::Zero(p, p);
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  for (auto b = rs.blocks.rbegin(); b != rs.blocks.rend(); ++b) {
    double d = 0.0;
    Eigen::VectorXd xsum = Eigen::VectorXd::Zero(p);
    double lpsum = 0.0;
    for (std::size_t k = b->first; k < b->second; ++k) {
      const auto i = static_cast<Eigen::Index>(rs.order[k]);
      const double lp = p > 0 ? rs.xc.row(i).dot(beta) : 0.0;
      const double w = std::exp(lp);
      s0 += w;
      if (p > 0) {
        s1.noalias() += w * rs.xc.row(i).transpose();
        s2.noalias() += w * rs.xc.row(i).transpose() * rs.xc.row(i);
      }
      if (rs.event[rs.order[k]] != 0) {
        d += 1.0;
        lpsum += lp;
        if (p > 0) xsum += rs.xc.row(i).transpose();
      }
    }
    if (d == 0.0) continue;
    ev.loglik += lpsum - d * std::log(s0);
    if (p > 0) {
      const Eigen::VectorXd xbar = s1 / s0;
      ev.score += xsum - d * xbar;
      ev.info += d * (s2 / s0 - xbar * xbar.transpose());
    }
  }
  return ev;
}

struct BreslowParts {
  std::vector<double> times;
  std::vector<double> cumhaz;
  std::vector<double> var;
  std::vector<std::vector<double>> dbeta;  // per coefficient
};

// Breslow increments on the uncentred covariate scale.
BreslowParts breslow_parts(const RiskSets& rs, const Eigen::VectorXd& beta) {
  const Eigen::Index p = rs.xc.cols();
  const double shift = p > 0 ? std::exp(rs.mean.dot(beta)) : 1.0;
  BreslowParts out;
  out.dbeta.resize(static_cast<std::size_t>(p));
  struct Row { double t, d, s0; Eigen::VectorXd s1; };
  std::vector<Row> rows;
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  for (auto b = rs.blocks.rbegin(); b != rs.blocks.rend(); ++b) {
    double d = 0.0;
    for (std::size_t k = b->first; k < b->second; ++k) {
      const auto i = static_cast<Eigen::Index>(rs.order[k]);
      const double w = p > 0 ? std::exp(rs.xc.row(i).dot(beta)) : 1.0;
      s0 += w;
      if (p > 0) s1.noalias() += w * rs.xc.row(i).transpose();
      if (rs.event[rs.order[k]] != 0) d += 1.0;
    }
    if (d > 0.0) {
      // Uncentred sums: S0 = shift * s0c, S1 = shift * (s1c + mean * s0c).
      Eigen::VectorXd s1u = p > 0 ? Eigen::VectorXd(shift * (s1 + rs.mean * s0)) : Eigen::VectorXd();
      rows.push_back({rs.time[rs.order[b->first]], d, shift * s0, std::move(s1u)});
    }
  }
  std::reverse(rows.begin(), rows.end());
  double h = 0.0, v = 0.0;
  std::vector<double> db(static_cast<std::size_t>(p), 0.0);
  for (const auto& r : rows) {
    h += r.d / r.s0;
    v += r.d / (r.s0 * r.s0);
    out.times.push_back(r.t);
    out.cumhaz.push_back(h);
    out.var.push_back(v);
    for (Eigen::Index k = 0; k < p; ++k) {
      db[static_cast<std::size_t>(k)] += r.d * r.s1(k) / (r.s0 * r.s0);
      out.dbeta[static_cast<std::size_t>(k)].push_back(db[static_cast<std::size_t>(k)]);
    }
  }
  return out;
}

bool information_singular(const Eigen::MatrixXd& info) {
  if (info.rows() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info, Eigen::EigenvaluesOnly);
  const double max_ev = es.eigenvalues().cwiseAbs().maxCoeff();
  const double min_ev = es.eigenvalues().minCoeff();
  return !(max_ev > 0.0) || min_ev <= 1e-10 * max_ev;
}

}  // namespace

double CoxFit::coefficient(const std::string& name) const {
  return coefficients(static_cast<Eigen::Index>(index_of(name)));
}

double CoxFit::std_error(const std::string& name) const {
  const auto k = static_cast<Eigen::Index>(index_of(name));
  return std::sqrt(covariance(k, k));
}

std::size_t CoxFit::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError(fmt::format("unknown covariate '{}' for this fit", name));
  return static_cast<std::size_t>(it - names.begin());
}

CoxFit fit_cox(std::span<const double> time, std::span<const int> event, const Eigen::MatrixXd& x,
               std::vector<std::string> names, const CoxOptions& options) {
  if (static_cast<Eigen::Index>(names.size()) != x.cols()) {
    throw DataError("cox: names and design columns differ");
  }
  const RiskSets rs = make_risk_sets(time, event, x);
  const Eigen::Index p = x.cols();

  CoxFit fit;
  fit.names = std::move(names);
  fit.n_obs = time.size();
  fit.n_events = rs.n_events;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Evaluation ev = evaluate(rs, beta);
  fit.loglik_null = ev.loglik;

  if (p > 0) {
    if (information_singular(ev.info)) throw NumericalError("singular information");
    int iter = 0;
    bool converged = ev.score.cwiseAbs().maxCoeff() < options.score_tolerance;
    while (!converged && iter < options.max_iterations) {
      ++iter;
      const Eigen::VectorXd step = ev.info.ldlt().solve(ev.score);
      Eigen::VectorXd candidate = beta + step;
      Evaluation next = evaluate(rs, candidate);
      double scale = 1.0;
      for (int h = 0; h < 30 && !(next.loglik >= ev.loglik); ++h) {
        scale *= 0.5;
        candidate = beta + scale * step;
        next = evaluate(rs, candidate);
      }
      if (!std::isfinite(next.loglik) || candidate.cwiseAbs().maxCoeff() > options.separation_bound) {
        throw NumericalError(fmt::format("separation detected (|beta| > {})", options.separation_bound));
      }
      const double change = std::abs(next.loglik - ev.loglik);
      beta = candidate;
      ev = std::move(next);
      converged = ev.score.cwiseAbs().maxCoeff() < options.score_tolerance ||
                  change <= options.relative_loglik_tolerance * std::abs(ev.loglik);
    }
    fit.converged = converged;
    fit.n_iterations = iter;
    if (information_singular(ev.info)) throw NumericalError("singular information at the estimate");
    fit.covariance = ev.info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  } else {
    fit.converged = true;
    fit.covariance = Eigen::MatrixXd(0, 0);
  }
  fit.coefficients = beta;
  fit.loglik = ev.loglik;
  fit.score = ev.score;

  auto parts = breslow_parts(rs, beta);
  fit.baseline_cumhaz = StepFunction(parts.times, std::move(parts.cumhaz), 0.0);
  fit.baseline_var = StepFunction(parts.times, std::move(parts.var), 0.0);
  fit.baseline_dbeta.reserve(parts.dbeta.size());
  for (auto& col : parts.dbeta) fit.baseline_dbeta.emplace_back(parts.times, std::move(col), 0.0);
  return fit;
}

CoxFit fit_cox(const SubdistributionDataset& data, const std::vector<std::string>& formula,
               const CoxOptions& options) {
  const auto v = data.v_times();
  const auto d = data.event1();
  return fit_cox(v, d, data.design(formula), formula, options);
}

StepFunction breslow_cumhaz(std::span<const double> time, std::span<const int> event,
                            const Eigen::MatrixXd& x, const Eigen::VectorXd& beta) {
  const RiskSets rs = make_risk_sets(time, event, x);
  auto parts = breslow_parts(rs, beta);
  return StepFunction(std::move(parts.times), std::move(parts.cumhaz), 0.0);
}

double cox_log_partial_likelihood(std::span<const double> time, std::span<const int> event,
                                  const Eigen::MatrixXd& x, const Eigen::VectorXd& beta) {
  return evaluate(make_risk_sets(time, event, x), beta).loglik;
}

double linear_predictor(const CoxFit& fit, const NamedValues& covariates) {
  for (const auto& [name, value] : covariates) {
    if (std::find(fit.names.begin(), fit.names.end(), name) == fit.names.end()) {
      throw DataError(fmt::format("unknown covariate '{}' for this fit", name));
    }
  }
  double lp = 0.0;
  for (std::size_t k = 0; k < fit.names.size(); ++k) {
    auto it = covariates.find(fit.names[k]);
    if (it == covariates.end()) throw DataError(fmt::format("covariate '{}' not supplied", fit.names[k]));
    lp += fit.coefficients(static_cast<Eigen::Index>(k)) * it->second;
  }
  return lp;
}

std::vector<double> predict_cuminc(const CoxFit& fit, const NamedValues& covariates,
                                   std::span<const double> times) {
  const double risk = std::exp(linear_predictor(fit, covariates));
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(-std::expm1(-risk * fit.baseline_cumhaz(t)));
  return out;
}

std::vector<double> cuminc_se(const CoxFit& fit, const NamedValues& covariates,
                              std::span<const double> times) {
  linear_predictor(fit, covariates);  // validates names
  const auto p = static_cast<Eigen::Index>(fit.names.size());
  Eigen::VectorXd z(p);
  for (Eigen::Index k = 0; k < p; ++k) z(k) = covariates.at(fit.names[static_cast<std::size_t>(k)]);
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    const double h0 = fit.baseline_cumhaz(t);
    if (!(h0 > 0.0)) throw DataError(fmt::format("no events before t = {}", t));
    double var = fit.baseline_var(t) / (h0 * h0);
    if (p > 0) {
      Eigen::VectorXd g(p);
      for (Eigen::Index k = 0; k < p; ++k) {
        g(k) = z(k) - fit.baseline_dbeta[static_cast<std::size_t>(k)](t) / h0;
      }
      var += g.dot(fit.covariance * g);
    }
    out.push_back(std::sqrt(std::max(var, 0.0)));
  }
  return out;
}

}  // namespace fgmi
