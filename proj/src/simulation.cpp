#include "fgmi/simulation.hpp"

#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "fgmi/censoring.hpp"
#include "fgmi/cox.hpp"
#include "fgmi/errors.hpp"
#include "fgmi/glm.hpp"

namespace fgmi {

namespace {

CompetingRisksData empty_xz() {
  CompetingRisksData d;
  d.covariate_names = {"X", "Z"};
  return d;
}

CompetingRisksRecord make_record(std::size_t i, double t, Status s, double x, double z) {
  return {std::to_string(i + 1), t, s, {x, z}, {true, true}};
}

double weibull_time(double u, double shape, double rate, double lp) {
  return std::pow(-std::log(u) / (rate * std::exp(lp)), 1.0 / shape);
}

// F_k(t) for Weibull cause-specific hazards, via s = u^{a_k}, which removes the
// singularity of h_k at 0 when a_k < 1:
//   F_k(t) = int_0^{t^{a_k}} b_k e_k exp(-b_k e_k s - b_j e_j s^{a_j / a_k}) ds.
double cs_cuminc(double ak, double bk, double ek, double aj, double bj, double ej, double t) {
  if (!(t > 0.0)) return 0.0;
  const double upper = std::pow(t, ak);
  auto f = [&](double s) { return bk * ek * std::exp(-bk * ek * s - bj * ej * std::pow(s, aj / ak)); };
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, upper, 20, 1e-12, &error);
}

}  // namespace

void FgDgmParams::validate() const {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  if (!(a1 > 0 && b1 > 0 && a2 > 0 && b2 > 0)) throw ConfigError("Weibull shapes and rates must be positive");
}

void CsDgmParams::validate() const {
  if (!(a1 > 0 && b1 > 0 && a2 > 0 && b2 > 0)) throw ConfigError("Weibull shapes and rates must be positive");
}

Covariates gen_covariates(std::size_t n, Rng& rng) {
  std::normal_distribution<double> norm;
  Covariates c;
  c.z.resize(n);
  c.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.z[i] = norm(rng);
    c.x[i] = uniform_open(rng) < expit(c.z[i]) ? 1.0 : 0.0;
  }
  return c;
}

double fg_inverse_time(double u, double eta, const FgDgmParams& prm) {
  const double e = std::exp(eta);
  const double log_surv = e * std::log1p(-prm.p);  // log (1 - p)^e
  const double p_cause1 = -std::expm1(log_surv);
  // [1 - u P(D=1)]^{1/e}, then the baseline quantile.
  const double root = std::exp(std::log1p(-u * p_cause1) / e);
  const double arg = 1.0 - (1.0 - root) / prm.p;
  if (!(arg > 0.0 && arg <= 1.0)) throw NumericalError("inversion out of domain");
  return std::pow(-std::log(arg) / prm.b1, 1.0 / prm.a1);
}

CompetingRisksData gen_fg_correct(std::size_t n, const FgDgmParams& prm, Rng& rng) {
  prm.validate();
  const auto cov = gen_covariates(n, rng);
  CompetingRisksData out = empty_xz();
  out.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = cov.x[i], z = cov.z[i];
    const double eta = prm.beta1 * x + prm.beta2 * z;
    const double p_cause2 = std::exp(std::exp(eta) * std::log1p(-prm.p));
    const bool cause2 = uniform_open(rng) < p_cause2;
    const double u = uniform_open(rng);
    if (cause2) {
      const double t = weibull_time(u, prm.a2, prm.b2, prm.beta1_star * x + prm.beta2_star * z);
      out.records.push_back(make_record(i, t, Status::Cause2, x, z));
    } else {
      out.records.push_back(make_record(i, fg_inverse_time(u, eta, prm), Status::Cause1, x, z));
    }
  }
  return out;
}

CompetingRisksData gen_cs_latent(std::size_t n, const CsDgmParams& prm, Rng& rng) {
  prm.validate();
  const auto cov = gen_covariates(n, rng);
  CompetingRisksData out = empty_xz();
  out.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = cov.x[i], z = cov.z[i];
    const double t1 = weibull_time(uniform_open(rng), prm.a1, prm.b1, prm.gamma11 * x + prm.gamma12 * z);
    const double t2 = weibull_time(uniform_open(rng), prm.a2, prm.b2, prm.gamma21 * x + prm.gamma22 * z);
    out.records.push_back(make_record(i, std::min(t1, t2), t1 <= t2 ? Status::Cause1 : Status::Cause2, x, z));
  }
  return out;
}

CompetingRisksData generate(const Dgm& dgm, std::size_t n, Rng& rng) {
  if (const auto* fg = std::get_if<FgDgmParams>(&dgm)) return gen_fg_correct(n, *fg, rng);
  return gen_cs_latent(n, std::get<CsDgmParams>(dgm), rng);
}

SimulatedData apply_censoring(const CompetingRisksData& data, const CensoringSpec& spec, Rng& rng) {
  SimulatedData out{data, {}};
  if (spec.type == CensoringType::None) return out;
  if (!(spec.rate > 0.0)) throw ConfigError("censoring rate must be positive");
  std::exponential_distribution<double> cens(spec.rate);
  out.censoring_times.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double c = cens(rng);
    out.censoring_times[i] = c;
    auto& r = out.data.records[i];
    if (c < r.time) {
      r.time = c;
      r.status = Status::Censored;
    }
  }
  return out;
}

double solve_mar_intercept(std::span<const double> z, double eta1, double target) {
  if (z.empty()) throw DataError("empty dataset");
  auto mean_prob = [&](double eta0) {
    double s = 0.0;
    for (double v : z) s += expit(eta0 + eta1 * v);
    return s / static_cast<double>(z.size());
  };
  double lo = -20.0, hi = 20.0;
  if (!(target > 0.0 && target < 1.0) || mean_prob(lo) > target || mean_prob(hi) < target) {
    throw DataError(fmt::format("missingness target {} unattainable", target));
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (mean_prob(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double impose_mar(CompetingRisksData& data, double eta1, double target_prob, Rng& rng, const std::string& covariate,
                  const std::string& by) {
  const auto j = data.covariate_index(covariate);
  const auto k = data.covariate_index(by);
  std::vector<double> z;
  z.reserve(data.size());
  for (const auto& r : data.records) {
    if (!r.mask[k]) throw DataError(fmt::format("covariate '{}' driving missingness must be complete", by));
    z.push_back(r.covariates[k]);
  }
  const double eta0 = solve_mar_intercept(z, eta1, target_prob);
  for (auto& r : data.records) {
    if (uniform_open(rng) < expit(eta0 + eta1 * r.covariates[k])) {
      r.covariates[j] = kMissing;
      r.mask[j] = false;
    }
  }
  return eta0;
}

double true_cuminc(const Dgm& dgm, double x, double z, double t) {
  if (!(t > 0.0)) return 0.0;
  if (const auto* fg = std::get_if<FgDgmParams>(&dgm)) {
    const double f0 = fg->p * -std::expm1(-fg->b1 * std::pow(t, fg->a1));
    return -std::expm1(std::exp(fg->beta1 * x + fg->beta2 * z) * std::log1p(-f0));
  }
  const auto& c = std::get<CsDgmParams>(dgm);
  return cs_cuminc(c.a1, c.b1, std::exp(c.gamma11 * x + c.gamma12 * z), c.a2, c.b2,
                   std::exp(c.gamma21 * x + c.gamma22 * z), t);
}

double true_cuminc_cause2(const CsDgmParams& c, double x, double z, double t) {
  return cs_cuminc(c.a2, c.b2, std::exp(c.gamma21 * x + c.gamma22 * z), c.a1, c.b1,
                   std::exp(c.gamma11 * x + c.gamma12 * z), t);
}

WeibullFit fit_weibull_ph(std::span<const double> time, std::span<const int> event, const Eigen::MatrixXd& x) {
  const auto n = static_cast<Eigen::Index>(time.size());
  if (n == 0 || static_cast<Eigen::Index>(event.size()) != n || x.rows() != n) {
    throw DataError("weibull fit: inconsistent inputs");
  }
  const Eigen::Index q = x.cols();
  const Eigen::Index p = q + 2;
  double n_events = 0.0, total_time = 0.0;
  Eigen::VectorXd lt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(time[i] > 0.0)) throw DataError("weibull fit: times must be positive");
    lt(i) = std::log(time[i]);
    n_events += event[i];
    total_time += time[i];
  }
  if (n_events == 0) throw DataError("weibull fit: no events");

  // theta = (log shape, log rate, gamma).
  auto evaluate = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
    const double a = std::exp(th(0));
    double ll = 0.0;
    if (grad) grad->setZero(p);
    if (hess) hess->setZero(p, p);
    Eigen::VectorXd c(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lp = q > 0 ? x.row(i).dot(th.tail(q)) : 0.0;
      const double big_a = std::exp(th(1) + a * lt(i) + lp);
      const int d = event[i];
      ll += d * (th(0) + th(1) + (a - 1.0) * lt(i) + lp) - big_a;
      if (!grad) continue;
      c(0) = a * lt(i);
      c(1) = 1.0;
      if (q > 0) c.tail(q) = x.row(i).transpose();
      (*grad)(0) += d * (1.0 + a * lt(i));
      (*grad)(1) += d;
      if (q > 0) grad->tail(q) += d * x.row(i).transpose();
      *grad -= big_a * c;
      if (hess) {
        hess->noalias() -= big_a * c * c.transpose();
        (*hess)(0, 0) += (d - big_a) * a * lt(i);
      }
    }
    return ll;
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  theta(1) = std::log(n_events / total_time);
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double ll = evaluate(theta, &grad, &hess);
  WeibullFit fit;
  bool converged = false;
  for (int iter = 1; iter <= 100 && !converged; ++iter) {
    fit.n_iterations = iter;
    const Eigen::VectorXd step = (-hess).ldlt().solve(grad);
    Eigen::VectorXd cand = theta + step;
    double cand_ll = evaluate(cand, nullptr, nullptr);
    for (int h = 0; h < 40 && !(cand_ll >= ll); ++h) {
      cand = theta + std::ldexp(1.0, -(h + 1)) * step;
      cand_ll = evaluate(cand, nullptr, nullptr);
    }
    if (!std::isfinite(cand_ll)) break;
    converged = std::abs(cand_ll - ll) <= 1e-10 * (std::abs(ll) + 1.0) && step.cwiseAbs().maxCoeff() < 1e-6;
    theta = cand;
    ll = evaluate(theta, &grad, &hess);
  }
  if (!converged) throw NumericalError("weibull fit did not converge");
  fit.shape = std::exp(theta(0));
  fit.rate = std::exp(theta(1));
  fit.gamma = theta.tail(q);
  fit.covariance = (-hess).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.loglik = ll;
  return fit;
}

CsDgmParams calibrate_cs_params(const FgDgmParams& fg, const CensoringSpec& censoring, std::size_t n_big, Rng& rng) {
  const auto sim = apply_censoring(gen_fg_correct(n_big, fg, rng), censoring, rng);
  const auto& data = sim.data;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = data.records[i].covariates[0];
    x(static_cast<Eigen::Index>(i), 1) = data.records[i].covariates[1];
  }
  const auto t = data.times();
  const auto w1 = fit_weibull_ph(t, data.cause_indicator(Status::Cause1), x);
  const auto w2 = fit_weibull_ph(t, data.cause_indicator(Status::Cause2), x);
  return {w1.shape, w1.rate, w1.gamma(0), w1.gamma(1), w2.shape, w2.rate, w2.gamma(0), w2.gamma(1)};
}

Eigen::Vector2d least_false_beta(const CsDgmParams& params, const CensoringSpec& censoring, std::size_t n_big,
                                 Rng& rng) {
  const auto sim = apply_censoring(gen_cs_latent(n_big, params, rng), censoring, rng);
  const auto ds = censoring.type == CensoringType::None
                      ? make_censoring_complete(sim.data, NoCensoring{})
                      : make_censoring_complete(sim.data, Administrative{sim.censoring_times});
  const auto fit = fit_cox(ds, {"X", "Z"});
  return fit.coefficients;
}

}  // namespace fgmi
