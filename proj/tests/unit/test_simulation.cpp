#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "fgmi/censoring.hpp"
#include "fgmi/errors.hpp"
#include "fgmi/glm.hpp"
#include "fgmi/scenario.hpp"
#include "fgmi/simulation.hpp"
#include "fgmi/survival.hpp"

using namespace fgmi;

namespace {

struct TvFit {
  Eigen::Vector3d beta;
  Eigen::Vector3d se;
};

// Cox fit with covariates (X, Z, X log t) for binary X: at each event time the
// risk-set sums split into the X = 0 and X = 1 groups, and the time-varying
// term only rescales the X = 1 group by t^b3 e^b1.
TvFit fit_time_varying(const std::vector<double>& time, const std::vector<int>& event, const std::vector<double>& x,
                       const std::vector<double>& z) {
  const std::size_t n = time.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return time[a] > time[b]; });
  Eigen::Vector3d beta = Eigen::Vector3d::Zero();
  Eigen::Matrix3d info;
  for (int iter = 0; iter < 30; ++iter) {
    Eigen::Vector3d score = Eigen::Vector3d::Zero();
    info.setZero();
    double a[2] = {0, 0}, b[2] = {0, 0}, c[2] = {0, 0};  // sums of w, w z, w z^2 per X group
    std::size_t k = 0;
    while (k < n) {
      const double t = time[order[k]];
      std::size_t end = k;
      int d = 0;
      Eigen::Vector3d event_cov = Eigen::Vector3d::Zero();
      while (end < n && time[order[end]] == t) {
        const auto i = order[end];
        const int g = x[i] == 1.0;
        const double w = std::exp(beta(1) * z[i]);
        a[g] += w;
        b[g] += w * z[i];
        c[g] += w * z[i] * z[i];
        if (event[i]) {
          ++d;
          event_cov += Eigen::Vector3d(x[i], z[i], x[i] * std::log(t));
        }
        ++end;
      }
      if (d > 0) {
        const double lt = std::log(t);
        const double s = std::exp(beta(0) + beta(2) * lt);
        const double s0 = a[0] + s * a[1];
        const Eigen::Vector3d s1(s * a[1], b[0] + s * b[1], lt * s * a[1]);
        Eigen::Matrix3d s2;
        s2 << s * a[1], s * b[1], lt * s * a[1],  //
            s * b[1], c[0] + s * c[1], lt * s * b[1],  //
            lt * s * a[1], lt * s * b[1], lt * lt * s * a[1];
        score += event_cov - d * s1 / s0;
        info += d * (s2 / s0 - s1 * s1.transpose() / (s0 * s0));
      }
      k = end;
    }
    const Eigen::Vector3d step = info.ldlt().solve(score);
    beta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  const Eigen::Matrix3d cov = info.inverse();
  return {beta, cov.diagonal().cwiseSqrt()};
}

TvFit time_varying_on(const CompetingRisksData& data) {
  auto ds = make_censoring_complete(data, NoCensoring{});
  std::vector<double> x, z;
  for (const auto& r : ds.records) {
    x.push_back(r.covariates[0]);
    z.push_back(r.covariates[1]);
  }
  return fit_time_varying(ds.v_times(), ds.event1(), x, z);
}

}  // namespace

TEST_CASE("gen_covariates") {
  Rng rng = substream(1);
  auto c = gen_covariates(1000000, rng);
  const double n = static_cast<double>(c.z.size());
  CHECK(std::abs(std::accumulate(c.z.begin(), c.z.end(), 0.0) / n) < 0.02);
  CHECK(std::abs(std::accumulate(c.x.begin(), c.x.end(), 0.0) / n - 0.5) < 0.01);
  double near = 0, ones = 0;
  for (std::size_t i = 0; i < c.z.size(); ++i) {
    if (std::abs(c.z[i]) < 0.01) {
      ++near;
      ones += c.x[i];
    }
  }
  CHECK(std::abs(ones / near - 0.5) < 0.02);
  Rng again = substream(1);
  CHECK(gen_covariates(10, again).z[9] == c.z[9]);
}

TEST_CASE("FG inversion and indirect generation") {
  FgDgmParams prm;
  CHECK(fg_inverse_time(0.5, 0.0, prm) == doctest::Approx(std::pow(std::log(2.0), 4.0 / 3.0)).epsilon(1e-12));
  CHECK(fg_inverse_time(0.5, 0.0, prm) == doctest::Approx(0.6133).epsilon(1e-4));
  CHECK(fg_inverse_time(0.0, 0.3, prm) == 0.0);
  CHECK_THROWS_WITH_AS(fg_inverse_time(1.0, 0.0, prm), "inversion out of domain", NumericalError);
  // Inverting the conditional CDF recovers u.
  for (double eta : {-1.0, 0.0, 1.7}) {
    for (double u : {0.1, 0.5, 0.9}) {
      const double t = fg_inverse_time(u, eta, prm);
      const double e = std::exp(eta);
      const double f0 = prm.p * (1 - std::exp(-prm.b1 * std::pow(t, prm.a1)));
      const double cdf = (1 - std::pow(1 - f0, e)) / (1 - std::pow(1 - prm.p, e));
      CHECK(cdf == doctest::Approx(u).epsilon(1e-10));
    }
  }

  // With no covariate effects every record has P(D = 1) = p and T | D = 1 ~ Weibull.
  FgDgmParams flat = prm;
  flat.beta1 = flat.beta2 = flat.beta1_star = flat.beta2_star = 0.0;
  Rng rng = substream(2);
  const int n = 100000;
  auto data = gen_fg_correct(n, flat, rng);
  std::vector<double> t1;
  for (const auto& r : data.records) {
    if (r.status == Status::Cause1) t1.push_back(r.time);
    CHECK(r.time > 0.0);
  }
  const double phat = static_cast<double>(t1.size()) / n;
  CHECK(std::abs(phat - flat.p) < 3.0 * std::sqrt(flat.p * (1 - flat.p) / n));
  std::sort(t1.begin(), t1.end());
  double ks = 0.0;
  for (std::size_t k = 0; k < t1.size(); k += 7) {
    const double cdf = 1 - std::exp(-flat.b1 * std::pow(t1[k], flat.a1));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(k + 1) / t1.size()));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("gen_cs_latent") {
  Rng rng = substream(3);
  CsDgmParams sym;
  auto d = gen_cs_latent(100000, sym, rng);
  double c1 = 0;
  for (const auto& r : d.records) {
    c1 += r.status == Status::Cause1;
    CHECK((r.time > 0.0 && std::isfinite(r.time)));
  }
  CHECK(std::abs(c1 / 100000 - 0.5) < 0.01);

  // Cause-1 Nelson–Aalen within X = 0 estimates b1 t^a1 when Z has no cause-1 effect.
  CsDgmParams prm{0.8, 0.6, 0.5, 0.0, 1.2, 0.4, 0.3, 0.4};
  Rng rng2 = substream(4);
  auto data = gen_cs_latent(50000, prm, rng2);
  std::vector<double> t;
  std::vector<int> e;
  for (const auto& r : data.records) {
    if (r.covariates[0] == 0.0) {
      t.push_back(r.time);
      e.push_back(r.status == Status::Cause1);
    }
  }
  auto na = nelson_aalen(t, e);
  std::vector<double> sorted = t;
  std::sort(sorted.begin(), sorted.end());
  const double upper = sorted[sorted.size() * 3 / 4];
  double sup = 0.0;
  for (double s : na.jump_times()) {
    if (s > upper) break;
    sup = std::max(sup, std::abs(na(s) - prm.b1 * std::pow(s, prm.a1)));
  }
  CHECK(sup < 0.03);
}

TEST_CASE("apply_censoring") {
  Rng rng = substream(5);
  auto data = gen_fg_correct(1000, FgDgmParams{}, rng);
  auto none = apply_censoring(data, {CensoringType::None, 0.49}, rng);
  CHECK(none.censoring_times.empty());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(none.data.records[i].time == data.records[i].time);
    CHECK(none.data.records[i].status == data.records[i].status);
  }
  auto admin = apply_censoring(data, {CensoringType::Administrative, 0.49}, rng);
  REQUIRE(admin.censoring_times.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = admin.data.records[i];
    if (r.status != Status::Censored) CHECK(admin.censoring_times[i] >= r.time);
    if (r.status == Status::Censored) CHECK(admin.censoring_times[i] == r.time);
  }

  for (double p : {0.15, 0.65}) {
    FgDgmParams prm;
    prm.p = p;
    Rng r = substream(6);
    auto big = apply_censoring(gen_fg_correct(100000, prm, r), {CensoringType::Random, 0.49}, r);
    double cens = 0;
    for (const auto& rec : big.data.records) cens += rec.status == Status::Censored;
    CHECK(std::abs(cens / 100000 - 0.30) < 0.02);
  }
}

TEST_CASE("impose_mar") {
  std::vector<double> z(1000);
  Rng rng = substream(7);
  std::normal_distribution<double> norm;
  for (auto& v : z) v = norm(rng);
  CHECK(solve_mar_intercept(z, 0.0, 0.4) == doctest::Approx(std::log(0.4 / 0.6)).epsilon(1e-9));
  CHECK(solve_mar_intercept(z, 0.0, 0.4) == doctest::Approx(-0.4055).epsilon(1e-3));
  const double eta0 = solve_mar_intercept(z, 1.5, 0.4);
  double mean = 0;
  for (double v : z) mean += expit(eta0 + 1.5 * v);
  CHECK(mean / 1000 == doctest::Approx(0.4).epsilon(1e-8));
  CHECK_THROWS_AS(solve_mar_intercept(z, 0.0, 1.0), DataError);

  Rng r = substream(8);
  auto data = gen_fg_correct(100000, FgDgmParams{}, r);
  impose_mar(data, 1.5, 0.4, r);
  std::vector<std::pair<double, bool>> zm;
  for (const auto& rec : data.records) {
    zm.emplace_back(rec.covariates[1], !rec.mask[0]);
    CHECK(rec.mask[1]);
    if (!rec.mask[0]) CHECK(is_missing(rec.covariates[0]));
  }
  double missing = 0;
  for (const auto& [zz, miss] : zm) missing += miss;
  CHECK(std::abs(missing / 100000 - 0.4) < 0.02);
  std::sort(zm.begin(), zm.end());
  double prev = -1.0;
  for (int q = 0; q < 4; ++q) {
    double frac = 0;
    for (int i = q * 25000; i < (q + 1) * 25000; ++i) frac += zm[i].second;
    frac /= 25000;
    CHECK(frac > prev);
    prev = frac;
  }
}

TEST_CASE("true_cuminc") {
  FgDgmParams fg;
  CHECK(true_cuminc(Dgm{fg}, 1, 1, 0.0) == 0.0);
  CHECK(true_cuminc(Dgm{fg}, 0, 0, 1e6) == doctest::Approx(fg.p).epsilon(1e-12));
  CHECK(true_cuminc(Dgm{fg}, 1, 1, 2.0) == doctest::Approx(
      1 - std::pow(1 - fg.p * (1 - std::exp(-std::pow(2.0, 0.75))), std::exp(1.25))).epsilon(1e-12));

  // Equal shapes: F1(t) = h1 / (h1 + h2) (1 - exp(-(b1 e1 + b2 e2) t^a)).
  CsDgmParams eq{0.75, 0.4, 0.6, 0.3, 0.75, 0.9, -0.2, 0.1};
  for (double t : {0.01, 0.5, 2.0, 5.0}) {
    const double r1 = eq.b1 * std::exp(0.6 + 0.3), r2 = eq.b2 * std::exp(-0.2 + 0.1);
    const double closed = r1 / (r1 + r2) * (1 - std::exp(-(r1 + r2) * std::pow(t, 0.75)));
    CHECK(std::abs(true_cuminc(Dgm{eq}, 1, 1, t) - closed) < 1e-8);
  }
  // Different shapes: the two incidences exhaust the mass.
  CsDgmParams prm{0.8, 0.15, 1.1, 0.55, 0.65, 0.8, 0.25, 0.15};
  CHECK(true_cuminc(Dgm{prm}, 1, -0.5, 1e4) + true_cuminc_cause2(prm, 1, -0.5, 1e4) == doctest::Approx(1.0).epsilon(1e-7));

  // Monte Carlo oracle: empirical incidence on uncensored draws (no covariate effects).
  CsDgmParams flat{0.8, 0.15, 0, 0, 0.65, 0.8, 0, 0};
  Rng rng = substream(9);
  auto data = gen_cs_latent(200000, flat, rng);
  for (double t : {0.5, 1.0, 3.0, 5.0}) {
    double count = 0;
    for (const auto& r : data.records) count += (r.status == Status::Cause1 && r.time <= t);
    CHECK(std::abs(count / 200000 - true_cuminc(Dgm{flat}, 0, 0, t)) < 0.01);
  }
}

TEST_CASE("Weibull fits and calibration") {
  CsDgmParams truth{0.8, 0.3, 0.7, 0.4, 0.6, 0.7, -0.3, 0.2};
  Rng rng = substream(10);
  auto data = gen_cs_latent(50000, truth, rng);
  Eigen::MatrixXd x(50000, 2);
  for (int i = 0; i < 50000; ++i) {
    x(i, 0) = data.records[i].covariates[0];
    x(i, 1) = data.records[i].covariates[1];
  }
  auto w = fit_weibull_ph(data.times(), data.cause_indicator(Status::Cause1), x);
  const Eigen::Vector4d est(std::log(w.shape), std::log(w.rate), w.gamma(0), w.gamma(1));
  const Eigen::Vector4d tru(std::log(0.8), std::log(0.3), 0.7, 0.4);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(est(k) - tru(k)) < 3.0 * std::sqrt(w.covariance(k, k)));

  // Calibration differs between censoring configurations.
  FgDgmParams fg;
  Rng a = substream(11), b = substream(11);
  auto uncensored = calibrate_cs_params(fg, {CensoringType::None, 0.49}, 100000, a);
  auto censored = calibrate_cs_params(fg, {CensoringType::Random, 0.49}, 100000, b);
  CHECK(std::abs(uncensored.gamma11 - censored.gamma11) > 0.05);

  // Round trip: refitting data generated from the calibrated parameters recovers them.
  Rng c = substream(12);
  auto round = gen_cs_latent(100000, uncensored, c);
  Eigen::MatrixXd rx(100000, 2);
  for (int i = 0; i < 100000; ++i) {
    rx(i, 0) = round.records[i].covariates[0];
    rx(i, 1) = round.records[i].covariates[1];
  }
  auto w1 = fit_weibull_ph(round.times(), round.cause_indicator(Status::Cause1), rx);
  auto w2 = fit_weibull_ph(round.times(), round.cause_indicator(Status::Cause2), rx);
  // Joint Wald statistic per cause against the 1% point of chi^2_4, plus a
  // per-parameter 3 SE bound.
  auto wald = [](const WeibullFit& w, double a, double b, double g1, double g2) {
    const Eigen::Vector4d diff(std::log(w.shape) - std::log(a), std::log(w.rate) - std::log(b), w.gamma(0) - g1,
                               w.gamma(1) - g2);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(diff(k)) < 3.0 * std::sqrt(w.covariance(k, k)));
    return diff.dot(w.covariance.ldlt().solve(diff));
  };
  constexpr double kChiSq4Crit = 13.276704135987622;
  CHECK(wald(w1, uncensored.a1, uncensored.b1, uncensored.gamma11, uncensored.gamma12) < kChiSq4Crit);
  CHECK(wald(w2, uncensored.a2, uncensored.b2, uncensored.gamma21, uncensored.gamma22) < kChiSq4Crit);

  // Symmetric FG mechanism: both cause models coincide.
  FgDgmParams sym;
  sym.p = 0.5;
  sym.beta1 = sym.beta2 = sym.beta1_star = sym.beta2_star = 0.0;
  Rng d = substream(13);
  auto s = calibrate_cs_params(sym, {CensoringType::None, 0.49}, 100000, d);
  CHECK(std::abs(s.a1 - s.a2) < 0.02);
  CHECK(std::abs(s.b1 - s.b2) < 0.03);
  CHECK(std::abs(s.gamma11 - s.gamma21) < 0.04);
  CHECK(std::abs(s.gamma12 - s.gamma22) < 0.04);
}

TEST_CASE("subdistribution hazard ratio is time-constant under the FG mechanism") {
  Rng rng = substream(14);
  auto fg_data = gen_fg_correct(50000, FgDgmParams{}, rng);
  auto fit = time_varying_on(fg_data);
  CHECK(std::abs(fit.beta(2)) < 2.0 * fit.se(2));
  CHECK(std::abs(fit.beta(0) - 0.75) < 3.0 * fit.se(0));

  // The same test detects the time-varying ratio of the cause-specific mechanism.
  Rng rng2 = substream(15);
  CsDgmParams cs{0.81, 0.13, 1.18, 0.58, 0.65, 0.79, 0.21, 0.14};
  auto cs_fit = time_varying_on(gen_cs_latent(50000, cs, rng2));
  CHECK(std::abs(cs_fit.beta(2)) > 3.0 * cs_fit.se(2));
}

TEST_CASE("summarize") {
  std::vector<double> est{0.9, 1.1, 1.0, 1.2}, se{0.1, 0.1, 0.1, 0.1};
  std::vector<bool> cov(4, true);
  auto s = summarize(est, se, cov, 1.0);
  CHECK(s.bias == doctest::Approx(0.05));
  CHECK(s.relative_bias == doctest::Approx(0.05));
  const double sd = std::sqrt((0.15 * 0.15 + 0.05 * 0.05 + 0.05 * 0.05 + 0.15 * 0.15) / 3.0);
  CHECK(s.emp_se == doctest::Approx(sd));
  CHECK(s.bias_mcse == doctest::Approx(sd / 2.0));
  CHECK(s.emp_se_mcse == doctest::Approx(sd / std::sqrt(6.0)));
  CHECK(s.mod_se == doctest::Approx(0.1));
  CHECK(s.mod_se_mcse == doctest::Approx(0.0));
  CHECK(s.coverage == 1.0);
  CHECK(s.coverage_mcse == 0.0);
  CHECK(s.rmse == doctest::Approx(std::sqrt((0.01 + 0.01 + 0.0 + 0.04) / 4.0)));
}

TEST_CASE("run_scenario determinism and failure accounting") {
  ScenarioConfig cfg;
  cfg.name = "tiny";
  cfg.n = 200;
  cfg.n_sim = 3;
  cfg.m = 2;
  cfg.iterations = 2;
  cfg.methods = {AnalysisMethod::Full, AnalysisMethod::FgSmc, AnalysisMethod::Cca};
  auto a = run_scenario(cfg);
  auto b = run_scenario(cfg);
  cfg.threads = 3;
  auto c = run_scenario(cfg);
  std::ostringstream sa, sb, sc, ra, rc;
  write_performance_csv(sa, a);
  write_performance_csv(sb, b);
  write_performance_csv(sc, c);
  write_replications_csv(ra, a);
  write_replications_csv(rc, c);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str() == sc.str());
  CHECK(ra.str() == rc.str());
  CHECK(a.failures.at(AnalysisMethod::Full) == 0);
  CHECK(a.row(AnalysisMethod::Full, "beta.X", "coverage").value >= 0.0);
  CHECK(a.row(AnalysisMethod::Full, "cuminc", "rmse", "X=1,Z=1", 3.0).true_value ==
        doctest::Approx(true_cuminc(Dgm{cfg.fg}, 1, 1, 3.0)));

  // Paired design: every method sees the same generated data.
  auto rep = simulate_replication(cfg, {}, 1);
  auto rep2 = simulate_replication(cfg, {}, 1);
  CHECK(rep.masked.records[5].time == rep2.masked.records[5].time);

  ScenarioConfig bad = cfg;
  bad.n = 12;
  bad.target_prob = 0.9;
  bad.methods = {AnalysisMethod::Cca};
  CHECK_THROWS_WITH_AS(run_scenario(bad), doctest::Contains("failed in"), NumericalError);
}
