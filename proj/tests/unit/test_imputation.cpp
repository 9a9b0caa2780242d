#include <cmath>
#include <random>

#include "doctest.h"
#include "fgmi/censoring.hpp"
#include "fgmi/errors.hpp"
#include "fgmi/imputation.hpp"

using namespace fgmi;

namespace {

// Binary X (partly missing), continuous W (partly missing when requested) and
// complete Z, exponential cause-specific times with independent censoring.
CompetingRisksData simulate(int n, std::uint64_t seed, double missing_x, double missing_w = 0.0,
                            double cause2_rate = 0.5, double cens_rate = 0.3) {
  Rng rng = substream(seed);
  std::normal_distribution<double> norm;
  CompetingRisksData data;
  data.covariate_names = {"X", "W", "Z"};
  for (int i = 0; i < n; ++i) {
    const double z = norm(rng);
    const double x = uniform_open(rng) < expit(0.5 * z) ? 1.0 : 0.0;
    const double w = 0.5 * x + 0.3 * z + norm(rng);
    const double h1 = 0.5 * std::exp(0.7 * x + 0.3 * w + 0.4 * z);
    const double h2 = cause2_rate * std::exp(-0.3 * x);
    const double t = -std::log(uniform_open(rng)) / (h1 + h2);
    const double c = cens_rate > 0 ? -std::log(uniform_open(rng)) / cens_rate : 1e9;
    Status st = uniform_open(rng) < h1 / (h1 + h2) ? Status::Cause1 : Status::Cause2;
    CompetingRisksRecord r{"r" + std::to_string(i), std::min(t, c), c < t ? Status::Censored : st, {x, w, z},
                           {true, true, true}};
    if (uniform_open(rng) < missing_x) {
      r.covariates[0] = kMissing;
      r.mask[0] = false;
    }
    if (uniform_open(rng) < missing_w) {
      r.covariates[1] = kMissing;
      r.mask[1] = false;
    }
    data.records.push_back(std::move(r));
  }
  return data;
}

SubdistributionDataset censoring_complete(const CompetingRisksData& data, std::uint64_t seed = 11) {
  return impute_censoring_times(data, fit_censoring_km(data), 1, seed)[0];
}

ImputationConfig config_for(ImputationMethod method, int iterations = 5) {
  ImputationConfig cfg;
  cfg.method = method;
  cfg.iterations = iterations;
  cfg.covariate_models = {{"X", CovariateModel::LogisticBinary}, {"W", CovariateModel::LinearNormal}};
  return cfg;
}

SubdistributionRecord record(double v, Status status, std::vector<double> x) {
  SubdistributionRecord r;
  r.id = "a";
  r.time = v;
  r.v_time = v;
  r.status = status;
  r.mask.assign(x.size(), true);
  r.covariates = std::move(x);
  return r;
}

constexpr double kChiSq1Crit = 6.634896601021214;  // upper 1% point, 1 df

}  // namespace

TEST_CASE("smc_conditional_density closed forms") {
  SubstantiveModel fg;
  fg.components.push_back({Eigen::VectorXd::Constant(1, std::log(2.0)), StepFunction({1.0}, {0.1}, 0.0), Status::Cause1});
  auto ev = record(2.0, Status::Cause1, {0.0});
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1), x1 = Eigen::VectorXd::Ones(1);
  const double ratio = smc_conditional_density(x1, ev, fg) / smc_conditional_density(x0, ev, fg);
  CHECK(ratio == doctest::Approx(2.0 * std::exp(-0.1)).epsilon(1e-12));

  auto cens = record(2.0, Status::Censored, {0.0});
  CHECK(smc_conditional_density(x1, cens, fg) == doctest::Approx(std::exp(-0.2)));
  CHECK(smc_conditional_density(x1, cens, fg) < smc_conditional_density(x0, cens, fg));

  SubstantiveModel null = fg;
  null.components[0].beta(0) = 0.0;
  for (double v : {-2.0, 0.0, 0.5, 3.0}) {
    CHECK(smc_conditional_density(Eigen::VectorXd::Constant(1, v), ev, null) ==
          doctest::Approx(smc_conditional_density(x0, ev, null)));
  }
  // Beta = 0: the binary posterior equals the covariate-model probability.
  CHECK(smc_binary_probability(ev, 0, null, 0.7) == expit(0.7));
}

TEST_CASE("binary SMC step matches the two-point posterior (chi-square)") {
  // Fixed FG and CS parameters; one missing record with a covariate Z.
  SubstantiveModel fg;
  fg.components.push_back({Eigen::Vector2d(0.8, -0.4), StepFunction({0.5, 1.5}, {0.2, 0.7}, 0.0), Status::Cause1});
  SubstantiveModel cs;
  cs.flavor = OutcomeFlavor::CauseSpecific;
  cs.components.push_back({Eigen::Vector2d(0.8, -0.4), StepFunction({0.5, 1.5}, {0.2, 0.7}, 0.0), Status::Cause1});
  cs.components.push_back({Eigen::Vector2d(-0.6, 0.2), StepFunction({0.7}, {0.9}, 0.0), Status::Cause2});

  GlmDraw phi;
  phi.coefficients = Eigen::Vector2d(0.2, 0.5);  // intercept, Z

  struct Case {
    SubstantiveModel model;
    Status status;
    double t, v;
  };
  const std::vector<Case> cases{{fg, Status::Cause1, 1.0, 1.0},
                                {fg, Status::Cause2, 1.0, 3.0},
                                {cs, Status::Cause2, 1.0, 3.0},
                                {cs, Status::Censored, 2.0, 2.0}};
  int idx = 0;
  for (const auto& c : cases) {
    SubdistributionDataset ds;
    ds.covariate_names = {"X", "Z"};
    auto r = record(c.v, c.status, {kMissing, 1.3});
    r.time = c.t;
    r.mask[0] = false;
    ds.records.push_back(r);

    // Oracle: enumerate x in {0,1} with the closed-form likelihood.
    const double z = 1.3;
    const double prior1 = 1.0 / (1.0 + std::exp(-(0.2 + 0.5 * z)));
    double w[2];
    for (int x = 0; x < 2; ++x) {
      double lik = 1.0;
      for (const auto& comp : c.model.components) {
        const bool fgflavor = c.model.flavor == OutcomeFlavor::FineGray;
        const double time = fgflavor ? c.v : c.t;
        const int d = c.status == comp.cause ? 1 : 0;
        const double lp = comp.beta(0) * x + comp.beta(1) * z;
        lik *= std::pow(std::exp(lp), d) * std::exp(-comp.cumhaz(time) * std::exp(lp));
      }
      w[x] = (x ? prior1 : 1.0 - prior1) * lik;
    }
    const double p1 = w[1] / (w[0] + w[1]);

    Rng rng = substream(100, {static_cast<std::uint64_t>(idx++)});
    const int draws = 5000;
    int ones = 0;
    for (int k = 0; k < draws; ++k) {
      auto copy = ds;
      smc_impute_step(copy, 0, {0}, c.model, phi, CovariateModel::LogisticBinary, 10000, rng);
      ones += copy.records[0].covariates[0] == 1.0;
    }
    const double e1 = draws * p1, e0 = draws * (1 - p1);
    const double chi2 = (ones - e1) * (ones - e1) / e1 + (draws - ones - e0) * (draws - ones - e0) / e0;
    CHECK(chi2 < kChiSq1Crit);
    CHECK(smc_binary_probability(ds.records[0], 0, c.model, 0.2 + 0.5 * z) == doctest::Approx(p1).epsilon(1e-12));
  }
}

TEST_CASE("continuous SMC rejection sampler matches the quadrature posterior") {
  SubstantiveModel fg;
  fg.components.push_back({Eigen::VectorXd::Constant(1, 0.9), StepFunction({0.5, 1.0}, {0.4, 1.1}, 0.0), Status::Cause1});
  GlmDraw phi;
  phi.coefficients = Eigen::VectorXd::Constant(1, 0.3);
  phi.residual_sd = 1.2;
  for (Status st : {Status::Cause1, Status::Censored}) {
    SubdistributionDataset ds;
    ds.covariate_names = {"W"};
    auto r = record(1.2, st, {kMissing});
    r.mask[0] = false;
    ds.records.push_back(r);
    // Posterior moments by trapezoidal quadrature.
    const int d = st == Status::Cause1;
    double z0 = 0, z1 = 0, z2 = 0;
    for (double x = -10; x <= 10; x += 1e-3) {
      const double prior = std::exp(-0.5 * (x - 0.3) * (x - 0.3) / 1.44);
      const double dens = prior * std::exp(d * 0.9 * x - 1.1 * std::exp(0.9 * x));
      z0 += dens;
      z1 += dens * x;
      z2 += dens * x * x;
    }
    const double mean = z1 / z0, var = z2 / z0 - mean * mean;
    Rng rng = substream(200 + d);
    const int draws = 20000;
    double s1 = 0, s2 = 0;
    for (int k = 0; k < draws; ++k) {
      auto copy = ds;
      smc_impute_step(copy, 0, {0}, fg, phi, CovariateModel::LinearNormal, 10000, rng);
      s1 += copy.records[0].covariates[0];
      s2 += copy.records[0].covariates[0] * copy.records[0].covariates[0];
    }
    const double emp_mean = s1 / draws, emp_var = s2 / draws - emp_mean * emp_mean;
    CHECK(std::abs(emp_mean - mean) < 4.0 * std::sqrt(var / draws));
    CHECK(emp_var == doctest::Approx(var).epsilon(0.05));
  }

  // An event with zero cumulative hazard has zero likelihood everywhere.
  SubstantiveModel dead;
  dead.components.push_back({Eigen::VectorXd::Constant(1, 0.9), StepFunction(0.0), Status::Cause1});
  SubdistributionDataset ds;
  ds.covariate_names = {"W"};
  auto r = record(1.0, Status::Cause1, {kMissing});
  r.mask[0] = false;
  ds.records.push_back(r);
  Rng rng = substream(9);
  CHECK_THROWS_WITH_AS(smc_impute_step(ds, 0, {0}, dead, phi, CovariateModel::LinearNormal, 100, rng),
                       doctest::Contains("rejection sampling failed"), NumericalError);
}

TEST_CASE("FG and CS flavors agree without cause-2 events or censoring") {
  auto data = simulate(20, 31, 0.0, 0.0, 0.0, 0.0);
  for (const auto& r : data.records) REQUIRE(r.status == Status::Cause1);
  auto ds = make_censoring_complete(data, NoCensoring{});
  Rng rng = substream(1);
  auto fg = fit_substantive(ds, OutcomeFlavor::FineGray, false, rng);
  auto cs = fit_substantive(ds, OutcomeFlavor::CauseSpecific, false, rng);
  REQUIRE(cs.components.size() == 1);
  for (const auto& rec : ds.records) {
    Eigen::VectorXd base = Eigen::Map<const Eigen::VectorXd>(rec.covariates.data(), 3);
    const double offset = smc_log_density(base, rec, fg) - smc_log_density(base, rec, cs);
    for (double x : {0.0, 1.0}) {
      for (double w : {-1.0, 0.4, 2.0}) {
        Eigen::VectorXd cand = base;
        cand(0) = x;
        cand(1) = w;
        CHECK(smc_log_density(cand, rec, fg) - smc_log_density(cand, rec, cs) == doctest::Approx(offset).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("FG-Approx reads the subdistribution hazard at V") {
  // Heavy competing risk so many records have V well beyond T.
  auto data = simulate(300, 41, 0.4, 0.0, 2.0, 0.3);
  auto ds = censoring_complete(data);
  const auto lam = marginal_subdist_cumhaz(ds);
  int differ = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records[i];
    CHECK(r.subdist_cumhaz == doctest::Approx(lam.per_record[i]));
    if (r.status == Status::Cause2 && lam.function(r.time) != r.subdist_cumhaz) ++differ;
    const auto row = covariate_predictors(r, 0, ImputationMethod::FgApprox);
    CHECK(row(row.size() - 1) == r.subdist_cumhaz);
    CHECK(row(row.size() - 2) == (r.event1() ? 1.0 : 0.0));
  }
  CHECK(differ > 20);

  // Swapping in the T-based column changes the imputations.
  auto t_based = ds;
  for (auto& r : t_based.records) r.subdist_cumhaz = lam.function(r.time);
  Rng a = substream(5), b = substream(5);
  auto cfg = config_for(ImputationMethod::FgApprox);
  auto out_v = impute_approx(ds, cfg, OutcomeFlavor::FineGray, a);
  auto out_t = impute_approx(t_based, cfg, OutcomeFlavor::FineGray, b);
  int changed = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) changed += out_v.records[i].covariates[0] != out_t.records[i].covariates[0];
  CHECK(changed > 0);
}

TEST_CASE("imputation invariants across methods") {
  auto data = simulate(200, 51, 0.3, 0.25);
  auto ds = censoring_complete(data);
  for (auto method : {ImputationMethod::FgSmc, ImputationMethod::CsSmc, ImputationMethod::FgApprox,
                      ImputationMethod::CsApprox}) {
    CAPTURE(static_cast<int>(method));
    auto cfg = config_for(method, 3);
    Rng r1 = substream(77), r2 = substream(77);
    auto out = impute_covariates(ds, cfg, r1);
    auto again = impute_covariates(ds, cfg, r2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& in = ds.records[i];
      const auto& o = out.records[i];
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK_FALSE(is_missing(o.covariates[k]));
        if (in.mask[k]) CHECK(o.covariates[k] == in.covariates[k]);
        CHECK(o.covariates[k] == again.records[i].covariates[k]);
        CHECK(o.mask[k] == in.mask[k]);
      }
      CHECK((o.covariates[0] == 0.0 || o.covariates[0] == 1.0));
      CHECK(o.v_time == in.v_time);
    }
  }

  // No missing entries: output identical to input.
  auto complete = censoring_complete(simulate(50, 52, 0.0));
  Rng rng = substream(1);
  auto same = impute_covariates(complete, config_for(ImputationMethod::FgSmc), rng);
  for (std::size_t i = 0; i < complete.size(); ++i) CHECK(same.records[i].covariates == complete.records[i].covariates);
}

TEST_CASE("imputation configuration errors") {
  auto ds = censoring_complete(simulate(100, 61, 0.3));
  Rng rng = substream(1);
  auto cfg = config_for(ImputationMethod::FgSmc);
  cfg.covariate_models.erase("X");
  CHECK_THROWS_WITH_AS(impute_covariates(ds, cfg, rng), doctest::Contains("'X'"), ConfigError);
  cfg = config_for(ImputationMethod::FgSmc);
  cfg.iterations = 0;
  CHECK_THROWS_AS(impute_covariates(ds, cfg, rng), ConfigError);
  cfg = config_for(ImputationMethod::FgSmc);
  cfg.rejection_cap = 50;
  CHECK_THROWS_AS(impute_covariates(ds, cfg, rng), ConfigError);

  auto no_summary = ds;
  for (auto& r : no_summary.records) r.cs_cumhaz2 = kMissing;
  CHECK_THROWS_AS(impute_covariates(no_summary, config_for(ImputationMethod::CsApprox), rng), DataError);

  // Covariate model failure names the covariate.
  auto constant = ds;
  for (auto& r : constant.records) {
    if (r.mask[0]) r.covariates[0] = 0.0;
  }
  CHECK_THROWS_WITH_AS(impute_covariates(constant, config_for(ImputationMethod::FgApprox), rng),
                       doctest::Contains("'X'"), NumericalError);
}
