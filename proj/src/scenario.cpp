#include "fgmi/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "fgmi/errors.hpp"
#include "fgmi/parallel.hpp"

namespace fgmi {

namespace {

constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kMethodStream = 2;
constexpr std::uint64_t kCalibrationStream = 3;
constexpr std::uint64_t kLeastFalseStream = 4;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t method_index(AnalysisMethod m) { return static_cast<std::size_t>(m); }

std::string fmt_num(double v) { return std::isnan(v) ? "NA" : fmt::format("{:.10g}", v); }

}  // namespace

void ScenarioConfig::validate() const {
  if (n < 10) throw ConfigError("n must be at least 10");
  if (n_sim < 1) throw ConfigError("n_sim must be at least 1");
  if (m < 1) throw ConfigError("m must be at least 1");
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  if (!(target_prob > 0.0 && target_prob < 1.0)) throw ConfigError("target_prob must lie in (0, 1)");
  if (methods.empty()) throw ConfigError("at least one method is required");
  for (double h : horizons) {
    if (!(h > 0.0)) throw ConfigError("horizons must be positive");
  }
  if (!std::is_sorted(horizons.begin(), horizons.end())) throw ConfigError("horizons must be increasing");
  fg.validate();
  if (cs) cs->validate();
}

std::string reference_label(double x, double z) { return fmt::format("X={:g},Z={:g}", x, z); }

const PerformanceRow& ScenarioResult::row(AnalysisMethod method, const std::string& estimand, const std::string& metric,
                                          const std::string& reference, double time) const {
  for (const auto& r : performance) {
    if (r.method == method && r.estimand == estimand && r.metric == metric && r.reference == reference &&
        r.time == time) {
      return r;
    }
  }
  throw DataError(fmt::format("no performance row for {} {} {} {} {}", method_name(method), estimand, metric,
                              reference, time));
}

Summary summarize(const std::vector<double>& est, const std::vector<double>& se, const std::vector<bool>& covered,
                  double truth) {
  Summary s{};
  const auto n = static_cast<double>(est.size());
  if (est.empty()) {
    s = {kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
    return s;
  }
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / n;
  double ss = 0.0, sq_err = 0.0;
  for (double e : est) {
    ss += (e - mean) * (e - mean);
    sq_err += (e - truth) * (e - truth);
  }
  const double mse = sq_err / n;
  s.bias = mean - truth;
  s.emp_se = est.size() > 1 ? std::sqrt(ss / (n - 1.0)) : kNaN;
  s.bias_mcse = est.size() > 1 ? s.emp_se / std::sqrt(n) : kNaN;
  s.relative_bias = truth != 0.0 ? s.bias / truth : kNaN;
  s.relative_bias_mcse = truth != 0.0 ? s.bias_mcse / std::abs(truth) : kNaN;
  s.emp_se_mcse = est.size() > 1 ? s.emp_se / std::sqrt(2.0 * (n - 1.0)) : kNaN;

  if (se.empty()) {
    s.mod_se = s.mod_se_mcse = kNaN;
  } else {
    double mean_var = 0.0;
    for (double v : se) mean_var += v * v;
    mean_var /= n;
    double var_var = 0.0;
    for (double v : se) var_var += (v * v - mean_var) * (v * v - mean_var);
    var_var = est.size() > 1 ? var_var / (n - 1.0) : kNaN;
    s.mod_se = std::sqrt(mean_var);
    s.mod_se_mcse = std::sqrt(var_var / (4.0 * n * mean_var));
  }

  const double cov = static_cast<double>(std::count(covered.begin(), covered.end(), true)) / n;
  s.coverage = cov;
  s.coverage_mcse = std::sqrt(cov * (1.0 - cov) / n);

  s.rmse = std::sqrt(mse);
  double mse_var = 0.0;
  for (double e : est) {
    const double d = (e - truth) * (e - truth) - mse;
    mse_var += d * d;
  }
  const double mse_mcse = est.size() > 1 ? std::sqrt(mse_var / (n * (n - 1.0))) : kNaN;
  s.rmse_mcse = s.rmse > 0.0 ? mse_mcse / (2.0 * s.rmse) : 0.0;
  return s;
}

ReplicationData simulate_replication(const ScenarioConfig& config, const CsDgmParams& cs, int replication) {
  Rng rng = substream(config.seed, {kDataStream, static_cast<std::uint64_t>(replication)});
  const Dgm dgm = config.dgm == DgmKind::FgCorrect ? Dgm{config.fg} : Dgm{cs};
  ReplicationData out;
  out.full = apply_censoring(generate(dgm, config.n, rng), config.censoring, rng);
  out.masked = out.full.data;
  impose_mar(out.masked, config.eta1, config.target_prob, rng);
  return out;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  ScenarioResult res;
  res.config = config;

  Dgm dgm = config.fg;
  if (config.dgm == DgmKind::CsLatent) {
    if (config.cs) {
      res.cs_params = *config.cs;
    } else {
      Rng rng = substream(config.seed, {kCalibrationStream});
      res.cs_params = calibrate_cs_params(config.fg, config.calibration_censoring, config.n_big, rng);
    }
    dgm = res.cs_params;
    Rng rng = substream(config.seed, {kLeastFalseStream});
    const auto lf = least_false_beta(res.cs_params, config.censoring, config.n_big, rng);
    res.beta_target = {lf(0), lf(1)};
  } else {
    res.beta_target = {config.fg.beta1, config.fg.beta2};
  }
  std::vector<NamedValues> refs;
  for (const auto& [x, z] : config.references) {
    refs.push_back({{"X", x}, {"Z", z}});
    std::vector<double> truth;
    for (double t : config.horizons) truth.push_back(true_cuminc(dgm, x, z, t));
    res.true_cuminc.push_back(std::move(truth));
  }

  const auto n_methods = config.methods.size();
  res.replications.resize(static_cast<std::size_t>(config.n_sim) * n_methods);
  parallel_for(static_cast<std::size_t>(config.n_sim), config.threads, [&](std::size_t rep) {
    const auto data = simulate_replication(config, res.cs_params, static_cast<int>(rep));
    for (std::size_t k = 0; k < n_methods; ++k) {
      const auto method = config.methods[k];
      auto& rec = res.replications[rep * n_methods + k];
      rec.replication = static_cast<int>(rep);
      rec.method = method;
      AnalysisOptions opts;
      opts.method = method;
      opts.m = config.m;
      opts.iterations = config.iterations;
      Rng seeder = substream(config.seed, {kMethodStream, rep, method_index(method)});
      opts.seed = seeder();
      opts.covariate_models = {{"X", CovariateModel::LogisticBinary}};
      if (config.censoring.type == CensoringType::Administrative) opts.known_censoring_times = data.full.censoring_times;
      opts.horizons = config.horizons;
      opts.references = refs;
      try {
        const auto result = analyze(method == AnalysisMethod::Full ? data.full.data : data.masked, opts);
        rec.beta = result.coefficients;
        rec.cuminc = result.cuminc;
        rec.ok = true;
      } catch (const Error& e) {
        rec.ok = false;
        rec.error = e.what();
      }
    }
  });

  for (auto method : config.methods) res.failures[method] = 0;
  for (const auto& rec : res.replications) {
    if (!rec.ok) ++res.failures[rec.method];
  }
  for (const auto& [method, count] : res.failures) {
    if (count > config.max_failure_fraction * config.n_sim) {
      std::string first;
      for (const auto& rec : res.replications) {
        if (rec.method == method && !rec.ok) {
          first = rec.error;
          break;
        }
      }
      throw NumericalError(fmt::format("scenario '{}': method {} failed in {} of {} replications (first: {})",
                                       config.name, method_name(method), count, config.n_sim, first));
    }
  }

  auto push = [&](AnalysisMethod method, const std::string& estimand, const std::string& ref, double time,
                  double truth, const Summary& s, int n_ok, bool with_mod_se) {
    auto add = [&](const char* metric, double v, double mcse) {
      res.performance.push_back({method, estimand, ref, time, truth, metric, v, mcse, n_ok});
    };
    add("bias", s.bias, s.bias_mcse);
    add("relative_bias", s.relative_bias, s.relative_bias_mcse);
    add("emp_se", s.emp_se, s.emp_se_mcse);
    if (with_mod_se) add("mod_se", s.mod_se, s.mod_se_mcse);
    add("coverage", s.coverage, s.coverage_mcse);
    add("rmse", s.rmse, s.rmse_mcse);
  };

  const std::vector<std::string> terms{"X", "Z"};
  for (auto method : config.methods) {
    std::vector<const ReplicationRecord*> ok;
    for (const auto& rec : res.replications) {
      if (rec.method == method && rec.ok) ok.push_back(&rec);
    }
    const int n_ok = static_cast<int>(ok.size());
    for (std::size_t j = 0; j < terms.size(); ++j) {
      std::vector<double> est, se;
      std::vector<bool> cov;
      const double truth = res.beta_target[j];
      for (const auto* rec : ok) {
        const auto& b = rec->beta[j];
        est.push_back(b.estimate);
        se.push_back(b.std_error());
        cov.push_back(b.ci_low <= truth && truth <= b.ci_high);
      }
      push(method, "beta." + terms[j], "", 0.0, truth, summarize(est, se, cov, truth), n_ok, true);
    }
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const auto label = reference_label(config.references[r].first, config.references[r].second);
      for (std::size_t h = 0; h < config.horizons.size(); ++h) {
        std::vector<double> est;
        std::vector<bool> cov;
        const double truth = res.true_cuminc[r][h];
        for (const auto* rec : ok) {
          const auto& pt = rec->cuminc[r][h];
          est.push_back(pt.estimate);
          cov.push_back(pt.ci_low <= truth && truth <= pt.ci_high);
        }
        push(method, "cuminc", label, config.horizons[h], truth, summarize(est, {}, cov, truth), n_ok, false);
      }
    }
  }
  return res;
}

void write_performance_csv(std::ostream& out, const ScenarioResult& result, bool with_header) {
  if (with_header) out << "scenario,method,estimand,reference,time,true_value,metric,value,mcse,n_ok\n";
  for (const auto& r : result.performance) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", result.config.name, method_name(r.method), r.estimand,
                       r.reference.empty() ? "" : "\"" + r.reference + "\"",
                       r.estimand == "cuminc" ? fmt_num(r.time) : "", fmt_num(r.true_value), r.metric,
                       fmt_num(r.value), fmt_num(r.mcse), r.n_ok);
  }
}

void write_replications_csv(std::ostream& out, const ScenarioResult& result, bool with_header) {
  if (with_header) out << "scenario,replication,method,ok,estimand,reference,time,estimate,std_error,ci_low,ci_high,error\n";
  const auto& cfg = result.config;
  for (const auto& rec : result.replications) {
    const auto method = method_name(rec.method);
    if (!rec.ok) {
      std::string err = rec.error;
      std::replace(err.begin(), err.end(), '"', '\'');
      out << fmt::format("{},{},{},0,,,,,,,,\"{}\"\n", cfg.name, rec.replication, method, err);
      continue;
    }
    const char* terms[] = {"X", "Z"};
    for (std::size_t j = 0; j < rec.beta.size(); ++j) {
      const auto& b = rec.beta[j];
      out << fmt::format("{},{},{},1,beta.{},,,{},{},{},{},\n", cfg.name, rec.replication, method, terms[j],
                         fmt_num(b.estimate), fmt_num(b.std_error()), fmt_num(b.ci_low), fmt_num(b.ci_high));
    }
    for (std::size_t r = 0; r < rec.cuminc.size(); ++r) {
      const auto label = reference_label(cfg.references[r].first, cfg.references[r].second);
      for (const auto& pt : rec.cuminc[r]) {
        out << fmt::format("{},{},{},1,cuminc,\"{}\",{},{},,{},{},\n", cfg.name, rec.replication, method, label,
                           fmt_num(pt.time), fmt_num(pt.estimate), fmt_num(pt.ci_low), fmt_num(pt.ci_high));
      }
    }
  }
}

void write_bias_extract(std::ostream& out, const ScenarioResult& result, bool with_header) {
  if (with_header) out << "scenario,method,estimand,true_value,relative_bias_pct,mc_lower_pct,mc_upper_pct\n";
  for (const auto& r : result.performance) {
    if (r.metric != "relative_bias" || r.estimand == "cuminc") continue;
    out << fmt::format("{},{},{},{},{},{},{}\n", result.config.name, method_name(r.method), r.estimand,
                       fmt_num(r.true_value), fmt_num(100.0 * r.value), fmt_num(100.0 * (r.value - 1.96 * r.mcse)),
                       fmt_num(100.0 * (r.value + 1.96 * r.mcse)));
  }
}

void write_se_coverage_extract(std::ostream& out, const ScenarioResult& result, bool with_header) {
  if (with_header) out << "scenario,method,estimand,emp_se,emp_se_mcse,mod_se,mod_se_mcse,coverage,coverage_mcse\n";
  for (auto method : result.config.methods) {
    for (const std::string est : {"beta.X", "beta.Z"}) {
      const auto& e = result.row(method, est, "emp_se");
      const auto& m = result.row(method, est, "mod_se");
      const auto& c = result.row(method, est, "coverage");
      out << fmt::format("{},{},{},{},{},{},{},{},{}\n", result.config.name, method_name(method), est,
                         fmt_num(e.value), fmt_num(e.mcse), fmt_num(m.value), fmt_num(m.mcse), fmt_num(c.value),
                         fmt_num(c.mcse));
    }
  }
}

void write_cuminc_extract(std::ostream& out, const ScenarioResult& result, bool with_header) {
  if (with_header) out << "scenario,method,reference,time,true_value,mean_estimate,bias,rmse\n";
  const auto& cfg = result.config;
  for (auto method : cfg.methods) {
    for (const auto& [x, z] : cfg.references) {
      const auto label = reference_label(x, z);
      for (double t : cfg.horizons) {
        const auto& b = result.row(method, "cuminc", "bias", label, t);
        const auto& r = result.row(method, "cuminc", "rmse", label, t);
        out << fmt::format("{},{},\"{}\",{},{},{},{},{}\n", cfg.name, method_name(method), label, fmt_num(t),
                           fmt_num(b.true_value), fmt_num(b.true_value + b.value), fmt_num(b.value), fmt_num(r.value));
      }
    }
  }
}

}  // namespace fgmi
