// fgmi: multiple imputation of missing covariates for Fine–Gray analyses,
// plus the simulation harness.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "fgmi/analysis.hpp"
#include "fgmi/config.hpp"
#include "fgmi/errors.hpp"
#include "fgmi/io.hpp"
#include "fgmi/parallel.hpp"
#include "fgmi/scenario.hpp"

namespace fs = std::filesystem;
using namespace fgmi;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", (dir / name).string()));
  return out;
}

struct AnalyzeArgs {
  AnalysisSpec spec;
  std::string covariates;
  std::string strata;
  std::string horizons;
  std::vector<std::string> references;
  double confidence = 0.95;
  std::string method = "fg-smc";
};

void run_impute_analyze(AnalyzeArgs& a) {
  auto& spec = a.spec;
  spec.covariates = parse_covariate_list(a.covariates);
  if (!a.strata.empty()) {
    std::stringstream ss(a.strata);
    std::string s;
    while (std::getline(ss, s, ',')) {
      if (!s.empty()) spec.strata_columns.push_back(s);
    }
  }
  spec.method = parse_method(a.method);
  if (spec.m < 1) throw ConfigError("--m must be at least 1");
  if (spec.iterations < 1) throw ConfigError("--iterations must be at least 1");
  if (spec.threads < 1) throw ConfigError("--threads must be at least 1");
  if (!(a.confidence > 0.0 && a.confidence < 1.0)) throw ConfigError("--confidence must lie in (0, 1)");

  const CsvTable table = read_csv_file(spec.input_path);
  LoadedData loaded = load_competing_risks(table, spec);

  spec.horizons = a.horizons.empty() ? default_horizons(loaded.data) : parse_number_list(a.horizons);
  for (double h : spec.horizons) {
    if (!(h > 0.0)) throw ConfigError("horizons must be positive");
  }
  for (const auto& r : a.references) spec.references.push_back(parse_reference(r));
  if (spec.references.empty()) {
    NamedValues zero;
    for (const auto& c : spec.covariates) zero[c.name] = 0.0;
    spec.references.push_back(zero);
  }
  for (const auto& ref : spec.references) {
    for (const auto& c : spec.covariates) {
      if (!ref.count(c.name)) throw ConfigError(fmt::format("reference '{}' lacks covariate '{}'", reference_label(ref), c.name));
    }
    if (ref.size() != spec.covariates.size()) {
      throw ConfigError(fmt::format("reference '{}' names a column that is not a covariate", reference_label(ref)));
    }
  }

  AnalysisOptions opts;
  opts.method = spec.method;
  opts.m = spec.m;
  opts.iterations = spec.iterations;
  opts.seed = spec.seed;
  for (const auto& c : spec.covariates) opts.covariate_models[c.name] = c.type;
  opts.censoring_strata = spec.strata_columns;
  opts.known_censoring_times = loaded.censoring_times;
  opts.horizons = spec.horizons;
  opts.references = spec.references;
  opts.confidence = a.confidence;
  opts.threads = spec.threads;
  opts.keep_datasets = spec.save_imputed;

  const AnalysisResult res = analyze(loaded.data, opts);

  const fs::path dir(spec.output_dir);
  {
    auto out = open_output(dir, "pooled_coefficients.csv");
    write_pooled_coefficients(out, res);
  }
  if (!res.cuminc.empty()) {
    auto out = open_output(dir, "pooled_cuminc.csv");
    write_pooled_cuminc(out, spec.references, res.cuminc);
  }
  {
    SavedModel model;
    model.fits = res.fits;
    model.confidence = a.confidence;
    model.complete_df = static_cast<double>(res.n_used) - static_cast<double>(res.terms.size());
    model.method = std::string(method_name(spec.method));
    auto out = open_output(dir, "model.json");
    write_model_json(out, model);
  }
  if (spec.save_imputed) {
    auto out = open_output(dir, "imputed_datasets.csv");
    write_imputed_datasets(out, res.completed);
  }

  std::cout << fmt::format("{}: n = {}, {} completed dataset(s){}\n", method_name(spec.method), res.n_used,
                           res.fits.size(), res.random_censoring ? ", censoring times imputed" : "");
  std::cout << fmt::format("{:<12} {:>10} {:>10} {:>10}\n", "term", "estimate", "std.error", "df");
  for (std::size_t j = 0; j < res.terms.size(); ++j) {
    const auto& c = res.coefficients[j];
    std::cout << fmt::format("{:<12} {:>10.4f} {:>10.4f} {:>10.1f}\n", res.terms[j], c.estimate, c.std_error(), c.df);
  }
}

struct SimulateArgs {
  std::string config;
  std::string output_dir = ".";
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  bool extracts = false;
};

void run_simulate(const SimulateArgs& a) {
  auto scenarios = load_scenario_config(a.config);
  for (auto& s : scenarios) {
    if (a.threads) s.threads = *a.threads;
    if (a.seed) s.seed = *a.seed;
    s.validate();
  }
  const fs::path dir(a.output_dir);
  auto perf = open_output(dir, "performance.csv");
  auto reps = open_output(dir, "replications.csv");
  std::optional<std::ofstream> bias, se, cuminc;
  if (a.extracts) {
    bias = open_output(dir, "extract_bias.csv");
    se = open_output(dir, "extract_se_coverage.csv");
    cuminc = open_output(dir, "extract_cuminc.csv");
  }
  bool first = true;
  for (const auto& s : scenarios) {
    std::cerr << fmt::format("scenario '{}': n = {}, n_sim = {}, {} method(s)\n", s.name, s.n, s.n_sim, s.methods.size());
    const ScenarioResult res = run_scenario(s);
    write_performance_csv(perf, res, first);
    write_replications_csv(reps, res, first);
    if (a.extracts) {
      write_bias_extract(*bias, res, first);
      write_se_coverage_extract(*se, res, first);
      write_cuminc_extract(*cuminc, res, first);
    }
    first = false;
  }
}

struct PredictArgs {
  std::string model;
  std::string horizons;
  std::vector<std::string> references;
  std::string output_dir = ".";
};

void run_predict(const PredictArgs& a) {
  std::ifstream in(a.model);
  if (!in) throw DataError(fmt::format("cannot open model '{}'", a.model));
  const SavedModel model = read_model_json(in);
  const std::vector<double> horizons = parse_number_list(a.horizons);
  if (horizons.empty()) throw ConfigError("no horizons given");
  for (double h : horizons) {
    if (!(h > 0.0)) throw ConfigError("horizons must be positive");
  }
  std::vector<NamedValues> refs;
  std::vector<std::vector<PooledCumincPoint>> curves;
  for (const auto& r : a.references) {
    refs.push_back(parse_reference(r));
    const auto& names = model.fits.front().names;
    for (const auto& n : names) {
      if (!refs.back().count(n)) throw ConfigError(fmt::format("reference '{}' lacks covariate '{}'", r, n));
    }
    if (refs.back().size() != names.size()) throw ConfigError(fmt::format("reference '{}' has unknown covariates", r));
    curves.push_back(predict_pooled(model, refs.back(), horizons));
  }
  auto out = open_output(fs::path(a.output_dir), "pooled_cuminc.csv");
  write_pooled_cuminc(out, refs, curves);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple imputation of missing covariates in Fine-Gray competing risks analyses"};
  app.require_subcommand(1);

  AnalyzeArgs analyze_args;
  analyze_args.spec.threads = default_threads();
  auto* ia = app.add_subcommand("impute-analyze", "Impute, fit Fine-Gray models and pool");
  ia->add_option("--input", analyze_args.spec.input_path, "Input CSV")->required();
  ia->add_option("--covariates", analyze_args.covariates, "Covariates, e.g. X:binary,Z:continuous")->required();
  ia->add_option("--time-col", analyze_args.spec.time_column, "Follow-up time column")->capture_default_str();
  ia->add_option("--status-col", analyze_args.spec.status_column, "Status column (0 censored, 1, 2)")
      ->capture_default_str();
  ia->add_option("--id-col", analyze_args.spec.id_column, "Identifier column (default: row number)");
  ia->add_option("--strata", analyze_args.strata, "Covariates stratifying the censoring model");
  ia->add_option("--censoring-time-col", analyze_args.spec.censoring_time_column,
                 "Known potential censoring times (administrative censoring)");
  ia->add_option("--method", analyze_args.method, "fg-smc, cs-smc, fg-approx, cs-approx, cca or full")
      ->capture_default_str();
  ia->add_option("--m", analyze_args.spec.m, "Number of imputations")->capture_default_str();
  ia->add_option("--iterations", analyze_args.spec.iterations, "Imputation cycles")->capture_default_str();
  ia->add_option("--seed", analyze_args.spec.seed, "Random seed")->capture_default_str();
  ia->add_option("--threads", analyze_args.spec.threads, "Worker threads")->capture_default_str();
  ia->add_option("--horizons", analyze_args.horizons, "Prediction horizons, e.g. 1,3,5 (default: cause-1 deciles)");
  ia->add_option("--reference", analyze_args.references, "Reference covariates, e.g. X=1,Z=0 (repeatable)");
  ia->add_option("--confidence", analyze_args.confidence, "Confidence level")->capture_default_str();
  ia->add_flag("--save-imputed", analyze_args.spec.save_imputed, "Also write imputed_datasets.csv");
  ia->add_option("--output-dir", analyze_args.spec.output_dir, "Output directory")->capture_default_str();

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Run simulation scenarios from a config file");
  sim->add_option("--config", sim_args.config, "Scenario INI file")->required();
  sim->add_option("--output-dir", sim_args.output_dir, "Output directory")->capture_default_str();
  sim->add_option("--threads", sim_args.threads, "Worker threads (overrides the config)");
  sim->add_option("--seed", sim_args.seed, "Seed (overrides the config)");
  sim->add_flag("--extracts", sim_args.extracts, "Also write bias, SE/coverage and incidence extracts");

  PredictArgs pred_args;
  auto* pred = app.add_subcommand("predict", "Pooled cumulative incidence from a saved model");
  pred->add_option("--model,--input", pred_args.model, "model.json written by impute-analyze")->required();
  pred->add_option("--horizons", pred_args.horizons, "Horizons, e.g. 1,3,5")->required();
  pred->add_option("--reference", pred_args.references, "Reference covariates, e.g. X=1,Z=0 (repeatable)")
      ->required();
  pred->add_option("--output-dir", pred_args.output_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*ia) run_impute_analyze(analyze_args);
    if (*sim) run_simulate(sim_args);
    if (*pred) run_predict(pred_args);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
