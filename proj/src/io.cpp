#include "fgmi/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fgmi/errors.hpp"
#include "json.hpp"

namespace fgmi {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Splits one logical record. Quoted fields may contain commas, doubled quotes
// and newlines; `line` advances past any embedded newlines.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  std::string raw;
  if (!std::getline(in, raw)) return false;
  ++line;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  const std::size_t start_line = line;
  while (true) {
    if (i == raw.size()) {
      if (quoted) {
        std::string more;
        if (!std::getline(in, more)) {
          throw DataError(fmt::format("line {}: unterminated quoted field", start_line));
        }
        ++line;
        field += '\n';
        raw = std::move(more);
        i = 0;
        continue;
      }
      break;
    }
    const char c = raw[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < raw.size() && raw[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
    ++i;
  }
  fields.push_back(trim(field));
  return true;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* b = text.data();
  const char* e = b + text.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw ConfigError(fmt::format("{}: cannot parse '{}' as a number", what, text));
  return v;
}

nlohmann::json step_to_json(const StepFunction& f) {
  return {{"times", std::vector<double>(f.jump_times().begin(), f.jump_times().end())},
          {"values", std::vector<double>(f.values().begin(), f.values().end())},
          {"initial", f.initial_value()}};
}

StepFunction step_from_json(const nlohmann::json& j) {
  return StepFunction(j.at("times").get<std::vector<double>>(), j.at("values").get<std::vector<double>>(),
                      j.at("initial").get<double>());
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError(fmt::format("column '{}' not found", name));
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::size_t line = 0;
  std::vector<std::string> fields;
  while (read_record(in, fields, line)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (table.header.empty()) {
      table.header = fields;
      std::set<std::string> seen;
      for (const auto& h : fields) {
        if (!seen.insert(h).second) throw DataError(fmt::format("line {}: duplicate column '{}'", line, h));
      }
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError(fmt::format("line {}: expected {} fields, found {}", line, table.header.size(), fields.size()));
    }
    table.rows.push_back(fields);
    table.line_numbers.push_back(line);
  }
  if (table.header.empty()) throw DataError("empty input: no header row");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  try {
    return read_csv(in);
  } catch (const Error&) {
    rethrow_with_context(path + ": ");
  }
}

double parse_field(const std::string& field, std::size_t line, const std::string& column) {
  if (field.empty() || field == "NA") return kMissing;
  double v = 0.0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v)) {
    throw DataError(fmt::format("line {}: column '{}': cannot parse '{}'", line, column, field));
  }
  return v;
}

LoadedData load_competing_risks(const CsvTable& table, const AnalysisSpec& spec) {
  if (spec.covariates.empty()) throw ConfigError("at least one covariate is required");
  for (const auto& s : spec.strata_columns) {
    if (std::none_of(spec.covariates.begin(), spec.covariates.end(), [&](const auto& c) { return c.name == s; })) {
      throw ConfigError(fmt::format("stratum column '{}' must also be listed as a covariate", s));
    }
  }
  const std::size_t t_col = table.column(spec.time_column);
  const std::size_t d_col = table.column(spec.status_column);
  const std::size_t id_col = spec.id_column.empty() ? 0 : table.column(spec.id_column);
  std::vector<std::size_t> x_cols;
  for (const auto& c : spec.covariates) x_cols.push_back(table.column(c.name));
  std::optional<std::size_t> c_col;
  if (!spec.censoring_time_column.empty()) c_col = table.column(spec.censoring_time_column);

  LoadedData out;
  out.data.covariate_names.reserve(spec.covariates.size());
  for (const auto& c : spec.covariates) out.data.covariate_names.push_back(c.name);
  if (c_col) out.censoring_times.emplace();

  std::map<std::string, std::size_t> seen_ids;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = table.line_numbers[i];
    CompetingRisksRecord r;
    r.id = spec.id_column.empty() ? std::to_string(i + 1) : row[id_col];
    if (r.id.empty()) throw DataError(fmt::format("line {}: empty identifier", line));
    if (auto [it, fresh] = seen_ids.emplace(r.id, line); !fresh) {
      throw DataError(fmt::format("line {}: duplicate identifiers: '{}' also on line {}", line, r.id, it->second));
    }
    r.time = parse_field(row[t_col], line, spec.time_column);
    if (is_missing(r.time)) throw DataError(fmt::format("line {}: missing time", line));
    if (!(r.time > 0.0)) throw DataError(fmt::format("line {}: time must be positive", line));
    const double d = parse_field(row[d_col], line, spec.status_column);
    if (d != 0.0 && d != 1.0 && d != 2.0) {
      throw DataError(fmt::format("line {}: status must be 0, 1 or 2, found '{}'", line, row[d_col]));
    }
    r.status = status_from_int(static_cast<int>(d));
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      const double v = parse_field(row[x_cols[j]], line, spec.covariates[j].name);
      if (!is_missing(v) && spec.covariates[j].type == CovariateModel::LogisticBinary && v != 0.0 && v != 1.0) {
        throw DataError(fmt::format("line {}: binary covariate '{}' must be 0 or 1, found '{}'", line,
                                    spec.covariates[j].name, row[x_cols[j]]));
      }
      r.covariates.push_back(v);
      r.mask.push_back(!is_missing(v));
    }
    if (c_col) {
      const double c = parse_field(row[*c_col], line, spec.censoring_time_column);
      if (is_missing(c)) throw DataError(fmt::format("line {}: missing censoring time", line));
      out.censoring_times->push_back(c);
    }
    out.data.records.push_back(std::move(r));
  }
  if (out.data.records.empty()) throw DataError("input has no data rows");
  out.data.validate();
  return out;
}

std::vector<CovariateColumn> parse_covariate_list(const std::string& text) {
  std::vector<CovariateColumn> out;
  for (const auto& item : split(text, ',')) {
    const auto colon = item.find(':');
    CovariateColumn c;
    c.name = trim(item.substr(0, colon));
    const std::string type = colon == std::string::npos ? "continuous" : trim(item.substr(colon + 1));
    if (type == "binary") {
      c.type = CovariateModel::LogisticBinary;
    } else if (type == "continuous") {
      c.type = CovariateModel::LinearNormal;
    } else {
      throw ConfigError(fmt::format("covariate '{}': type must be 'binary' or 'continuous', got '{}'", c.name, type));
    }
    if (c.name.empty()) throw ConfigError("empty covariate name");
    out.push_back(c);
  }
  if (out.empty()) throw ConfigError("no covariates given");
  return out;
}

NamedValues parse_reference(const std::string& text) {
  NamedValues out;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("reference entry '{}' is not name=value", item));
    const std::string name = trim(item.substr(0, eq));
    out[name] = parse_number(trim(item.substr(eq + 1)), "reference '" + name + "'");
  }
  if (out.empty()) throw ConfigError("empty reference");
  return out;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number(item, "number list"));
  return out;
}

std::string reference_label(const NamedValues& ref) {
  std::string out;
  for (const auto& [name, value] : ref) {
    if (!out.empty()) out += ',';
    out += fmt::format("{}={:g}", name, value);
  }
  return out;
}

std::vector<double> default_horizons(const CompetingRisksData& data) {
  std::vector<double> t1;
  for (const auto& r : data.records) {
    if (r.status == Status::Cause1) t1.push_back(r.time);
  }
  if (t1.empty()) return {};
  std::sort(t1.begin(), t1.end());
  std::vector<double> out;
  for (int q = 1; q <= 9; ++q) {
    const auto idx = static_cast<std::size_t>(std::floor(q / 10.0 * static_cast<double>(t1.size() - 1)));
    if (out.empty() || t1[idx] > out.back()) out.push_back(t1[idx]);
  }
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  return fmt::format("{}", v);  // shortest round-trip representation
}

void write_pooled_coefficients(std::ostream& out, const AnalysisResult& result) {
  out << "term,estimate,std.error,statistic,df,p.value\n";
  for (std::size_t j = 0; j < result.terms.size(); ++j) {
    const auto& c = result.coefficients[j];
    out << quote(result.terms[j]) << ',' << format_number(c.estimate) << ',' << format_number(c.std_error()) << ','
        << format_number(c.statistic()) << ',' << format_number(c.df) << ',' << format_number(c.p_value()) << '\n';
  }
}

void write_pooled_cuminc(std::ostream& out, const std::vector<NamedValues>& references,
                         const std::vector<std::vector<PooledCumincPoint>>& curves) {
  out << "reference,time,estimate,ci_low,ci_high\n";
  for (std::size_t r = 0; r < curves.size(); ++r) {
    const std::string label = quote(reference_label(references.at(r)));
    for (const auto& p : curves[r]) {
      out << label << ',' << format_number(p.time) << ',' << format_number(p.estimate) << ','
          << format_number(p.ci_low) << ',' << format_number(p.ci_high) << '\n';
    }
  }
}

void write_imputed_datasets(std::ostream& out, const std::vector<SubdistributionDataset>& completed) {
  if (completed.empty()) return;
  out << ".imp,id,time,status,v_time";
  for (const auto& n : completed[0].covariate_names) out << ',' << quote(n);
  out << '\n';
  for (std::size_t k = 0; k < completed.size(); ++k) {
    for (const auto& r : completed[k].records) {
      out << (k + 1) << ',' << quote(r.id) << ',' << format_number(r.time) << ',' << static_cast<int>(r.status) << ','
          << format_number(r.v_time);
      for (double x : r.covariates) out << ',' << format_number(x);
      out << '\n';
    }
  }
}

std::vector<SubdistributionDataset> read_imputed_datasets(const CsvTable& table) {
  const std::vector<std::string> fixed{".imp", "id", "time", "status", "v_time"};
  if (table.header.size() <= fixed.size() || !std::equal(fixed.begin(), fixed.end(), table.header.begin())) {
    throw DataError("imputed datasets must start with columns .imp,id,time,status,v_time and list covariates after");
  }
  std::vector<std::string> names(table.header.begin() + static_cast<std::ptrdiff_t>(fixed.size()), table.header.end());
  std::map<int, SubdistributionDataset> by_imp;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = table.line_numbers[i];
    const double imp = parse_field(row[0], line, ".imp");
    if (is_missing(imp) || imp < 1 || imp != std::floor(imp)) throw DataError(fmt::format("line {}: bad .imp", line));
    auto& ds = by_imp[static_cast<int>(imp)];
    ds.covariate_names = names;
    SubdistributionRecord r;
    r.id = row[1];
    r.time = parse_field(row[2], line, "time");
    const double d = parse_field(row[3], line, "status");
    if (d != 0.0 && d != 1.0 && d != 2.0) throw DataError(fmt::format("line {}: status must be 0, 1 or 2", line));
    r.status = status_from_int(static_cast<int>(d));
    r.v_time = parse_field(row[4], line, "v_time");
    if (is_missing(r.time) || is_missing(r.v_time)) throw DataError(fmt::format("line {}: missing time", line));
    for (std::size_t j = 0; j < names.size(); ++j) {
      const double v = parse_field(row[fixed.size() + j], line, names[j]);
      if (is_missing(v)) throw DataError(fmt::format("line {}: imputed dataset has a missing '{}'", line, names[j]));
      r.covariates.push_back(v);
      r.mask.push_back(true);
    }
    ds.records.push_back(std::move(r));
  }
  std::vector<SubdistributionDataset> out;
  for (auto& [k, ds] : by_imp) out.push_back(std::move(ds));
  if (out.empty()) throw DataError("no imputed datasets found");
  return out;
}

void write_model_json(std::ostream& out, const SavedModel& model) {
  nlohmann::json j;
  j["method"] = model.method;
  j["confidence"] = model.confidence;
  j["complete_df"] = std::isfinite(model.complete_df) ? nlohmann::json(model.complete_df) : nlohmann::json(nullptr);
  auto& fits = j["fits"] = nlohmann::json::array();
  for (const auto& f : model.fits) {
    nlohmann::json jf;
    jf["names"] = f.names;
    jf["coefficients"] = std::vector<double>(f.coefficients.data(), f.coefficients.data() + f.coefficients.size());
    std::vector<std::vector<double>> cov;
    for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(f.covariance(r, c));
      cov.push_back(row);
    }
    jf["covariance"] = cov;
    jf["baseline_cumhaz"] = step_to_json(f.baseline_cumhaz);
    jf["baseline_var"] = step_to_json(f.baseline_var);
    auto& db = jf["baseline_dbeta"] = nlohmann::json::array();
    for (const auto& s : f.baseline_dbeta) db.push_back(step_to_json(s));
    jf["n_obs"] = f.n_obs;
    jf["n_events"] = f.n_events;
    fits.push_back(std::move(jf));
  }
  out << j.dump(1) << '\n';
}

SavedModel read_model_json(std::istream& in) {
  SavedModel model;
  try {
    const auto j = nlohmann::json::parse(in);
    model.method = j.value("method", "");
    model.confidence = j.at("confidence").get<double>();
    model.complete_df = j.at("complete_df").is_null() ? kInfiniteDf : j.at("complete_df").get<double>();
    for (const auto& jf : j.at("fits")) {
      CoxFit f;
      f.names = jf.at("names").get<std::vector<std::string>>();
      const auto coef = jf.at("coefficients").get<std::vector<double>>();
      const auto cov = jf.at("covariance").get<std::vector<std::vector<double>>>();
      const auto p = static_cast<Eigen::Index>(coef.size());
      if (coef.size() != f.names.size() || cov.size() != coef.size()) throw DataError("coefficient dimensions disagree");
      f.coefficients = Eigen::Map<const Eigen::VectorXd>(coef.data(), p);
      f.covariance.resize(p, p);
      for (Eigen::Index r = 0; r < p; ++r) {
        if (cov[static_cast<std::size_t>(r)].size() != coef.size()) throw DataError("covariance is not square");
        for (Eigen::Index c = 0; c < p; ++c) f.covariance(r, c) = cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      }
      f.baseline_cumhaz = step_from_json(jf.at("baseline_cumhaz"));
      f.baseline_var = step_from_json(jf.at("baseline_var"));
      for (const auto& s : jf.at("baseline_dbeta")) f.baseline_dbeta.push_back(step_from_json(s));
      if (f.baseline_dbeta.size() != f.names.size()) throw DataError("baseline derivative count disagrees");
      f.n_obs = jf.at("n_obs").get<std::size_t>();
      f.n_events = jf.at("n_events").get<std::size_t>();
      f.converged = true;
      model.fits.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("malformed model file: {}", e.what()));
  } catch (const DataError& e) {
    throw DataError(fmt::format("malformed model file: {}", e.what()));
  }
  if (model.fits.empty()) throw DataError("malformed model file: no fits");
  return model;
}

std::vector<PooledCumincPoint> predict_pooled(const SavedModel& model, const NamedValues& reference,
                                              const std::vector<double>& horizons) {
  if (horizons.empty()) throw ConfigError("no horizons given");
  std::vector<CumincCurve> curves;
  for (const auto& f : model.fits) {
    curves.push_back({horizons, predict_cuminc(f, reference, horizons), cuminc_se(f, reference, horizons)});
  }
  return pool_cuminc(curves, model.confidence, model.complete_df);
}

}  // namespace fgmi
