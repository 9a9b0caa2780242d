#include "fgmi/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "fgmi/errors.hpp"

namespace fgmi {

namespace {

namespace pt = boost::property_tree;

using Section = std::map<std::string, std::string>;

const std::vector<std::string> kCsKeys{"cs_a1", "cs_b1", "cs_gamma11", "cs_gamma12",
                                       "cs_a2", "cs_b2", "cs_gamma21", "cs_gamma22"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
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

class Reader {
 public:
  Reader(std::string scenario, Section values) : scenario_(std::move(scenario)), values_(std::move(values)) {}

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return to_double(key, values_.at(key));
  }

  template <typename Int>
  Int integer(const std::string& key, Int fallback) const {
    if (!has(key)) return fallback;
    const std::string& text = values_.at(key);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || v < 0) {
      throw fail(key, fmt::format("expected a non-negative integer, got '{}'", text));
    }
    return static_cast<Int>(v);
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? values_.at(key) : fallback;
  }

  std::vector<double> reals(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& item : split(values_.at(key), ',')) out.push_back(to_double(key, item));
    return out;
  }

  CensoringType censoring(const std::string& key, CensoringType fallback) const {
    if (!has(key)) return fallback;
    const auto& v = values_.at(key);
    if (v == "none") return CensoringType::None;
    if (v == "administrative") return CensoringType::Administrative;
    if (v == "random") return CensoringType::Random;
    throw fail(key, fmt::format("expected none, administrative or random, got '{}'", v));
  }

  ConfigError fail(const std::string& key, const std::string& what) const {
    return ConfigError(fmt::format("scenario '{}', key '{}': {}", scenario_, key, what));
  }

 private:
  double to_double(const std::string& key, const std::string& text) const {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw fail(key, fmt::format("cannot parse '{}' as a number", text));
    }
    return v;
  }

  std::string scenario_;
  Section values_;
};

ScenarioConfig build(const std::string& name, const Section& values) {
  Reader r(name, values);
  ScenarioConfig c;
  c.name = name;
  const std::string dgm = r.text("dgm", "fg");
  if (dgm == "fg") {
    c.dgm = DgmKind::FgCorrect;
  } else if (dgm == "cs") {
    c.dgm = DgmKind::CsLatent;
  } else {
    throw r.fail("dgm", fmt::format("expected fg or cs, got '{}'", dgm));
  }
  auto& f = c.fg;
  f.p = r.real("p", f.p);
  f.a1 = r.real("a1", f.a1);
  f.b1 = r.real("b1", f.b1);
  f.beta1 = r.real("beta1", f.beta1);
  f.beta2 = r.real("beta2", f.beta2);
  f.a2 = r.real("a2", f.a2);
  f.b2 = r.real("b2", f.b2);
  f.beta1_star = r.real("beta1_star", f.beta1_star);
  f.beta2_star = r.real("beta2_star", f.beta2_star);

  const auto given = std::count_if(kCsKeys.begin(), kCsKeys.end(), [&](const auto& k) { return r.has(k); });
  if (given != 0 && given != static_cast<long>(kCsKeys.size())) {
    throw ConfigError(fmt::format("scenario '{}': give all of the cs_* parameters or none", name));
  }
  if (given != 0) {
    c.cs = CsDgmParams{r.real("cs_a1", 0), r.real("cs_b1", 0), r.real("cs_gamma11", 0), r.real("cs_gamma12", 0),
                       r.real("cs_a2", 0), r.real("cs_b2", 0), r.real("cs_gamma21", 0), r.real("cs_gamma22", 0)};
  }

  c.censoring.type = r.censoring("censoring", c.censoring.type);
  c.censoring.rate = r.real("censoring_rate", c.censoring.rate);
  c.calibration_censoring.type = r.censoring("calibration_censoring", c.calibration_censoring.type);
  c.calibration_censoring.rate = c.censoring.rate;

  c.n = r.integer<std::size_t>("n", c.n);
  c.n_sim = r.integer<int>("n_sim", c.n_sim);
  c.m = r.integer<int>("m", c.m);
  c.iterations = r.integer<int>("iterations", c.iterations);
  c.eta1 = r.real("eta1", c.eta1);
  c.target_prob = r.real("target_prob", c.target_prob);
  c.seed = r.integer<std::uint64_t>("seed", c.seed);
  c.n_big = r.integer<std::size_t>("n_big", c.n_big);
  c.threads = r.integer<int>("threads", c.threads);
  c.max_failure_fraction = r.real("max_failure_fraction", c.max_failure_fraction);
  c.horizons = r.reals("horizons", c.horizons);

  if (r.has("methods")) {
    c.methods.clear();
    for (const auto& m : split(r.text("methods", ""), ',')) {
      try {
        c.methods.push_back(parse_method(m));
      } catch (const ConfigError& e) {
        throw r.fail("methods", e.what());
      }
    }
  }
  if (r.has("references")) {
    // "x:z, x:z"
    c.references.clear();
    for (const auto& pair : split(r.text("references", ""), ',')) {
      const auto parts = split(pair, ':');
      if (parts.size() != 2) throw r.fail("references", fmt::format("expected X:Z, got '{}'", pair));
      const auto xz = Reader(name, {{"x", parts[0]}, {"z", parts[1]}});
      c.references.emplace_back(xz.real("x", 0.0), xz.real("z", 0.0));
    }
  }
  try {
    c.validate();
  } catch (const Error&) {
    rethrow_with_context(fmt::format("scenario '{}': ", name));
  }
  return c;
}

}  // namespace

const std::vector<std::string>& scenario_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k{"dgm",       "p",         "a1",           "b1",
                               "beta1",     "beta2",     "a2",           "b2",
                               "beta1_star", "beta2_star", "censoring",  "censoring_rate",
                               "calibration_censoring", "n", "n_sim",    "m",
                               "iterations", "eta1",     "target_prob",  "methods",
                               "seed",      "horizons",  "references",   "n_big",
                               "threads",   "max_failure_fraction"};
    k.insert(k.end(), kCsKeys.begin(), kCsKeys.end());
    return k;
  }();
  return keys;
}

std::vector<ScenarioConfig> parse_scenario_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  const auto& allowed = scenario_config_keys();
  std::vector<std::string> invalid;
  Section defaults;
  std::vector<std::pair<std::string, Section>> sections;
  for (const auto& [name, node] : tree) {
    if (node.empty() && !node.data().empty()) {
      invalid.push_back(name);  // key outside any section
      continue;
    }
    Section values;
    for (const auto& [key, value] : node) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        invalid.push_back(name + "." + key);
        continue;
      }
      values[key] = trim(value.data());
    }
    if (name == "defaults") {
      defaults = std::move(values);
    } else {
      sections.emplace_back(name, std::move(values));
    }
  }
  if (!invalid.empty()) {
    std::string list;
    for (const auto& k : invalid) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError(fmt::format("invalid config keys: {}", list));
  }
  if (sections.empty()) throw ConfigError("config defines no scenarios");

  std::vector<ScenarioConfig> out;
  for (const auto& [name, values] : sections) {
    Section merged = defaults;
    for (const auto& [k, v] : values) merged[k] = v;
    out.push_back(build(name, merged));
  }
  return out;
}

std::vector<ScenarioConfig> load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  try {
    return parse_scenario_config(in);
  } catch (const Error&) {
    rethrow_with_context(path + ": ");
  }
}

}  // namespace fgmi
