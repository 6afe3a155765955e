#include "glsm/app.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <unistd.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "glsm/errors.hpp"
#include "glsm/index_set.hpp"
#include "glsm/oracle.hpp"

#ifndef GLSM_PRESET_DIR
#define GLSM_PRESET_DIR "presets"
#endif

namespace glsm {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"name", "description"}},
      {"model",
       {"type", "dimension", "spot", "spots", "rate", "dividend", "sigma", "correlation", "v0", "rho", "kappa",
        "theta", "nu"}},
      {"payoff", {"kind", "strike", "maturity"}},
      {"algorithm",
       {"method", "paths", "steps", "order", "rule", "seed", "runs", "tolerance", "max_iterations", "ridge",
        "gram_limit", "block_rows", "delta", "price_order", "logvar_order", "substeps", "range_quantile"}},
      {"output", {"directory", "verbosity", "boundary_steps"}},
      {"reference", {"price", "ci_low", "ci_high", "delta", "prices"}},
  };
  return keys;
}

[[noreturn]] void fail(const std::string& field, const std::string& message) {
  throw ConfigError(field + ": " + message);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream in(t);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& field, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) fail(field, "expected a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& field, const std::string& text) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(field, "expected an integer, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& field, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(field, "expected true or false, got '" + text + "'");
}

std::vector<double> to_doubles(const std::string& field, const std::string& text) {
  std::vector<double> out;
  for (const auto& w : split(text)) out.push_back(to_double(field, w));
  if (out.empty()) fail(field, "expected at least one number");
  return out;
}

// Scalar broadcast to d entries, or exactly d entries.
Eigen::VectorXd per_asset(const std::string& field, const std::vector<double>& values, int d) {
  if (values.size() == 1) return Eigen::VectorXd::Constant(d, values[0]);
  if (static_cast<int>(values.size()) != d) {
    fail(field, "expected 1 or " + std::to_string(d) + " values, got " + std::to_string(values.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), d);
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }

 private:
  const pt::ptree& tree_;
};

std::string field_name(const std::string& section, const std::string& key) { return section + "." + key; }

void apply_tree(const pt::ptree& tree, ExperimentConfig& c) {
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) {
      if (body.empty()) fail(section, "keys must be inside a section");
      fail(section, "unknown section");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) fail(field_name(section, key), "unknown key");
    }
  }
  const Reader r(tree);
  auto str = [&](const char* s, const char* k) { return r.get(s, k); };
  auto num = [&](const char* s, const char* k, double& out) {
    if (auto v = str(s, k)) out = to_double(field_name(s, k), *v);
  };
  auto integer = [&](const char* s, const char* k, auto& out) {
    if (auto v = str(s, k)) out = static_cast<std::remove_reference_t<decltype(out)>>(to_integer(field_name(s, k), *v));
  };
  auto optional_num = [&](const char* s, const char* k, std::optional<double>& out) {
    if (auto v = str(s, k)) out = to_double(field_name(s, k), *v);
  };

  if (auto v = str("experiment", "name")) c.name = *v;

  ModelConfig& m = c.model;
  if (auto v = str("model", "type")) {
    if (*v == "black_scholes") {
      m.kind = ModelKind::kBlackScholes;
    } else if (*v == "heston") {
      m.kind = ModelKind::kHeston;
    } else {
      fail("model.type", "expected black_scholes or heston, got '" + *v + "'");
    }
  }
  integer("model", "dimension", m.dimension);
  if (m.kind == ModelKind::kHeston) m.dimension = 1;
  if (m.dimension < 1) fail("model.dimension", "must be >= 1");
  num("model", "rate", m.rate);
  num("model", "correlation", m.correlation);
  const int d = m.dimension;
  m.spot = per_asset("model.spot", to_doubles("model.spot", str("model", "spot").value_or("100")), d);
  m.dividends = per_asset("model.dividend", to_doubles("model.dividend", str("model", "dividend").value_or("0")), d);
  m.sigma = per_asset("model.sigma", to_doubles("model.sigma", str("model", "sigma").value_or("0.2")), d);
  if (auto v = str("model", "spots")) {
    m.spots = to_doubles("model.spots", *v);
  } else {
    m.spots = {m.spot(0)};
  }
  num("model", "v0", m.v0);
  num("model", "rho", m.rho);
  num("model", "kappa", m.kappa);
  num("model", "theta", m.theta);
  num("model", "nu", m.nu);

  if (auto v = str("payoff", "kind")) {
    try {
      c.payoff.kind = parse_payoff_kind(*v);
    } catch (const std::invalid_argument&) {
      fail("payoff.kind", "unknown payoff '" + *v + "'");
    }
  }
  num("payoff", "strike", c.payoff.strike);
  num("payoff", "maturity", c.payoff.maturity);

  AlgorithmConfig& a = c.algorithm;
  if (auto v = str("algorithm", "method")) {
    if (*v == "both") {
      a.methods = {Method::kGlsm, Method::kLsm};
    } else {
      try {
        a.methods = {parse_method(*v)};
      } catch (const std::invalid_argument&) {
        fail("algorithm.method", "expected glsm, lsm or both, got '" + *v + "'");
      }
    }
  }
  integer("algorithm", "paths", a.paths);
  integer("algorithm", "steps", a.steps);
  integer("algorithm", "order", a.order);
  if (auto v = str("algorithm", "rule")) {
    if (*v == "product") {
      a.rule = CrossRule::kShiftedProduct;
    } else if (*v == "max_product") {
      a.rule = CrossRule::kMaxProduct;
    } else {
      fail("algorithm.rule", "expected product or max_product, got '" + *v + "'");
    }
  }
  if (auto v = str("algorithm", "seed")) {
    const long long s = to_integer("algorithm.seed", *v);
    if (s < 0) fail("algorithm.seed", "must be non-negative");
    a.seed = static_cast<std::uint64_t>(s);
  }
  integer("algorithm", "runs", a.runs);
  num("algorithm", "tolerance", a.solver.tolerance);
  integer("algorithm", "max_iterations", a.solver.max_iterations);
  num("algorithm", "ridge", a.solver.ridge);
  integer("algorithm", "gram_limit", a.solver.gram_limit);
  integer("algorithm", "block_rows", a.block_rows);
  if (auto v = str("algorithm", "delta")) a.delta = to_bool("algorithm.delta", *v);
  integer("algorithm", "price_order", a.price_order);
  integer("algorithm", "logvar_order", a.logvar_order);
  integer("algorithm", "substeps", a.substeps);
  num("algorithm", "range_quantile", a.range_quantile);

  if (auto v = str("output", "directory")) c.output.directory = *v;
  integer("output", "verbosity", c.output.verbosity);
  if (auto v = str("output", "boundary_steps")) {
    c.output.boundary_steps.clear();
    for (const auto& w : split(*v)) {
      c.output.boundary_steps.push_back(static_cast<int>(to_integer("output.boundary_steps", w)));
    }
  }

  optional_num("reference", "price", c.reference.price);
  optional_num("reference", "ci_low", c.reference.ci_low);
  optional_num("reference", "ci_high", c.reference.ci_high);
  optional_num("reference", "delta", c.reference.delta);
  if (auto v = str("reference", "prices")) c.reference.prices = to_doubles("reference.prices", *v);
}

double relative_error(double value, double reference) { return std::abs(value - reference) / std::abs(reference); }

void log_line(std::ostream* log, int verbosity, const std::string& text) {
  if (log && verbosity > 0) *log << text << '\n' << std::flush;
}

}  // namespace

std::string to_string(Method method) { return method == Method::kGlsm ? "glsm" : "lsm"; }

Method parse_method(const std::string& name) {
  if (name == "glsm") return Method::kGlsm;
  if (name == "lsm") return Method::kLsm;
  throw std::invalid_argument("unknown method '" + name + "'");
}

void ExperimentConfig::validate() const {
  const ModelConfig& m = model;
  if (!(payoff.strike > 0.0)) fail("payoff.strike", "must be positive");
  if (!(payoff.maturity > 0.0)) fail("payoff.maturity", "must be positive");
  const AlgorithmConfig& a = algorithm;
  if (a.paths < 0) fail("algorithm.paths", "must be non-negative");
  if (a.steps < 1) fail("algorithm.steps", "must be >= 1");
  if (a.order < 1) fail("algorithm.order", "must be >= 1");
  if (a.runs < 1) fail("algorithm.runs", "must be >= 1");
  if (!(a.solver.tolerance > 0.0)) fail("algorithm.tolerance", "must be positive");
  if (a.solver.max_iterations < 0) fail("algorithm.max_iterations", "must be non-negative");
  if (a.solver.ridge < 0.0) fail("algorithm.ridge", "must be non-negative");
  if (a.solver.gram_limit < 0) fail("algorithm.gram_limit", "must be non-negative");
  if (a.block_rows < 1) fail("algorithm.block_rows", "must be >= 1");
  if (output.verbosity < 0) fail("output.verbosity", "must be non-negative");
  for (int k : output.boundary_steps) {
    if (k < 1 || k >= a.steps) fail("output.boundary_steps", "steps must lie in [1, N-1]");
  }

  if (m.kind == ModelKind::kHeston) {
    if (payoff.kind != PayoffKind::kPut1d) fail("payoff.kind", "the Heston model supports put_1d only");
    if (m.spots.empty()) fail("model.spots", "at least one spot is required");
    for (double s : m.spots) {
      if (!(s > 0.0)) fail("model.spots", "spots must be positive");
    }
    try {
      heston(m.spots.front()).validate();
    } catch (const std::invalid_argument& e) {
      fail("model", e.what());
    }
    if (a.price_order < 0 || a.logvar_order < 0) fail("algorithm.price_order", "orders must be non-negative");
    if (a.substeps < 1) fail("algorithm.substeps", "must be >= 1");
    if (!(a.range_quantile >= 0.0 && a.range_quantile < 0.5)) fail("algorithm.range_quantile", "must lie in [0, 0.5)");
    if (!reference.prices.empty() && reference.prices.size() != m.spots.size()) {
      fail("reference.prices", "expected one value per spot");
    }
    const Index nb = heston_index_set(heston_options()).size();
    if (a.paths > 0 && a.paths < nb) {
      fail("algorithm.paths", "M = " + std::to_string(a.paths) + " is smaller than N_b = " + std::to_string(nb));
    }
    return;
  }

  if ((m.spot.array() <= 0.0).any()) fail("model.spot", "prices must be positive");
  if ((m.sigma.array() <= 0.0).any()) fail("model.sigma", "volatilities must be positive");
  if (m.dimension > 1 && !(m.correlation > -1.0 / (m.dimension - 1) - 1e-12 && m.correlation <= 1.0)) {
    fail("model.correlation", "equicorrelation must lie in [-1/(d-1), 1]");
  }
  if (payoff.kind == PayoffKind::kPut1d && m.dimension != 1) fail("payoff.kind", "put_1d needs dimension 1");
  const Index nb = hyperbolic_cross_size(m.dimension, a.order, a.rule);
  if (a.paths > 0 && a.paths < nb) {
    fail("algorithm.paths", "M = " + std::to_string(a.paths) + " is smaller than N_b = " + std::to_string(nb));
  }
}

BlackScholesMarket ExperimentConfig::market() const {
  const int d = model.dimension;
  Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(d, d, model.correlation);
  corr.diagonal().setOnes();
  try {
    return BlackScholesMarket(model.spot, model.rate, model.dividends, model.sigma, corr);
  } catch (const std::invalid_argument& e) {
    fail("model", e.what());
  }
}

HestonMarket ExperimentConfig::heston(double spot) const {
  return HestonMarket{spot, model.v0, model.rate, model.rho, model.kappa, model.theta, model.nu};
}

PricerOptions ExperimentConfig::pricer_options(Method method) const {
  PricerOptions o;
  o.method = method;
  o.order = algorithm.order;
  o.rule = algorithm.rule;
  o.solver = algorithm.solver;
  o.block_rows = algorithm.block_rows;
  o.compute_delta = algorithm.delta;
  return o;
}

HestonOptions ExperimentConfig::heston_options() const {
  HestonOptions o;
  o.price_order = algorithm.price_order;
  o.logvar_order = algorithm.logvar_order;
  o.order = algorithm.order;
  o.substeps = algorithm.substeps;
  o.range_quantile = algorithm.range_quantile;
  o.solver = algorithm.solver;
  return o;
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ExperimentConfig c;
  apply_tree(tree, c);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string() + ": cannot open config file");
  ExperimentConfig c = parse_config(in, file.string());
  return c;
}

std::filesystem::path default_preset_dir() {
  if (const char* env = std::getenv("GLSM_PRESETS"); env && *env) return env;
  return GLSM_PRESET_DIR;
}

std::vector<std::string> preset_names(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".ini") out.push_back(entry.path().stem().string());
  }
  if (ec) throw ConfigError(dir.string() + ": cannot list presets (" + ec.message() + ")");
  std::sort(out.begin(), out.end());
  return out;
}

ExperimentConfig load_preset(const std::string& name, const std::filesystem::path& dir) {
  const auto file = dir / (name + ".ini");
  if (!std::filesystem::exists(file)) throw ConfigError("unknown preset '" + name + "' (looked in " + dir.string() + ")");
  return load_config(file);
}

Timings PriceSummary::mean_timings() const {
  Timings t;
  for (const auto& r : timings) {
    t.basis += r.basis;
    t.matrix += r.matrix;
    t.linear += r.linear;
    t.update += r.update;
    t.total += r.total;
  }
  const double n = timings.empty() ? 1.0 : static_cast<double>(timings.size());
  t.basis /= n;
  t.matrix /= n;
  t.linear /= n;
  t.update /= n;
  t.total /= n;
  return t;
}

namespace {

void finish(PriceSummary& s, const std::vector<Eigen::VectorXd>& deltas, const std::vector<double>& path_se) {
  const auto r = static_cast<double>(s.prices.size());
  double sum = 0.0;
  for (double v : s.prices) sum += v;
  s.mean = sum / r;
  double sq = 0.0;
  for (double v : s.prices) sq += (v - s.mean) * (v - s.mean);
  s.standard_error = s.prices.size() > 1 ? std::sqrt(sq / (r * (r - 1.0))) : 0.0;
  double se = 0.0;
  for (double v : path_se) se += v;
  s.path_standard_error = se / r;
  if (!deltas.empty() && deltas.front().size() > 0) {
    s.delta = Eigen::VectorXd::Zero(deltas.front().size());
    for (const auto& dlt : deltas) s.delta += dlt;
    s.delta /= static_cast<double>(deltas.size());
  }
}

std::vector<PriceSummary> run_black_scholes(const ExperimentConfig& c, std::ostream* log) {
  const BlackScholesMarket market = c.market();
  const Payoff payoff = c.make_payoff();
  const AlgorithmConfig& a = c.algorithm;
  const int d = c.model.dimension;
  const Index nb = hyperbolic_cross_size(d, a.order, a.rule);
  if (nb > a.solver.gram_limit) {
    std::ostringstream msg;
    msg << "note: N_b = " << nb << " exceeds gram_limit = " << a.solver.gram_limit
        << "; using the matrix-free solver (a dense A would need " << std::setprecision(3)
        << 8.0 * static_cast<double>(a.paths) * static_cast<double>(nb) / 1e9 << " GB)";
    log_line(log, 1, msg.str());
  }
  const double path_bytes = brownian_memory_bytes(a.paths, a.steps, d);
  const double ram = static_cast<double>(sysconf(_SC_PHYS_PAGES)) * static_cast<double>(sysconf(_SC_PAGE_SIZE));
  if (ram > 0.0 && path_bytes > 0.9 * ram) {
    std::ostringstream msg;
    msg << "the Brownian paths need " << std::setprecision(3) << path_bytes / 1e9 << " GB but only " << ram / 1e9
        << " GB of RAM is installed; reduce algorithm.paths";
    throw std::length_error(msg.str());
  }
  const double path_gb = path_bytes / 1e9;
  if (path_gb > 2.0) {
    std::ostringstream msg;
    msg << "warning: the Brownian paths need " << std::setprecision(3) << path_gb << " GB of RAM";
    log_line(log, 1, msg.str());
  }

  std::vector<PriceSummary> out(a.methods.size());
  std::vector<std::vector<Eigen::VectorXd>> deltas(a.methods.size());
  std::vector<std::vector<double>> path_se(a.methods.size());
  const IndexSet set = build_index_set(d, a.order, a.rule);
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    PriceSummary& s = out[i];
    s.name = c.name;
    s.method = a.methods[i];
    s.dimension = d;
    s.spot = c.model.spot(0);
    s.paths = a.paths;
    s.steps = a.steps;
    s.order = a.order;
    s.basis_size = set.size();
    s.nonzeros = set.nonzero_count();
    s.nonzeros_shortcut = nonzero_count_shortcut(d, a.order, a.rule);
    s.reference = c.reference.price;
    s.reference_delta = c.reference.delta;
  }
  for (int run = 0; run < a.runs; ++run) {
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(run);
    const auto t0 = std::chrono::steady_clock::now();
    const BrownianPaths w = simulate_brownian(a.paths, a.steps, c.payoff.maturity, d, seed);
    const double sim = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (std::size_t i = 0; i < a.methods.size(); ++i) {
      PricingResult r = price_on_paths(market, payoff, w, c.pricer_options(a.methods[i]));
      r.timings.total += sim;
      out[i].prices.push_back(r.price);
      out[i].timings.push_back(r.timings);
      path_se[i].push_back(r.standard_error);
      if (a.delta) deltas[i].push_back(r.delta);
      std::ostringstream msg;
      msg << c.name << " run " << run + 1 << "/" << a.runs << " " << to_string(a.methods[i]) << " price "
          << std::setprecision(6) << r.price << " (" << std::setprecision(3) << r.timings.total << " s)";
      log_line(log, c.output.verbosity, msg.str());
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) finish(out[i], deltas[i], path_se[i]);
  return out;
}

std::vector<PriceSummary> run_heston(const ExperimentConfig& c, std::ostream* log) {
  const AlgorithmConfig& a = c.algorithm;
  if (a.methods.size() != 1 || a.methods.front() != Method::kGlsm) {
    fail("algorithm.method", "the Heston model supports glsm only");
  }
  const std::vector<double>& spots = c.model.spots;
  const HestonOptions opts = c.heston_options();
  const IndexSet set = heston_index_set(opts);
  std::vector<PriceSummary> out(spots.size());
  std::vector<std::vector<double>> path_se(spots.size());
  for (std::size_t i = 0; i < spots.size(); ++i) {
    PriceSummary& s = out[i];
    s.name = c.name;
    s.dimension = 1;
    s.spot = spots[i];
    s.paths = a.paths;
    s.steps = a.steps;
    s.order = a.order;
    s.basis_size = set.size();
    s.nonzeros = set.nonzero_count();
    s.nonzeros_shortcut = nonzero_count_shortcut(2, a.order);
    if (!c.reference.prices.empty()) s.reference = c.reference.prices[i];
  }
  const Payoff payoff = c.make_payoff();
  for (int run = 0; run < a.runs; ++run) {
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(run);
    const auto res =
        glsm_price_heston_spots(c.heston(spots.front()), spots, payoff, c.payoff.maturity, a.paths, a.steps, seed, opts);
    for (std::size_t i = 0; i < spots.size(); ++i) {
      out[i].prices.push_back(res[i].price);
      out[i].timings.push_back(res[i].timings);
      path_se[i].push_back(res[i].standard_error);
    }
    std::ostringstream msg;
    msg << c.name << " run " << run + 1 << "/" << a.runs << " (" << std::setprecision(3) << res.front().timings.total
        << " s)";
    log_line(log, c.output.verbosity, msg.str());
  }
  for (std::size_t i = 0; i < out.size(); ++i) finish(out[i], {}, path_se[i]);
  return out;
}

}  // namespace

std::vector<PriceSummary> run_price(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  if (config.algorithm.paths == 0) fail("algorithm.paths", "must be positive to price");
  if (config.model.kind == ModelKind::kHeston) return run_heston(config, log);
  return run_black_scholes(config, log);
}

void write_price_csv(std::ostream& out, const std::vector<PriceSummary>& rows) {
  out << "name,method,d,spot,paths,steps,order,basis_size,nonzeros,nonzeros_shortcut,runs,price,standard_error,"
         "path_standard_error,reference,relative_error,delta_mean,delta_min,delta_max\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.name << ',' << to_string(r.method) << ',' << r.dimension << ',' << r.spot << ',' << r.paths << ','
        << r.steps << ',' << r.order << ',' << r.basis_size << ',' << r.nonzeros << ',' << r.nonzeros_shortcut << ','
        << r.prices.size() << ',' << r.mean << ',' << r.standard_error << ',' << r.path_standard_error << ',';
    if (r.reference) {
      out << *r.reference << ',' << relative_error(r.mean, *r.reference) << ',';
    } else {
      out << ",,";
    }
    if (r.delta.size() > 0) {
      out << r.delta.mean() << ',' << r.delta.minCoeff() << ',' << r.delta.maxCoeff();
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

void write_timings_csv(std::ostream& out, const std::vector<PriceSummary>& rows) {
  out << "name,method,spot,run,T_bas,T_mat,T_lin,T_up,T_tot\n";
  out << std::setprecision(6);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.timings.size(); ++i) {
      const Timings& t = r.timings[i];
      out << r.name << ',' << to_string(r.method) << ',' << r.spot << ',' << i + 1 << ',' << t.basis << ','
          << t.matrix << ',' << t.linear << ',' << t.update << ',' << t.total << '\n';
    }
  }
}

void write_delta_csv(std::ostream& out, const std::vector<PriceSummary>& rows) {
  out << "name,method,asset,delta,reference,relative_error\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    for (Index j = 0; j < r.delta.size(); ++j) {
      out << r.name << ',' << to_string(r.method) << ',' << j + 1 << ',' << r.delta(j) << ',';
      if (r.reference_delta) {
        out << *r.reference_delta << ',' << relative_error(r.delta(j), *r.reference_delta);
      } else {
        out << ',';
      }
      out << '\n';
    }
  }
}

std::vector<std::filesystem::path> run_boundary(const ExperimentConfig& config, const std::vector<int>& steps,
                                                const std::filesystem::path& directory) {
  config.validate();
  if (config.model.kind == ModelKind::kHeston) fail("model.type", "boundary output supports Black-Scholes presets");
  for (int k : steps) {
    if (k < 1 || k >= config.algorithm.steps) fail("steps", "step " + std::to_string(k) + " is outside [1, N-1]");
  }
  std::filesystem::create_directories(directory);
  const Payoff payoff = config.make_payoff();
  std::vector<std::filesystem::path> files;
  for (Method method : config.algorithm.methods) {
    std::vector<ClassificationRecord> records;
    if (config.algorithm.paths > 0) {
      PricerOptions o = config.pricer_options(method);
      o.compute_delta = false;
      o.classify_steps = steps;
      const BlackScholesMarket market = config.market();
      const BrownianPaths w = simulate_brownian(config.algorithm.paths, config.algorithm.steps,
                                                config.payoff.maturity, config.model.dimension, config.algorithm.seed);
      records = price_on_paths(market, payoff, w, o).classification;
    }
    for (int k : steps) {
      const auto file = directory / (config.name + "_" + to_string(method) + "_step" + std::to_string(k) + ".csv");
      std::ofstream out(file);
      if (!out) throw ConfigError(file.string() + ": cannot write");
      const auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.step == k; });
      if (it != records.end()) {
        write_classification_csv(out, *it, payoff);
      } else {
        ClassificationRecord empty;
        empty.step = k;
        empty.states.resize(0, config.model.dimension);
        write_classification_csv(out, empty, payoff);
      }
      files.push_back(file);
    }
  }
  return files;
}

std::vector<ConditionRow> run_condition(const ExperimentConfig& config) {
  config.validate();
  if (config.model.kind == ModelKind::kHeston) fail("model.type", "condition output supports Black-Scholes presets");
  if (config.algorithm.paths == 0) fail("algorithm.paths", "must be positive");
  if (config.algorithm.solver.gram_limit < hyperbolic_cross_size(config.model.dimension, config.algorithm.order,
                                                                 config.algorithm.rule)) {
    fail("algorithm.gram_limit", "condition estimates need the explicit normal equations");
  }
  PricerOptions o = config.pricer_options(config.algorithm.methods.front());
  o.compute_delta = false;
  o.estimate_condition = true;
  const BrownianPaths w = simulate_brownian(config.algorithm.paths, config.algorithm.steps, config.payoff.maturity,
                                            config.model.dimension, config.algorithm.seed);
  const PricingResult r = price_on_paths(config.market(), config.make_payoff(), w, o);
  const int max_degree = build_index_set(config.model.dimension, config.algorithm.order, config.algorithm.rule).max_degree();
  std::vector<ConditionRow> rows;
  for (const auto& diag : r.diagnostics) {
    ConditionRow row;
    row.step = diag.step;
    row.time = w.time(diag.step);
    row.empirical = diag.condition;
    row.theoretical = diag.theoretical_condition;
    row.set_limit = 1.0 + static_cast<double>(max_degree) / diag.step;
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.step < y.step; });
  return rows;
}

void write_condition_csv(std::ostream& out, const std::vector<ConditionRow>& rows) {
  out << "step,time,empirical,theoretical,set_limit,ratio\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.step << ',' << r.time << ',' << r.empirical << ',' << r.theoretical << ',' << r.set_limit << ','
        << r.empirical / r.theoretical << '\n';
  }
}

OracleSummary run_oracle(const ExperimentConfig& config) {
  config.validate();
  if (config.model.kind == ModelKind::kHeston) fail("model.type", "no oracle for the Heston model");
  const Payoff payoff = config.make_payoff();
  const BlackScholesMarket market = config.market();
  const double t = config.payoff.maturity;
  const int n = config.algorithm.steps;
  OracleSummary s;
  if (payoff.kind() == PayoffKind::kPut1d) {
    const OracleResult r = bermudan_1d_full(market.spot()(0), market.sigma()(0), market.dividends()(0),
                                            payoff.strike(), market.rate(), t, n, OptionType::kPut);
    s.bermudan = r.price;
    s.delta = Eigen::VectorXd::Constant(1, r.delta);
    s.european = black_scholes_price(OptionType::kPut, market.spot()(0), payoff.strike(), market.rate(),
                                     market.dividends()(0), market.sigma()(0), t);
    s.refinement = bermudan_1d_refinement(market.spot()(0), market.sigma()(0), market.dividends()(0),
                                          payoff.strike(), market.rate(), t, n, OptionType::kPut);
    return s;
  }
  if (!payoff.is_geometric()) fail("payoff.kind", "oracle values exist for geometric baskets and put_1d only");
  const BasketOracle b = bermudan_geometric_basket(market, payoff, t, n);
  s.bermudan = b.price;
  s.delta = b.delta;
  s.european = european_geometric_basket(market, payoff, t);
  const GeometricReduction red = reduce_geometric(market);
  const OptionType type = payoff.kind() == PayoffKind::kGeometricPut ? OptionType::kPut : OptionType::kCall;
  s.refinement = bermudan_1d_refinement(red.spot, red.sigma, red.dividend, payoff.strike(), market.rate(), t, n, type);
  return s;
}

const std::vector<std::string>& table_ids() {
  static const std::vector<std::string> ids{"ex1", "ex1-order", "ex2-price", "ex2-delta", "ex3", "ex4", "ex5"};
  return ids;
}

namespace {

ExperimentConfig table_preset(const std::string& name, const TableOptions& o) {
  ExperimentConfig c = load_preset(name, o.preset_dir);
  if (o.runs) c.algorithm.runs = *o.runs;
  if (o.paths) c.algorithm.paths = *o.paths;
  c.validate();
  return c;
}

std::vector<std::string> presets_with_prefix(const std::string& prefix, const TableOptions& o) {
  std::vector<std::string> out;
  for (const auto& n : preset_names(o.preset_dir)) {
    if (n.rfind(prefix, 0) == 0) out.push_back(n);
  }
  return out;
}

// Orders presets by dimension, then spot.
void sort_presets(std::vector<ExperimentConfig>& configs) {
  std::stable_sort(configs.begin(), configs.end(), [](const auto& a, const auto& b) {
    if (a.model.dimension != b.model.dimension) return a.model.dimension < b.model.dimension;
    return a.model.spot(0) < b.model.spot(0);
  });
}

std::vector<ExperimentConfig> table_presets(const std::string& prefix, const TableOptions& o) {
  std::vector<ExperimentConfig> out;
  for (const auto& n : presets_with_prefix(prefix, o)) {
    ExperimentConfig c = table_preset(n, o);
    if (c.model.dimension <= o.max_dimension) out.push_back(std::move(c));
  }
  sort_presets(out);
  return out;
}

const PriceSummary& pick(const std::vector<PriceSummary>& rows, Method m) {
  for (const auto& r : rows) {
    if (r.method == m) return r;
  }
  throw std::logic_error("missing method in summary");
}

}  // namespace

void run_table(const std::string& id, std::ostream& out, const TableOptions& o) {
  if (std::find(table_ids().begin(), table_ids().end(), id) == table_ids().end()) {
    throw ConfigError("unknown table id '" + id + "'");
  }
  out << std::setprecision(8);
  if (id == "ex1") {
    out << "d,N_b,lsm,lsm_se,lsm_error,glsm,glsm_se,glsm_error,reference,published_reference\n";
    for (ExperimentConfig c : table_presets("example1-", o)) {
      if (c.model.dimension == 20) continue;  // order study only
      c.algorithm.methods = {Method::kLsm, Method::kGlsm};
      const auto rows = run_price(c, o.log);
      const double ref = run_oracle(c).bermudan;
      const auto& l = pick(rows, Method::kLsm);
      const auto& g = pick(rows, Method::kGlsm);
      out << c.model.dimension << ',' << g.basis_size << ',' << l.mean << ',' << l.standard_error << ','
          << relative_error(l.mean, ref) << ',' << g.mean << ',' << g.standard_error << ','
          << relative_error(g.mean, ref) << ',' << ref << ',' << c.reference.price.value_or(NAN) << '\n';
    }
  } else if (id == "ex1-order") {
    out << "p,N_b,price,standard_error,relative_error,reference\n";
    ExperimentConfig base = table_preset("example1-d20", o);
    const double ref = run_oracle(base).bermudan;
    for (int p : {2, 5, 10, 12}) {
      ExperimentConfig c = base;
      c.algorithm.order = p;
      c.algorithm.methods = {Method::kGlsm};
      const auto rows = run_price(c, o.log);
      out << p << ',' << rows[0].basis_size << ',' << rows[0].mean << ',' << rows[0].standard_error << ','
          << relative_error(rows[0].mean, ref) << ',' << ref << '\n';
    }
  } else if (id == "ex2-price" || id == "ex2-delta") {
    const bool delta = id == "ex2-delta";
    out << (delta ? "d,p,reference,delta_mean,delta_min,delta_max,max_relative_error,published_reference\n"
                  : "d,p,reference,price,standard_error,relative_error,published_reference\n");
    for (ExperimentConfig c : table_presets("example2-", o)) {
      c.algorithm.methods = {Method::kGlsm};
      c.algorithm.delta = delta;
      const auto rows = run_price(c, o.log);
      const OracleSummary ref = run_oracle(c);
      out << c.model.dimension << ',' << c.algorithm.order << ',';
      if (delta) {
        const double exact = ref.delta(0);
        const double err = ((rows[0].delta.array() - exact).abs() / std::abs(exact)).maxCoeff();
        out << exact << ',' << rows[0].delta.mean() << ',' << rows[0].delta.minCoeff() << ','
            << rows[0].delta.maxCoeff() << ',' << err << ',' << c.reference.delta.value_or(NAN) << '\n';
      } else {
        out << ref.bermudan << ',' << rows[0].mean << ',' << rows[0].standard_error << ','
            << relative_error(rows[0].mean, ref.bermudan) << ',' << c.reference.price.value_or(NAN) << '\n';
      }
    }
  } else if (id == "ex3" || id == "ex4") {
    out << "d,p,s0,N_b,ci_low,ci_high,price,standard_error,midpoint_error,T_bas,T_mat,T_lin,T_up,T_tot\n";
    for (ExperimentConfig c : table_presets(id == "ex3" ? "example3-" : "example4-", o)) {
      c.algorithm.methods = {Method::kGlsm};
      const auto rows = run_price(c, o.log);
      const PriceSummary& r = rows[0];
      const double lo = c.reference.ci_low.value_or(NAN);
      const double hi = c.reference.ci_high.value_or(NAN);
      const Timings t = r.mean_timings();
      out << c.model.dimension << ',' << c.algorithm.order << ',' << c.model.spot(0) << ',' << r.basis_size << ','
          << lo << ',' << hi << ',' << r.mean << ',' << r.standard_error << ',' << relative_error(r.mean, 0.5 * (lo + hi))
          << ',' << t.basis << ',' << t.matrix << ',' << t.linear << ',' << t.update << ',' << t.total << '\n';
    }
  } else {  // ex5
    const ExperimentConfig c = table_preset("example5", o);
    const auto rows = run_price(c, o.log);
    out << "quantity";
    for (double s : c.model.spots) out << ',' << s;
    out << "\nreference";
    for (const auto& r : rows) out << ',' << r.reference.value_or(NAN);
    out << "\nglsm";
    for (const auto& r : rows) out << ',' << r.mean;
    out << "\nstandard_error";
    for (const auto& r : rows) out << ',' << r.standard_error;
    out << "\nrelative_error";
    for (const auto& r : rows) out << ',' << (r.reference ? relative_error(r.mean, *r.reference) : NAN);
    out << '\n';
  }
}

}  // namespace glsm
