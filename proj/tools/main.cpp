#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "glsm/app.hpp"
#include "glsm/errors.hpp"

using namespace glsm;

namespace {

struct Source {
  std::string config;
  std::string preset;
  std::string preset_dir;
  std::optional<int> runs;
  std::optional<long long> paths;
  std::optional<long long> seed;
  std::optional<int> order;
  std::optional<int> steps;
  std::string method;
};

void add_source(CLI::App* cmd, Source& s) {
  auto* group = cmd->add_option_group("input");
  group->add_option("-c,--config", s.config, "Experiment INI file");
  group->add_option("-p,--preset", s.preset, "Preset name (see presets/)");
  group->require_option(1);
  cmd->add_option("--runs", s.runs, "Number of independent runs");
  cmd->add_option("--paths", s.paths, "Number of simulated paths M");
  cmd->add_option("--seed", s.seed, "Base seed");
  cmd->add_option("--order", s.order, "Maximum polynomial order p");
  cmd->add_option("--steps", s.steps, "Number of exercise dates N");
  cmd->add_option("--method", s.method, "glsm, lsm or both");
}

ExperimentConfig resolve(const Source& s, const std::string& preset_dir) {
  ExperimentConfig c = s.config.empty() ? load_preset(s.preset, preset_dir.empty() ? default_preset_dir() : std::filesystem::path(preset_dir))
                                        : load_config(s.config);
  if (s.runs) c.algorithm.runs = *s.runs;
  if (s.paths) c.algorithm.paths = *s.paths;
  if (s.seed) {
    if (*s.seed < 0) throw ConfigError("--seed: must be non-negative");
    c.algorithm.seed = static_cast<std::uint64_t>(*s.seed);
  }
  if (s.order) c.algorithm.order = *s.order;
  if (s.steps) c.algorithm.steps = *s.steps;
  if (s.method == "both") {
    c.algorithm.methods = {Method::kGlsm, Method::kLsm};
  } else if (!s.method.empty()) {
    try {
      c.algorithm.methods = {parse_method(s.method)};
    } catch (const std::invalid_argument&) {
      throw ConfigError("--method: expected glsm, lsm or both");
    }
  }
  c.validate();
  return c;
}

// Writes to `path`, or stdout when empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError(path + ": cannot open for writing");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-enhanced least squares Monte Carlo for Bermudan options"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  bool quiet = false;
  std::string preset_dir;
  app.add_option("--threads", threads, "Worker threads (default: OpenMP default)")->check(CLI::NonNegativeNumber);
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");
  app.add_option("--preset-dir", preset_dir, "Directory holding preset INI files");

  Source price_src;
  std::string price_out, price_timings;
  auto* price = app.add_subcommand("price", "Price an option; writes a summary CSV");
  add_source(price, price_src);
  price->add_option("-o,--output", price_out, "Summary CSV (default stdout)");
  price->add_option("--timings", price_timings, "Per-run timing CSV");

  Source delta_src;
  std::string delta_out;
  auto* delta = app.add_subcommand("delta", "Time-0 deltas; writes one row per asset");
  add_source(delta, delta_src);
  delta->add_option("-o,--output", delta_out, "Delta CSV (default stdout)");

  Source boundary_src;
  std::vector<int> boundary_steps;
  std::string boundary_dir;
  auto* boundary = app.add_subcommand("boundary", "Exercise classification files for plotting");
  add_source(boundary, boundary_src);
  boundary->add_option("--at", boundary_steps, "Exercise dates k to record (default from config)");
  boundary->add_option("-d,--dir", boundary_dir, "Output directory (default from config)");

  Source condition_src;
  std::string condition_out;
  auto* condition = app.add_subcommand("condition", "Per-step condition numbers of A^T A / M");
  add_source(condition, condition_src);
  condition->add_option("-o,--output", condition_out, "Condition CSV (default stdout)");

  std::string table_id, table_out;
  std::optional<int> table_runs;
  std::optional<long long> table_paths;
  int table_dim = 1000;
  auto* tables = app.add_subcommand("tables", "Reproduce an experiment table");
  tables->add_option("id", table_id, "ex1, ex1-order, ex2-price, ex2-delta, ex3, ex4 or ex5")->required();
  tables->add_option("--runs", table_runs, "Runs per row");
  tables->add_option("--paths", table_paths, "Paths per run");
  tables->add_option("--max-dim", table_dim, "Skip presets above this dimension");
  tables->add_option("-o,--output", table_out, "Table CSV (default stdout)");

  Source oracle_src;
  auto* oracle = app.add_subcommand("oracle", "Reference values from the one-dimensional reduction");
  add_source(oracle, oracle_src);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (threads > 0) omp_set_num_threads(threads);
  std::ostream* log = quiet ? nullptr : &std::cerr;

  try {
    if (*price) {
      const ExperimentConfig c = resolve(price_src, preset_dir);
      const auto rows = run_price(c, log);
      Output out(price_out);
      write_price_csv(out.stream(), rows);
      if (!price_timings.empty()) {
        Output t(price_timings);
        write_timings_csv(t.stream(), rows);
      }
    } else if (*delta) {
      ExperimentConfig c = resolve(delta_src, preset_dir);
      c.algorithm.delta = true;
      const auto rows = run_price(c, log);
      Output out(delta_out);
      write_delta_csv(out.stream(), rows);
    } else if (*boundary) {
      const ExperimentConfig c = resolve(boundary_src, preset_dir);
      const std::vector<int> steps = boundary_steps.empty() ? c.output.boundary_steps : boundary_steps;
      if (steps.empty()) throw ConfigError("boundary: no steps given (--at or output.boundary_steps)");
      for (const auto& f : run_boundary(c, steps, boundary_dir.empty() ? c.output.directory : boundary_dir)) {
        std::cout << f.string() << '\n';
      }
    } else if (*condition) {
      const ExperimentConfig c = resolve(condition_src, preset_dir);
      Output out(condition_out);
      write_condition_csv(out.stream(), run_condition(c));
    } else if (*tables) {
      TableOptions o;
      o.runs = table_runs;
      if (table_paths) o.paths = *table_paths;
      o.max_dimension = table_dim;
      if (!preset_dir.empty()) o.preset_dir = preset_dir;
      o.log = log;
      Output out(table_out);
      run_table(table_id, out.stream(), o);
    } else if (*oracle) {
      const ExperimentConfig c = resolve(oracle_src, preset_dir);
      const OracleSummary s = run_oracle(c);
      std::cout.precision(10);
      std::cout << "name,bermudan,european,refinement,delta\n"
                << c.name << ',' << s.bermudan << ',' << s.european << ',' << s.refinement << ',' << s.delta(0)
                << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::length_error& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
