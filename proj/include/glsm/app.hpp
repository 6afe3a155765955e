#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "glsm/market.hpp"
#include "glsm/payoff.hpp"
#include "glsm/pricer.hpp"

namespace glsm {

enum class ModelKind { kBlackScholes, kHeston };

struct ModelConfig {
  ModelKind kind = ModelKind::kBlackScholes;
  int dimension = 1;
  Eigen::VectorXd spot;       // d entries (Black-Scholes)
  double rate = 0.0;
  Eigen::VectorXd dividends;  // d entries
  Eigen::VectorXd sigma;      // d entries
  double correlation = 0.0;   // common off-diagonal correlation
  // Heston
  std::vector<double> spots;  // initial prices priced on shared paths
  double v0 = 0.0;
  double rho = 0.0;
  double kappa = 0.0;
  double theta = 0.0;
  double nu = 0.0;
};

struct PayoffConfig {
  PayoffKind kind = PayoffKind::kGeometricPut;
  double strike = 100.0;
  double maturity = 1.0;
};

struct AlgorithmConfig {
  std::vector<Method> methods{Method::kGlsm};
  Index paths = 100000;
  int steps = 50;
  int order = 10;
  CrossRule rule = CrossRule::kShiftedProduct;
  std::uint64_t seed = 1;
  int runs = 10;
  SolverOptions solver;
  Index block_rows = 1024;
  bool delta = false;
  // Heston basis
  int price_order = 20;
  int logvar_order = 20;
  int substeps = 1;
  double range_quantile = 0.001;
};

struct OutputConfig {
  std::string directory = ".";
  int verbosity = 1;
  std::vector<int> boundary_steps;
};

/// Published values the experiment is compared against.
struct ReferenceConfig {
  std::optional<double> price;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> delta;
  std::vector<double> prices;  // one per Heston spot
};

struct ExperimentConfig {
  std::string name = "experiment";
  ModelConfig model;
  PayoffConfig payoff;
  AlgorithmConfig algorithm;
  OutputConfig output;
  ReferenceConfig reference;

  /// Checks every field against the module preconditions; throws ConfigError naming the field.
  void validate() const;

  BlackScholesMarket market() const;
  HestonMarket heston(double spot) const;
  Payoff make_payoff() const { return Payoff(payoff.kind, payoff.strike); }
  PricerOptions pricer_options(Method method) const;
  HestonOptions heston_options() const;
};

/// INI text with sections [experiment], [model], [payoff], [algorithm], [output], [reference].
/// Unknown sections or keys are rejected. The result is validated.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& file);

/// $GLSM_PRESETS if set, else the presets/ directory of the source tree.
std::filesystem::path default_preset_dir();
std::vector<std::string> preset_names(const std::filesystem::path& dir = default_preset_dir());
ExperimentConfig load_preset(const std::string& name, const std::filesystem::path& dir = default_preset_dir());

std::string to_string(Method method);
Method parse_method(const std::string& name);

struct PriceSummary {
  std::string name;
  Method method = Method::kGlsm;
  int dimension = 0;
  double spot = 0.0;  // s0 of the first asset (or the Heston spot)
  Index paths = 0;
  int steps = 0;
  int order = 0;
  Index basis_size = 0;
  Index nonzeros = 0;
  Index nonzeros_shortcut = 0;
  std::vector<double> prices;  // one per run
  double mean = 0.0;
  double standard_error = 0.0;  // sqrt(sum (v_i - mean)^2 / (R (R - 1))); 0 for one run
  double path_standard_error = 0.0;  // mean in-run Monte Carlo error
  std::optional<double> reference;
  std::optional<double> reference_delta;
  Eigen::VectorXd delta;  // mean over runs, empty unless requested
  std::vector<Timings> timings;  // one per run
  Timings mean_timings() const;
};

/// Runs the configured number of independent runs (seed + i for run i). Methods in one run
/// share the simulated paths. Progress goes to `log` when non-null and verbosity > 0.
std::vector<PriceSummary> run_price(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Summary CSV without timings; identical configs give identical bytes.
void write_price_csv(std::ostream& out, const std::vector<PriceSummary>& rows);
/// Header "name,method,spot,run,T_bas,T_mat,T_lin,T_up,T_tot".
void write_timings_csv(std::ostream& out, const std::vector<PriceSummary>& rows);
/// Header "name,method,asset,delta,reference,relative_error".
void write_delta_csv(std::ostream& out, const std::vector<PriceSummary>& rows);

/// One classification file per method and step, named <name>_<method>_step<k>.csv.
/// Uses the first run's seed. With zero paths, header-only files are written.
std::vector<std::filesystem::path> run_boundary(const ExperimentConfig& config, const std::vector<int>& steps,
                                                const std::filesystem::path& directory);

struct ConditionRow {
  int step = 0;
  double time = 0.0;
  double empirical = 0.0;    // eigenvalue ratio of A^T A / M
  double theoretical = 0.0;  // 1 + (p + d - 1) / k
  double set_limit = 0.0;    // 1 + max |alpha| / k for the configured index set
};

std::vector<ConditionRow> run_condition(const ExperimentConfig& config);
/// Header "step,time,empirical,theoretical,set_limit,ratio".
void write_condition_csv(std::ostream& out, const std::vector<ConditionRow>& rows);

struct OracleSummary {
  double bermudan = 0.0;
  double european = 0.0;
  double refinement = 0.0;  // relative change under doubled lattice
  Eigen::VectorXd delta;
};

/// Reference values for a geometric basket (or one-asset put/call) preset.
OracleSummary run_oracle(const ExperimentConfig& config);

const std::vector<std::string>& table_ids();

struct TableOptions {
  std::optional<int> runs;
  std::optional<Index> paths;
  int max_dimension = 1000;
  std::filesystem::path preset_dir = default_preset_dir();
  std::ostream* log = nullptr;
};

/// Loops over the presets behind a table and writes a CSV with reference values and
/// relative errors. Throws ConfigError for an unknown id.
void run_table(const std::string& id, std::ostream& out, const TableOptions& options = {});

}  // namespace glsm
