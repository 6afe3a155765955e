#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "glsm/index_set.hpp"
#include "glsm/market.hpp"
#include "glsm/payoff.hpp"
#include "glsm/regression.hpp"

namespace glsm {

enum class Method { kGlsm, kLsm };

struct PricerOptions {
  Method method = Method::kGlsm;
  int order = 10;
  CrossRule rule = CrossRule::kShiftedProduct;
  SolverOptions solver;
  Index block_rows = 1024;
  bool compute_delta = false;
  bool estimate_condition = false;  // eigenvalue ratio of A^T A / M per step (Gram route only)
  std::vector<int> classify_steps;  // steps whose exercise classification is recorded
};

/// Wall-clock seconds by stage, summed over all steps.
struct Timings {
  double basis = 0.0;
  double matrix = 0.0;
  double linear = 0.0;
  double update = 0.0;
  double total = 0.0;
};

struct StepSolution {
  int step = 0;
  double time = 0.0;
  Eigen::VectorXd coefficients;
};

struct ClassificationRecord {
  int step = 0;
  Eigen::MatrixXd states;          // M x d prices at t_k
  Eigen::VectorXd payoff;          // g(S_k), undiscounted
  Eigen::VectorXd continuation;    // fitted continuation, undiscounted
  std::vector<char> exercised;
};

struct PricingResult {
  double price = 0.0;
  double standard_error = 0.0;  // Monte Carlo error of the stopped-payoff mean within this run
  double european = 0.0;        // mean discounted terminal payoff on the same paths
  Eigen::VectorXd delta;        // time-0 delta, empty unless requested
  Eigen::VectorXd stopping_times;
  std::vector<StepSolution> steps;  // ordered k = N-1, ..., 1
  std::vector<StepDiagnostics> diagnostics;
  std::vector<ClassificationRecord> classification;
  Index basis_size = 0;
  Index nonzeros = 0;
  long long exercises = 0;
  Timings timings;
};

/// True iff the path is in the money and the fitted continuation is strictly below the payoff.
constexpr bool exercise_decision(double continuation, double payoff, bool in_the_money) {
  return in_the_money && continuation < payoff;
}

/// Backward induction on pre-simulated Brownian paths. Requires paths.horizon() to be the
/// maturity and paths.dimension() == market.dimension(). Throws std::invalid_argument when
/// M < N_b and NumericalError when a regression fails (the message names the step).
PricingResult price_on_paths(const BlackScholesMarket& market, const Payoff& payoff, const BrownianPaths& paths,
                             const PricerOptions& options);

/// Simulates M paths with N exercise dates up to `maturity` and prices with G-LSM.
PricingResult glsm_price(const BlackScholesMarket& market, const Payoff& payoff, double maturity, Index paths,
                         int steps, std::uint64_t seed, PricerOptions options = {});

/// Same pipeline with the regression matrix Phi_k instead of the gradient-enhanced A_k.
PricingResult lsm_price(const BlackScholesMarket& market, const Payoff& payoff, double maturity, Index paths,
                        int steps, std::uint64_t seed, PricerOptions options = {});

/// Time-0 delta from u_1: least squares on rows H^{(dt)}(0) + grad H^{(dt)}(0) . W_1 (rank d+1,
/// minimum-norm solution), mapped to price coordinates with the inverse Jacobian at s0.
/// Returned in time-0 money. Throws NumericalError if the reduced regression fails.
Eigen::VectorXd delta_at_zero(const Eigen::Ref<const Eigen::MatrixXd>& w1, const Eigen::Ref<const Eigen::VectorXd>& u1,
                              const IndexSet& set, const BlackScholesMarket& market, double dt);

struct StepDelta {
  Eigen::MatrixXd delta;            // Q x d, in time-t_k money
  std::vector<char> exercise_region;  // true where the payoff gradient was returned instead
};

/// Deltas at t_k for price-space query states (rows), from the discounted step coefficients.
StepDelta delta_at_step(int step, double time, const Eigen::Ref<const Eigen::VectorXd>& coefficients,
                        const IndexSet& set, const BlackScholesMarket& market, const Payoff& payoff,
                        const Eigen::Ref<const Eigen::MatrixXd>& states);

/// Exercise decision for every path at step k given discounted coefficients beta_k.
ClassificationRecord classify_exercise(int step, const Eigen::Ref<const Eigen::VectorXd>& coefficients,
                                       const IndexSet& set, const BrownianPaths& paths,
                                       const BlackScholesMarket& market, const Payoff& payoff);

/// Header "step,<coords>,payoff,continuation,exercised". Coordinates are the d prices, or for
/// d > 2 the projection (geometric mean, payoff-relevant index).
void write_classification_csv(std::ostream& out, const ClassificationRecord& record, const Payoff& payoff);

struct HestonOptions {
  int price_order = 20;    // highest Hermite degree in X1
  int logvar_order = 20;   // highest Chebyshev degree in X2
  int order = 20;          // product-rule order over the pair of degrees
  int substeps = 1;        // Euler sub-steps per exercise interval
  // The standardized X1 and the X2 range are taken from the empirical [q, 1 - q] quantiles;
  // paths outside are clamped and carry no gradient term on that axis. 0 uses the plain
  // minimum and maximum.
  double range_quantile = 0.001;
  Method method = Method::kGlsm;
  SolverOptions solver;
};

/// 2-D index set for the Heston basis: product rule with `order`, capped per axis.
IndexSet heston_index_set(const HestonOptions& options);

/// Bermudan option under Heston with regression variables (X1, X2); Hermite in the
/// standardized log-price times Chebyshev in the log-variance mapped from its per-step range.
PricingResult glsm_price_heston(const HestonMarket& params, const Payoff& payoff, double maturity, Index paths,
                                int steps, std::uint64_t seed, const HestonOptions& options = {});

/// Prices for several spots on one set of simulated paths (X1 does not depend on the spot).
std::vector<PricingResult> glsm_price_heston_spots(const HestonMarket& params, const std::vector<double>& spots,
                                                   const Payoff& payoff, double maturity, Index paths, int steps,
                                                   std::uint64_t seed, const HestonOptions& options = {});

/// One-dimensional Chebyshev values T_0..T_n at x in [-1, 1] (columns), and derivatives.
Eigen::MatrixXd chebyshev_table(const Eigen::Ref<const Eigen::VectorXd>& x, int max_order);
Eigen::MatrixXd chebyshev_derivative_table(const Eigen::Ref<const Eigen::VectorXd>& x, int max_order);

}  // namespace glsm
