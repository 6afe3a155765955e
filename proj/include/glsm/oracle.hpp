#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "glsm/market.hpp"
#include "glsm/payoff.hpp"

namespace glsm {

enum class OptionType { kPut, kCall };

/// Log-price lattice used by the one-dimensional reference solver.
struct LatticeSpec {
  int nodes = 1024;         // grid points, >= 512
  double span = 10.0;       // half-width in standard deviations of ln S_T
  int quadrature = 4;       // Gauss-Legendre nodes per grid cell
};

struct OracleResult {
  double price = 0.0;
  double continuation = 0.0;  // c_0 at the initial state
  double delta = 0.0;         // dV/dS at the initial state
  /// Exercise boundary at t_k, k = 1..N-1 (index k-1); NaN where no boundary is found.
  std::vector<double> boundary;
};

/// Nodes and weights for E[f(Z)], Z ~ N(0,1), by Golub-Welsch. The weights sum to 1.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n);

/// Closed-form Black-Scholes value of a European option with continuous dividend yield.
double black_scholes_price(OptionType type, double spot, double strike, double rate, double dividend,
                           double sigma, double maturity);

/// Bermudan option on a single geometric Brownian motion with exercise dates t_k = k T / N,
/// k = 1..N, plus the outer max with immediate exercise at t_0.
/// Throws std::invalid_argument for an invalid lattice or parameters.
OracleResult bermudan_1d_full(double spot, double sigma, double dividend, double strike, double rate,
                              double maturity, int steps, OptionType type, const LatticeSpec& spec = {});

double bermudan_1d(double spot, double sigma, double dividend, double strike, double rate, double maturity,
                   int steps, OptionType type, const LatticeSpec& spec = {});

/// Price difference between `spec` and a lattice with doubled grid and quadrature nodes,
/// relative to the refined price.
double bermudan_1d_refinement(double spot, double sigma, double dividend, double strike, double rate,
                              double maturity, int steps, OptionType type, const LatticeSpec& spec = {});

/// Closed-form European geometric basket value through the one-dimensional reduction.
double european_geometric_basket(const BlackScholesMarket& market, const Payoff& payoff, double maturity);

/// Exact Bermudan geometric basket price and the per-asset time-0 delta.
struct BasketOracle {
  double price = 0.0;
  Eigen::VectorXd delta;
};

BasketOracle bermudan_geometric_basket(const BlackScholesMarket& market, const Payoff& payoff, double maturity,
                                       int steps, const LatticeSpec& spec = {});

}  // namespace glsm
