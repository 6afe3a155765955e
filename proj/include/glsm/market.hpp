#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "glsm/errors.hpp"
#include "glsm/index_set.hpp"

namespace glsm {

/// Q Lambda Q^T = Sigma P Sigma with eigenvalues sorted descending, plus the rotated drift
/// mu = Q^T (r - delta - sigma^2 / 2).
struct SpectralFactors {
  Eigen::MatrixXd rotation;     // Q, orthogonal
  Eigen::VectorXd eigenvalues;  // diagonal of Lambda, non-negative
  Eigen::VectorXd drift;        // mu
};

/// Throws std::invalid_argument for a non-symmetric, non-unit-diagonal or indefinite
/// correlation matrix. Negative eigenvalues within 1e-12 (relative) are clamped to zero.
SpectralFactors decompose(double rate, const Eigen::VectorXd& dividends,
                          const Eigen::VectorXd& sigma, const Eigen::MatrixXd& correlation);

/// Multi-asset Black-Scholes market with constant parameters.
class BlackScholesMarket {
 public:
  BlackScholesMarket(Eigen::VectorXd spot, double rate, Eigen::VectorXd dividends,
                     Eigen::VectorXd sigma, Eigen::MatrixXd correlation);

  /// All assets share spot, dividend yield and volatility; constant pairwise correlation.
  static BlackScholesMarket symmetric(int dimension, double spot, double rate, double dividend,
                                      double sigma, double correlation);

  int dimension() const { return static_cast<int>(spot_.size()); }
  const Eigen::VectorXd& spot() const { return spot_; }
  double rate() const { return rate_; }
  const Eigen::VectorXd& dividends() const { return dividends_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& correlation() const { return correlation_; }
  const SpectralFactors& factors() const { return factors_; }

  /// Same market with different initial prices.
  BlackScholesMarket with_spot(Eigen::VectorXd spot) const;

 private:
  Eigen::VectorXd spot_;
  double rate_;
  Eigen::VectorXd dividends_;
  Eigen::VectorXd sigma_;
  Eigen::MatrixXd correlation_;
  SpectralFactors factors_;
};

/// S = s0 .* exp(Q (mu t + sqrt(Lambda) w)) applied to every row of `brownian`.
Eigen::MatrixXd prices_from_brownian(const Eigen::Ref<const Eigen::MatrixXd>& brownian, double t,
                                     const BlackScholesMarket& market);

/// Inverse map w = Lambda^{-1/2} Q^T (ln(s ./ s0) - mu t), row-wise.
Eigen::MatrixXd brownian_from_prices(const Eigen::Ref<const Eigen::MatrixXd>& prices, double t,
                                     const BlackScholesMarket& market);

/// dw/ds at price vector s: entry (i, j) = (Lambda^{-1/2} Q^T)_{ij} / s_j.
/// Throws DegenerateModelError if Lambda has a zero eigenvalue.
Eigen::MatrixXd inverse_jacobian(const BlackScholesMarket& market, const Eigen::VectorXd& s);

/// ds/dw at price vector s: entry (i, j) = s_i (Q sqrt(Lambda))_{ij}.
Eigen::MatrixXd forward_jacobian(const BlackScholesMarket& market, const Eigen::VectorXd& s);

/// Brownian samples W on the grid t_k = k T / N, k = 0..N.
class BrownianPaths {
 public:
  BrownianPaths(Index paths, int steps, int dimension, double horizon, std::uint64_t seed);

  Index paths() const { return paths_; }
  int steps() const { return steps_; }
  int dimension() const { return dimension_; }
  double horizon() const { return horizon_; }
  double dt() const { return horizon_ / steps_; }
  double time(int k) const { return horizon_ * k / steps_; }
  std::uint64_t seed() const { return seed_; }

  /// M x d slice at step k.
  const Eigen::MatrixXd& at(int k) const { return values_[static_cast<std::size_t>(k)]; }
  Eigen::MatrixXd& at(int k) { return values_[static_cast<std::size_t>(k)]; }
  /// W_{k+1} - W_k.
  Eigen::MatrixXd increment(int k) const { return at(k + 1) - at(k); }

  double operator()(Index m, int k, int j) const { return at(k)(m, j); }

 private:
  Index paths_;
  int steps_;
  int dimension_;
  double horizon_;
  std::uint64_t seed_;
  std::vector<Eigen::MatrixXd> values_;
};

/// Bytes needed to hold M x (N+1) x d doubles.
double brownian_memory_bytes(Index paths, int steps, int dimension);

/// Deterministic in `seed` and independent of the OpenMP thread count: increment (m, k, j)
/// is a pure function of (seed, m, k, j). Throws std::length_error with a memory estimate
/// when the array cannot be allocated.
BrownianPaths simulate_brownian(Index paths, int steps, double horizon, int dimension,
                                std::uint64_t seed);

/// Flat little-endian dump: four int64 (M, N, d, seed) followed by M*(N+1)*d float64 in
/// (path, step, axis) order.
void write_paths(std::ostream& out, const BrownianPaths& paths);
BrownianPaths read_paths(std::istream& in);

struct HestonMarket {
  double spot;
  double v0;
  double rate;
  double rho;
  double kappa;
  double theta;
  double nu;

  /// Throws std::invalid_argument unless |rho| < 1 and spot, v0, kappa, theta, nu > 0.
  void validate() const;
};

/// Simulated Heston state (X1 = ln(S/S0), X2 = ln v) on the exercise grid together with the
/// driving Brownian increments aggregated over each exercise interval.
struct HestonPaths {
  Index paths = 0;
  int steps = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::vector<Eigen::MatrixXd> state;       // N+1 slices, M x 2
  std::vector<Eigen::MatrixXd> increments;  // N slices, M x 2: (dW1, dW2)
  /// Number of sub-steps where the Euler variance went negative and was truncated.
  long long truncations = 0;
  /// Number of retained states where v fell below the floor before the logarithm.
  long long floor_hits = 0;

  double dt() const { return horizon / steps; }
  double time(int k) const { return horizon * k / steps; }
};

/// Full-truncation Euler with `substeps` sub-steps per exercise interval.
/// W1 drives the variance; the log-price is driven by rho dW1 + sqrt(1-rho^2) dW2.
HestonPaths simulate_heston(Index paths, int steps, double horizon, const HestonMarket& params,
                            std::uint64_t seed, int substeps = 1);

inline constexpr double kVarianceFloor = 1e-12;

}  // namespace glsm
