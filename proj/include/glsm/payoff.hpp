#pragma once

#include <string>

#include <Eigen/Core>

#include "glsm/market.hpp"

namespace glsm {

enum class PayoffKind { kGeometricPut, kGeometricCall, kMaxCall, kPut1d };

/// Parses "geometric_basket_put", "geometric_basket_call", "max_call", "put_1d".
PayoffKind parse_payoff_kind(const std::string& name);
std::string to_string(PayoffKind kind);

class Payoff {
 public:
  Payoff(PayoffKind kind, double strike);

  PayoffKind kind() const { return kind_; }
  double strike() const { return strike_; }
  bool is_geometric() const { return kind_ == PayoffKind::kGeometricPut || kind_ == PayoffKind::kGeometricCall; }

  /// The payoff index: geometric mean, maximum, or the single price.
  double underlying(const Eigen::Ref<const Eigen::VectorXd>& s) const;
  /// g(s). Throws std::invalid_argument on non-positive prices.
  double value(const Eigen::Ref<const Eigen::VectorXd>& s) const;
  /// Row-wise g over an M x d price matrix.
  Eigen::VectorXd values(const Eigen::Ref<const Eigen::MatrixXd>& s) const;
  /// dg/ds where g is differentiable; zero out of the money.
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& s) const;
  /// True iff g(s) > 0.
  bool in_the_money(const Eigen::Ref<const Eigen::VectorXd>& s) const { return value(s) > 0.0; }

  /// Zero payoff regardless of state, useful for degenerate checks.
  static Payoff zero();

 private:
  PayoffKind kind_;
  double strike_;
  bool zero_ = false;
};

/// e^{-rt} g(s).
double discounted_payoff(const Payoff& payoff, const Eigen::Ref<const Eigen::VectorXd>& s, double t, double rate);

/// Parameters of the one-dimensional geometric Brownian motion followed by the geometric mean.
struct GeometricReduction {
  double spot;
  double sigma;
  double dividend;
};

GeometricReduction reduce_geometric(const BlackScholesMarket& market);

}  // namespace glsm
