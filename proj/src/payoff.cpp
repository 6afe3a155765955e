#include "glsm/payoff.hpp"

#include <cmath>
#include <stdexcept>

namespace glsm {

PayoffKind parse_payoff_kind(const std::string& name) {
  if (name == "geometric_basket_put") return PayoffKind::kGeometricPut;
  if (name == "geometric_basket_call") return PayoffKind::kGeometricCall;
  if (name == "max_call") return PayoffKind::kMaxCall;
  if (name == "put_1d") return PayoffKind::kPut1d;
  throw std::invalid_argument("unknown payoff kind '" + name + "'");
}

std::string to_string(PayoffKind kind) {
  switch (kind) {
    case PayoffKind::kGeometricPut: return "geometric_basket_put";
    case PayoffKind::kGeometricCall: return "geometric_basket_call";
    case PayoffKind::kMaxCall: return "max_call";
    case PayoffKind::kPut1d: return "put_1d";
  }
  return "unknown";
}

Payoff::Payoff(PayoffKind kind, double strike) : kind_(kind), strike_(strike) {
  if (!(strike > 0.0) || !std::isfinite(strike)) throw std::invalid_argument("Payoff: strike must be positive");
}

Payoff Payoff::zero() {
  Payoff p(PayoffKind::kGeometricPut, 1.0);
  p.zero_ = true;
  return p;
}

double Payoff::underlying(const Eigen::Ref<const Eigen::VectorXd>& s) const {
  if (s.size() == 0) throw std::invalid_argument("Payoff: empty state");
  if ((s.array() <= 0.0).any()) throw std::invalid_argument("Payoff: prices must be positive");
  switch (kind_) {
    case PayoffKind::kGeometricPut:
    case PayoffKind::kGeometricCall:
      return std::exp(s.array().log().mean());
    case PayoffKind::kMaxCall:
      return s.maxCoeff();
    case PayoffKind::kPut1d:
      if (s.size() != 1) throw std::invalid_argument("Payoff: put_1d needs a one-dimensional state");
      return s(0);
  }
  return 0.0;
}

double Payoff::value(const Eigen::Ref<const Eigen::VectorXd>& s) const {
  const double x = underlying(s);
  if (zero_) return 0.0;
  switch (kind_) {
    case PayoffKind::kGeometricPut:
    case PayoffKind::kPut1d:
      return std::max(strike_ - x, 0.0);
    case PayoffKind::kGeometricCall:
    case PayoffKind::kMaxCall:
      return std::max(x - strike_, 0.0);
  }
  return 0.0;
}

Eigen::VectorXd Payoff::values(const Eigen::Ref<const Eigen::MatrixXd>& s) const {
  Eigen::VectorXd out(s.rows());
  if (zero_) {
    out.setZero();
    return out;
  }
  if ((s.array() <= 0.0).any()) throw std::invalid_argument("Payoff: prices must be positive");
  Eigen::VectorXd x;
  switch (kind_) {
    case PayoffKind::kGeometricPut:
    case PayoffKind::kGeometricCall:
      x = s.array().log().rowwise().mean().exp();
      break;
    case PayoffKind::kMaxCall:
      x = s.rowwise().maxCoeff();
      break;
    case PayoffKind::kPut1d:
      if (s.cols() != 1) throw std::invalid_argument("Payoff: put_1d needs a one-dimensional state");
      x = s.col(0);
      break;
  }
  if (kind_ == PayoffKind::kGeometricPut || kind_ == PayoffKind::kPut1d) {
    out = (strike_ - x.array()).max(0.0);
  } else {
    out = (x.array() - strike_).max(0.0);
  }
  return out;
}

Eigen::VectorXd Payoff::gradient(const Eigen::Ref<const Eigen::VectorXd>& s) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(s.size());
  if (value(s) <= 0.0) return g;
  const double x = underlying(s);
  const auto d = static_cast<double>(s.size());
  switch (kind_) {
    case PayoffKind::kGeometricPut:
      g = -(x / d) * s.cwiseInverse();
      break;
    case PayoffKind::kGeometricCall:
      g = (x / d) * s.cwiseInverse();
      break;
    case PayoffKind::kMaxCall: {
      Index arg = 0;
      s.maxCoeff(&arg);
      g(arg) = 1.0;
      break;
    }
    case PayoffKind::kPut1d:
      g(0) = -1.0;
      break;
  }
  return g;
}

double discounted_payoff(const Payoff& payoff, const Eigen::Ref<const Eigen::VectorXd>& s, double t, double rate) {
  if (t < 0.0) throw std::invalid_argument("discounted_payoff: negative time");
  return std::exp(-rate * t) * payoff.value(s);
}

GeometricReduction reduce_geometric(const BlackScholesMarket& market) {
  const auto d = static_cast<double>(market.dimension());
  const Eigen::VectorXd& sigma = market.sigma();
  const double spot = std::exp(market.spot().array().log().mean());
  const double var = sigma.dot(market.correlation() * sigma);
  const double sigma_hat = std::sqrt(var) / d;
  const double dividend =
      (market.dividends().array() + 0.5 * sigma.array().square()).mean() - 0.5 * sigma_hat * sigma_hat;
  return {spot, sigma_hat, dividend};
}

}  // namespace glsm
