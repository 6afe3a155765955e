#include "glsm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace glsm {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double exercise_value(OptionType type, double strike, double s) {
  return type == OptionType::kPut ? std::max(strike - s, 0.0) : std::max(s - strike, 0.0);
}

// Uniform log-price grid with four-point Lagrange interpolation.
class Grid {
 public:
  Grid(double center, double half_width, int nodes)
      : lo_(center - half_width), h_(2.0 * half_width / (nodes - 1)), n_(nodes) {}

  int size() const { return n_; }
  double x(int i) const { return lo_ + h_ * i; }
  double spacing() const { return h_; }
  bool contains(double x) const { return x >= lo_ && x <= lo_ + h_ * (n_ - 1); }

  double interpolate(const std::vector<double>& v, double x) const {
    const double u = (x - lo_) / h_;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 1, n_ - 3);
    const double t = u - i;
    const double a = v[i - 1], b = v[i], c = v[i + 1], d = v[i + 2];
    // Lagrange basis on nodes -1, 0, 1, 2.
    return a * (-t * (t - 1.0) * (t - 2.0) / 6.0) + b * ((t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0) +
           c * (-(t + 1.0) * t * (t - 2.0) / 2.0) + d * ((t + 1.0) * t * (t - 1.0) / 6.0);
  }

 private:
  double lo_;
  double h_;
  int n_;
};

// Gauss-Legendre rule on [0, 1].
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre_unit(int n) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  Eigen::VectorXd weights = eig.eigenvectors().row(0).transpose().cwiseAbs2();
  return {(eig.eigenvalues().array() + 1.0) / 2.0, weights / weights.sum()};
}

struct Lattice {
  Grid grid;
  Eigen::VectorXd nodes;    // on [0, 1], per grid cell
  Eigen::VectorXd weights;
  double drift;
  double diffusion;
  double discount;
  OptionType type;
  double strike;

  // Discounted one-period expectation of the next-date value at log-price x. The Gaussian
  // density times the piecewise-cubic interpolant is integrated cell by cell.
  double continuation(const std::vector<double>& next, double x) const {
    constexpr double kWidth = 8.5;
    const double mean = x + drift;
    const double h = grid.spacing();
    const int first = static_cast<int>(std::floor((mean - kWidth * diffusion - grid.x(0)) / h));
    const int last = static_cast<int>(std::ceil((mean + kWidth * diffusion - grid.x(0)) / h));
    const double norm = h / (diffusion * std::sqrt(2.0 * std::numbers::pi));
    double sum = 0.0;
    for (int j = first; j < last; ++j) {
      const double left = grid.x(0) + h * j;
      const bool inside = j >= 0 && j < grid.size() - 1;
      for (Index q = 0; q < nodes.size(); ++q) {
        const double y = left + h * nodes(q);
        const double z = (y - mean) / diffusion;
        const double v = inside ? grid.interpolate(next, y) : exercise_value(type, strike, std::exp(y));
        sum += weights(q) * std::exp(-0.5 * z * z) * v;
      }
    }
    return discount * norm * sum;
  }
};

void validate(double spot, double sigma, double strike, double maturity, int steps, const LatticeSpec& spec) {
  if (!(spot > 0.0) || !(sigma > 0.0) || !(strike > 0.0) || !(maturity > 0.0)) {
    throw std::invalid_argument("bermudan_1d: spot, sigma, strike and maturity must be positive");
  }
  if (steps < 1) throw std::invalid_argument("bermudan_1d: steps must be >= 1");
  if (spec.nodes < 512) throw std::invalid_argument("bermudan_1d: at least 512 grid nodes are required");
  if (spec.span < 8.0) throw std::invalid_argument("bermudan_1d: grid must span at least 8 standard deviations");
  if (spec.quadrature < 2) throw std::invalid_argument("bermudan_1d: quadrature needs at least 2 nodes per cell");
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  if (eig.info() != Eigen::Success) throw std::runtime_error("gauss_hermite: eigenvalue solve failed");
  Eigen::VectorXd weights = eig.eigenvectors().row(0).transpose().cwiseAbs2();
  return {eig.eigenvalues(), weights / weights.sum()};
}

double black_scholes_price(OptionType type, double spot, double strike, double rate, double dividend, double sigma,
                           double maturity) {
  const double fwd_disc = spot * std::exp(-dividend * maturity);
  const double strike_disc = strike * std::exp(-rate * maturity);
  const double vol = sigma * std::sqrt(maturity);
  if (!(vol > 0.0)) {
    return type == OptionType::kPut ? std::max(strike_disc - fwd_disc, 0.0) : std::max(fwd_disc - strike_disc, 0.0);
  }
  const double d1 = (std::log(spot / strike) + (rate - dividend + 0.5 * sigma * sigma) * maturity) / vol;
  const double d2 = d1 - vol;
  if (type == OptionType::kCall) return fwd_disc * normal_cdf(d1) - strike_disc * normal_cdf(d2);
  return strike_disc * normal_cdf(-d2) - fwd_disc * normal_cdf(-d1);
}

OracleResult bermudan_1d_full(double spot, double sigma, double dividend, double strike, double rate,
                              double maturity, int steps, OptionType type, const LatticeSpec& spec) {
  validate(spot, sigma, strike, maturity, steps, spec);
  const double dt = maturity / steps;
  const double x0 = std::log(spot);
  auto [nodes, weights] = gauss_legendre_unit(spec.quadrature);
  Lattice lat{Grid(x0, spec.span * sigma * std::sqrt(maturity), spec.nodes),
              std::move(nodes),
              std::move(weights),
              (rate - dividend - 0.5 * sigma * sigma) * dt,
              sigma * std::sqrt(dt),
              std::exp(-rate * dt),
              type,
              strike};
  const Grid& grid = lat.grid;
  const int n = grid.size();

  std::vector<double> value(static_cast<std::size_t>(n));
  std::vector<double> cont(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) value[i] = exercise_value(type, strike, std::exp(grid.x(i)));

  OracleResult out;
  out.boundary.assign(static_cast<std::size_t>(std::max(steps - 1, 0)), std::numeric_limits<double>::quiet_NaN());
  // The kinked terminal payoff is integrated in closed form; later dates use quadrature.
  auto one_period = [&](double x) {
    return black_scholes_price(type, std::exp(x), strike, rate, dividend, sigma, dt);
  };
  for (int k = steps - 1; k >= 1; --k) {
    for (int i = 0; i < n; ++i) {
      cont[i] = k == steps - 1 ? one_period(grid.x(i)) : lat.continuation(value, grid.x(i));
    }
    std::vector<double> next(static_cast<std::size_t>(n));
    double boundary = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < n; ++i) {
      const double g = exercise_value(type, strike, std::exp(grid.x(i)));
      next[i] = std::max(g, cont[i]);
    }
    // Locate the sign change of g - c inside the money, closest to the strike.
    auto excess = [&](int i) {
      const double s = std::exp(grid.x(i));
      const double g = exercise_value(type, strike, s);
      return g > 0.0 ? g - cont[i] : -std::numeric_limits<double>::infinity();
    };
    if (type == OptionType::kPut) {
      for (int i = n - 2; i >= 0; --i) {
        const double e0 = excess(i);
        const double e1 = excess(i + 1);
        if (e0 > 0.0 && !(e1 > 0.0)) {
          const double frac = std::isfinite(e1) ? e0 / (e0 - e1) : 0.0;
          boundary = std::exp(grid.x(i) + frac * grid.spacing());
          break;
        }
      }
    } else {
      for (int i = 1; i < n; ++i) {
        const double e0 = excess(i - 1);
        const double e1 = excess(i);
        if (e1 > 0.0 && !(e0 > 0.0)) {
          const double frac = std::isfinite(e0) ? e1 / (e1 - e0) : 1.0;
          boundary = std::exp(grid.x(i) - frac * grid.spacing());
          break;
        }
      }
    }
    out.boundary[static_cast<std::size_t>(k - 1)] = boundary;
    value.swap(next);
  }

  // value now holds V_1 (or the terminal payoff when steps == 1).
  auto c0 = [&](double x) { return steps == 1 ? one_period(x) : lat.continuation(value, x); };
  out.continuation = c0(x0);
  const double g0 = exercise_value(type, strike, spot);
  out.price = std::max(g0, out.continuation);
  if (g0 > out.continuation) {
    out.delta = type == OptionType::kPut ? -1.0 : 1.0;
  } else {
    const double h = grid.spacing();
    out.delta = (c0(x0 + h) - c0(x0 - h)) / (2.0 * h * spot);
  }
  return out;
}

double bermudan_1d(double spot, double sigma, double dividend, double strike, double rate, double maturity,
                   int steps, OptionType type, const LatticeSpec& spec) {
  return bermudan_1d_full(spot, sigma, dividend, strike, rate, maturity, steps, type, spec).price;
}

double bermudan_1d_refinement(double spot, double sigma, double dividend, double strike, double rate,
                              double maturity, int steps, OptionType type, const LatticeSpec& spec) {
  LatticeSpec fine = spec;
  fine.nodes = 2 * spec.nodes;
  fine.quadrature = 2 * spec.quadrature;
  const double coarse = bermudan_1d(spot, sigma, dividend, strike, rate, maturity, steps, type, spec);
  const double refined = bermudan_1d(spot, sigma, dividend, strike, rate, maturity, steps, type, fine);
  return std::abs(coarse - refined) / std::max(std::abs(refined), std::numeric_limits<double>::min());
}

namespace {

OptionType geometric_type(const Payoff& payoff) {
  if (payoff.kind() == PayoffKind::kGeometricPut) return OptionType::kPut;
  if (payoff.kind() == PayoffKind::kGeometricCall) return OptionType::kCall;
  throw std::invalid_argument("geometric basket oracle needs a geometric basket payoff");
}

}  // namespace

double european_geometric_basket(const BlackScholesMarket& market, const Payoff& payoff, double maturity) {
  const OptionType type = geometric_type(payoff);
  const GeometricReduction red = reduce_geometric(market);
  return black_scholes_price(type, red.spot, payoff.strike(), market.rate(), red.dividend, red.sigma, maturity);
}

BasketOracle bermudan_geometric_basket(const BlackScholesMarket& market, const Payoff& payoff, double maturity,
                                       int steps, const LatticeSpec& spec) {
  const OptionType type = geometric_type(payoff);
  const GeometricReduction red = reduce_geometric(market);
  const OracleResult r = bermudan_1d_full(red.spot, red.sigma, red.dividend, payoff.strike(), market.rate(),
                                          maturity, steps, type, spec);
  BasketOracle out;
  out.price = r.price;
  // d(s_hat)/d(s_i) = s_hat / (d s_i).
  out.delta = (r.delta * red.spot / market.dimension()) * market.spot().cwiseInverse();
  return out;
}

}  // namespace glsm
