#include "glsm/market.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <istream>
#include <limits>
#include <new>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "glsm/random.hpp"

namespace glsm {

namespace {

constexpr double kSymmetryTolerance = 1e-12;
constexpr double kEigenClamp = 1e-12;

void write_i64(std::ostream& out, std::int64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits = 0;
  static_assert(sizeof bits == sizeof v);
  std::memcpy(&bits, &v, sizeof v);
  write_i64(out, static_cast<std::int64_t>(bits));
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("read_paths: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

SpectralFactors decompose(double rate, const Eigen::VectorXd& dividends, const Eigen::VectorXd& sigma,
                          const Eigen::MatrixXd& correlation) {
  const Index d = sigma.size();
  if (d < 1 || correlation.rows() != d || correlation.cols() != d || dividends.size() != d) {
    throw std::invalid_argument("decompose: dimension mismatch");
  }
  if ((correlation - correlation.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    throw std::invalid_argument("decompose: correlation matrix is not symmetric");
  }
  if ((correlation.diagonal().array() - 1.0).abs().maxCoeff() > kSymmetryTolerance) {
    throw std::invalid_argument("decompose: correlation matrix must have unit diagonal");
  }
  if ((sigma.array() <= 0.0).any()) throw std::invalid_argument("decompose: volatilities must be positive");

  const Eigen::MatrixXd cov = sigma.asDiagonal() * correlation * sigma.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("decompose: eigendecomposition failed");

  SpectralFactors f;
  f.eigenvalues = eig.eigenvalues().reverse();
  f.rotation = eig.eigenvectors().rowwise().reverse();
  const double scale = std::max(f.eigenvalues(0), 0.0);
  for (Index i = 0; i < d; ++i) {
    if (f.eigenvalues(i) < -kEigenClamp * scale) {
      throw std::invalid_argument("decompose: correlation matrix is not positive semi-definite");
    }
    f.eigenvalues(i) = std::max(f.eigenvalues(i), 0.0);
    // Fix the sign so that the largest-magnitude entry of each column is positive.
    Index arg = 0;
    f.rotation.col(i).cwiseAbs().maxCoeff(&arg);
    if (f.rotation(arg, i) < 0.0) f.rotation.col(i) *= -1.0;
  }
  const Eigen::VectorXd drift =
      Eigen::VectorXd::Constant(d, rate) - dividends - 0.5 * sigma.cwiseAbs2();
  f.drift = f.rotation.transpose() * drift;
  return f;
}

BlackScholesMarket::BlackScholesMarket(Eigen::VectorXd spot, double rate, Eigen::VectorXd dividends,
                                       Eigen::VectorXd sigma, Eigen::MatrixXd correlation)
    : spot_(std::move(spot)),
      rate_(rate),
      dividends_(std::move(dividends)),
      sigma_(std::move(sigma)),
      correlation_(std::move(correlation)) {
  if (spot_.size() != sigma_.size()) throw std::invalid_argument("BlackScholesMarket: dimension mismatch");
  if ((spot_.array() <= 0.0).any()) throw std::invalid_argument("BlackScholesMarket: spot must be positive");
  if (!std::isfinite(rate_)) throw std::invalid_argument("BlackScholesMarket: rate must be finite");
  factors_ = decompose(rate_, dividends_, sigma_, correlation_);
}

BlackScholesMarket BlackScholesMarket::symmetric(int dimension, double spot, double rate, double dividend,
                                                 double sigma, double correlation) {
  if (dimension < 1) throw std::invalid_argument("BlackScholesMarket: dimension must be >= 1");
  Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(dimension, dimension, correlation);
  corr.diagonal().setOnes();
  return BlackScholesMarket(Eigen::VectorXd::Constant(dimension, spot), rate,
                            Eigen::VectorXd::Constant(dimension, dividend),
                            Eigen::VectorXd::Constant(dimension, sigma), corr);
}

BlackScholesMarket BlackScholesMarket::with_spot(Eigen::VectorXd spot) const {
  BlackScholesMarket copy = *this;
  if (spot.size() != spot_.size() || (spot.array() <= 0.0).any()) {
    throw std::invalid_argument("BlackScholesMarket::with_spot: invalid spot");
  }
  copy.spot_ = std::move(spot);
  return copy;
}

Eigen::MatrixXd prices_from_brownian(const Eigen::Ref<const Eigen::MatrixXd>& brownian, double t,
                                     const BlackScholesMarket& market) {
  const auto& f = market.factors();
  if (brownian.cols() != market.dimension()) {
    throw std::invalid_argument("prices_from_brownian: dimension mismatch");
  }
  // rows: (mu t + sqrt(Lambda) w)^T Q^T
  Eigen::MatrixXd rotated = brownian * f.eigenvalues.cwiseSqrt().asDiagonal();
  rotated.rowwise() += (t * f.drift).transpose();
  Eigen::MatrixXd log_growth = rotated * f.rotation.transpose();
  Eigen::MatrixXd s = log_growth.array().exp().matrix();
  return s * market.spot().asDiagonal();
}

Eigen::MatrixXd brownian_from_prices(const Eigen::Ref<const Eigen::MatrixXd>& prices, double t,
                                     const BlackScholesMarket& market) {
  const auto& f = market.factors();
  if ((f.eigenvalues.array() <= 0.0).any()) {
    throw DegenerateModelError("brownian_from_prices: zero eigenvalue in the covariance");
  }
  Eigen::MatrixXd logs = (prices * market.spot().cwiseInverse().asDiagonal()).array().log().matrix();
  Eigen::MatrixXd rotated = logs * f.rotation;
  rotated.rowwise() -= (t * f.drift).transpose();
  return rotated * f.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
}

Eigen::MatrixXd inverse_jacobian(const BlackScholesMarket& market, const Eigen::VectorXd& s) {
  const auto& f = market.factors();
  if (s.size() != market.dimension() || (s.array() <= 0.0).any()) {
    throw std::invalid_argument("inverse_jacobian: prices must be positive");
  }
  if ((f.eigenvalues.array() <= 0.0).any()) {
    throw DegenerateModelError("inverse_jacobian: zero eigenvalue in the covariance");
  }
  Eigen::MatrixXd j = f.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() * f.rotation.transpose();
  return j * s.cwiseInverse().asDiagonal();
}

Eigen::MatrixXd forward_jacobian(const BlackScholesMarket& market, const Eigen::VectorXd& s) {
  const auto& f = market.factors();
  return s.asDiagonal() * f.rotation * f.eigenvalues.cwiseSqrt().asDiagonal();
}

BrownianPaths::BrownianPaths(Index paths, int steps, int dimension, double horizon, std::uint64_t seed)
    : paths_(paths), steps_(steps), dimension_(dimension), horizon_(horizon), seed_(seed) {
  if (paths < 1 || steps < 1 || dimension < 1) {
    throw std::invalid_argument("BrownianPaths: M, N and d must be >= 1");
  }
  if (!(horizon > 0.0)) throw std::invalid_argument("BrownianPaths: horizon must be positive");
  try {
    values_.assign(static_cast<std::size_t>(steps) + 1, Eigen::MatrixXd::Zero(paths, dimension));
  } catch (const std::bad_alloc&) {
    std::ostringstream msg;
    msg << "BrownianPaths: cannot allocate " << brownian_memory_bytes(paths, steps, dimension) / 1e9
        << " GB for " << paths << " x " << steps + 1 << " x " << dimension << " samples";
    throw std::length_error(msg.str());
  }
}

double brownian_memory_bytes(Index paths, int steps, int dimension) {
  return 8.0 * static_cast<double>(paths) * (steps + 1.0) * dimension;
}

BrownianPaths simulate_brownian(Index paths, int steps, double horizon, int dimension, std::uint64_t seed) {
  if (paths > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("simulate_brownian: too many paths for the counter layout");
  }
  BrownianPaths w(paths, steps, dimension, horizon, seed);
  const double sd = std::sqrt(w.dt());
  const int pairs = (dimension + 1) / 2;

#pragma omp parallel for schedule(static)
  for (Index m = 0; m < paths; ++m) {
    for (int k = 0; k < steps; ++k) {
      const Eigen::MatrixXd& prev = w.at(k);
      Eigen::MatrixXd& next = w.at(k + 1);
      for (int q = 0; q < pairs; ++q) {
        const auto z = normal_pair(seed, Stream::kBrownian, static_cast<std::uint32_t>(m),
                                   static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(q));
        const int j0 = 2 * q;
        next(m, j0) = prev(m, j0) + sd * z[0];
        if (j0 + 1 < dimension) next(m, j0 + 1) = prev(m, j0 + 1) + sd * z[1];
      }
    }
  }
  return w;
}

void write_paths(std::ostream& out, const BrownianPaths& paths) {
  write_i64(out, static_cast<std::int64_t>(paths.paths()));
  write_i64(out, paths.steps());
  write_i64(out, paths.dimension());
  write_i64(out, static_cast<std::int64_t>(paths.seed()));
  for (Index m = 0; m < paths.paths(); ++m) {
    for (int k = 0; k <= paths.steps(); ++k) {
      for (int j = 0; j < paths.dimension(); ++j) write_f64(out, paths(m, k, j));
    }
  }
}

BrownianPaths read_paths(std::istream& in) {
  const auto m = static_cast<Index>(read_u64(in));
  const auto n = static_cast<int>(read_u64(in));
  const auto d = static_cast<int>(read_u64(in));
  const auto seed = read_u64(in);
  // The horizon is not stored; callers rescale time themselves. Unit horizon keeps dt = 1/N.
  BrownianPaths w(m, n, d, 1.0, seed);
  for (Index i = 0; i < m; ++i) {
    for (int k = 0; k <= n; ++k) {
      for (int j = 0; j < d; ++j) {
        const std::uint64_t bits = read_u64(in);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        w.at(k)(i, j) = v;
      }
    }
  }
  return w;
}

void HestonMarket::validate() const {
  if (!(spot > 0.0)) throw std::invalid_argument("HestonMarket: spot must be positive");
  if (!(v0 > 0.0)) throw std::invalid_argument("HestonMarket: v0 must be positive");
  if (!(kappa > 0.0)) throw std::invalid_argument("HestonMarket: kappa must be positive");
  if (!(theta > 0.0)) throw std::invalid_argument("HestonMarket: theta must be positive");
  if (!(nu > 0.0)) throw std::invalid_argument("HestonMarket: nu must be positive");
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("HestonMarket: |rho| must be < 1");
  if (!std::isfinite(rate)) throw std::invalid_argument("HestonMarket: rate must be finite");
}

HestonPaths simulate_heston(Index paths, int steps, double horizon, const HestonMarket& params,
                            std::uint64_t seed, int substeps) {
  params.validate();
  if (paths < 1 || steps < 1 || substeps < 1) {
    throw std::invalid_argument("simulate_heston: M, N and substeps must be >= 1");
  }
  if (!(horizon > 0.0)) throw std::invalid_argument("simulate_heston: horizon must be positive");
  HestonPaths out;
  out.paths = paths;
  out.steps = steps;
  out.horizon = horizon;
  out.seed = seed;
  out.state.assign(static_cast<std::size_t>(steps) + 1, Eigen::MatrixXd::Zero(paths, 2));
  out.increments.assign(static_cast<std::size_t>(steps), Eigen::MatrixXd::Zero(paths, 2));

  const double h = horizon / (static_cast<double>(steps) * substeps);
  const double sqrt_h = std::sqrt(h);
  const double rho_bar = std::sqrt(1.0 - params.rho * params.rho);
  long long truncations = 0;
  long long floor_hits = 0;

#pragma omp parallel for schedule(static) reduction(+ : truncations, floor_hits)
  for (Index m = 0; m < paths; ++m) {
    double x = 0.0;
    double v = params.v0;
    out.state[0](m, 0) = 0.0;
    out.state[0](m, 1) = std::log(params.v0);
    for (int k = 0; k < steps; ++k) {
      double dw1 = 0.0;
      double dw2 = 0.0;
      for (int s = 0; s < substeps; ++s) {
        const auto z = normal_pair(seed, Stream::kHeston, static_cast<std::uint32_t>(m),
                                   static_cast<std::uint32_t>(k * substeps + s), 0u);
        const double e1 = sqrt_h * z[0];
        const double e2 = sqrt_h * z[1];
        const double vp = std::max(v, 0.0);
        if (v < 0.0) ++truncations;
        const double sv = std::sqrt(vp);
        x += (params.rate - 0.5 * vp) * h + sv * (params.rho * e1 + rho_bar * e2);
        v += params.kappa * (params.theta - vp) * h + params.nu * sv * e1;
        dw1 += e1;
        dw2 += e2;
      }
      if (v < kVarianceFloor) ++floor_hits;
      out.state[static_cast<std::size_t>(k) + 1](m, 0) = x;
      out.state[static_cast<std::size_t>(k) + 1](m, 1) = std::log(std::max(v, kVarianceFloor));
      out.increments[static_cast<std::size_t>(k)](m, 0) = dw1;
      out.increments[static_cast<std::size_t>(k)](m, 1) = dw2;
    }
  }
  out.truncations = truncations;
  out.floor_hits = floor_hits;
  return out;
}

}  // namespace glsm
