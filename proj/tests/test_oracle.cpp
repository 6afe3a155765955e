#include <cmath>

#include <gtest/gtest.h>

#include "glsm/market.hpp"
#include "glsm/oracle.hpp"
#include "glsm/payoff.hpp"

using namespace glsm;

namespace {

// Example 1: geometric basket put, K = 100, T = 0.25, r = 0.03, sigma = 0.2, rho = 0.5, N = 50.
double example1(int d) {
  const auto m = BlackScholesMarket::symmetric(d, 100, 0.03, 0.0, 0.2, 0.5);
  return bermudan_geometric_basket(m, Payoff(PayoffKind::kGeometricPut, 100), 0.25, 50).price;
}

}  // namespace

TEST(GaussHermite, Moments) {
  const auto [x, w] = gauss_hermite(20);
  EXPECT_NEAR(w.sum(), 1.0, 1e-14);
  EXPECT_NEAR(w.dot(x), 0.0, 1e-14);
  EXPECT_NEAR(w.dot(x.cwiseAbs2()), 1.0, 1e-13);
  EXPECT_NEAR(w.dot(x.array().pow(4).matrix()), 3.0, 1e-12);
  EXPECT_NEAR(w.dot(x.array().exp().matrix()), std::exp(0.5), 1e-13);
}

TEST(BlackScholes, ParityAndLimits) {
  const double c = black_scholes_price(OptionType::kCall, 100, 95, 0.03, 0.01, 0.25, 0.7);
  const double p = black_scholes_price(OptionType::kPut, 100, 95, 0.03, 0.01, 0.25, 0.7);
  EXPECT_NEAR(c - p, 100 * std::exp(-0.01 * 0.7) - 95 * std::exp(-0.03 * 0.7), 1e-12);
  EXPECT_NEAR(black_scholes_price(OptionType::kPut, 100, 100, 0.05, 0.0, 0.2, 1.0), 5.573526, 1e-6);
}

TEST(Bermudan1d, SingleDateIsEuropean) {
  for (auto type : {OptionType::kPut, OptionType::kCall}) {
    const double bs = black_scholes_price(type, 100, 105, 0.03, 0.02, 0.3, 0.5);
    EXPECT_NEAR(bermudan_1d(100, 0.3, 0.02, 105, 0.03, 0.5, 1, type), bs, 1e-6);
  }
}

TEST(Bermudan1d, Example1Reference) {
  const OracleResult r = bermudan_1d_full(100, 0.2, 0.0, 100, 0.03, 0.25, 50, OptionType::kPut);
  EXPECT_NEAR(r.price, 3.6658, 0.001 * 3.6658);
  EXPECT_NEAR(example1(1), r.price, 1e-12);
  EXPECT_EQ(r.boundary.size(), 49u);
  // The put boundary rises towards the strike as maturity approaches.
  EXPECT_LT(r.boundary[0], r.boundary[48]);
  EXPECT_LT(r.boundary[48], 100.0);
  EXPECT_LT(r.delta, 0.0);
  EXPECT_GT(r.delta, -1.0);
}

TEST(Bermudan1d, Example1TabulatedReferences) {
  EXPECT_NEAR(example1(2), 3.1831, 0.001 * 3.1831);
  EXPECT_NEAR(example1(3), 3.0029, 0.001 * 3.0029);
  EXPECT_NEAR(example1(5), 2.8499, 0.001 * 2.8499);
  EXPECT_NEAR(example1(10), 2.7290, 0.001 * 2.7290);
  EXPECT_NEAR(example1(15), 2.6874, 0.001 * 2.6874);
  EXPECT_NEAR(example1(20), 2.6664, 0.001 * 2.6664);
}

TEST(Bermudan1d, RefinementConverged) {
  EXPECT_LT(bermudan_1d_refinement(100, 0.2, 0.0, 100, 0.03, 0.25, 50, OptionType::kPut), 1e-5);
  EXPECT_LT(bermudan_1d_refinement(100, 0.25, 0.02, 110, 0.0, 1.0, 20, OptionType::kCall), 1e-5);
}

TEST(Bermudan1d, ExerciseRightsOrdering) {
  const double european = black_scholes_price(OptionType::kPut, 100, 100, 0.03, 0.0, 0.2, 0.25);
  double last = european;
  for (int n : {1, 2, 5, 10, 25, 50}) {
    const double v = bermudan_1d(100, 0.2, 0.0, 100, 0.03, 0.25, n, OptionType::kPut);
    EXPECT_GE(v, last - 1e-7) << n;
    last = v;
  }
  EXPECT_GT(last, european + 1e-3);
}

TEST(Bermudan1d, DeepInTheMoneyExercisesImmediately) {
  const OracleResult r = bermudan_1d_full(40, 0.2, 0.0, 100, 0.05, 1.0, 10, OptionType::kPut);
  EXPECT_DOUBLE_EQ(r.price, 60.0);
  EXPECT_DOUBLE_EQ(r.delta, -1.0);
}

TEST(Bermudan1d, DeltaMatchesBumpAndReprice) {
  const double h = 0.01;
  const double up = bermudan_1d(100 + h, 0.2, 0.0, 100, 0.03, 0.25, 50, OptionType::kPut);
  const double dn = bermudan_1d(100 - h, 0.2, 0.0, 100, 0.03, 0.25, 50, OptionType::kPut);
  const double delta = bermudan_1d_full(100, 0.2, 0.0, 100, 0.03, 0.25, 50, OptionType::kPut).delta;
  EXPECT_NEAR(delta, (up - dn) / (2 * h), 1e-3);
}

TEST(Bermudan1d, RejectsCoarseLattice) {
  LatticeSpec spec;
  spec.nodes = 256;
  EXPECT_THROW(bermudan_1d(100, 0.2, 0.0, 100, 0.03, 0.25, 5, OptionType::kPut, spec), std::invalid_argument);
  spec = {};
  spec.span = 6;
  EXPECT_THROW(bermudan_1d(100, 0.2, 0.0, 100, 0.03, 0.25, 5, OptionType::kPut, spec), std::invalid_argument);
  EXPECT_THROW(bermudan_1d(100, 0.2, 0.0, 100, 0.03, 0.25, 0, OptionType::kPut), std::invalid_argument);
}

TEST(GeometricBasket, EuropeanLimits) {
  const auto m = BlackScholesMarket::symmetric(4, 100, 0.03, 0.01, 0.2, 0.5);
  const auto red = reduce_geometric(m);
  const double fwd = european_geometric_basket(m, Payoff(PayoffKind::kGeometricCall, 1e-8), 1.0);
  EXPECT_NEAR(fwd, red.spot * std::exp(-red.dividend * 1.0), 1e-6);

  const auto flat = BlackScholesMarket::symmetric(3, 90, 0.03, 0.0, 1e-9, 0.5);
  const double put = european_geometric_basket(flat, Payoff(PayoffKind::kGeometricPut, 100), 0.5);
  EXPECT_NEAR(put, std::exp(-0.03 * 0.5) * std::max(100 - 90 * std::exp(0.03 * 0.5), 0.0), 1e-6);
  EXPECT_THROW(european_geometric_basket(m, Payoff(PayoffKind::kMaxCall, 100), 1.0), std::invalid_argument);
}

TEST(GeometricBasket, EuropeanMatchesMonteCarlo) {
  const auto m = BlackScholesMarket::symmetric(5, 100, 0.03, 0.0, 0.2, 0.5);
  const Payoff put(PayoffKind::kGeometricPut, 100);
  const Index n = 100000;
  const auto w = simulate_brownian(n, 1, 0.25, 5, 2024);
  const Eigen::ArrayXd v = std::exp(-0.03 * 0.25) * put.values(prices_from_brownian(w.at(1), 0.25, m)).array();
  const double mean = v.mean();
  const double se = std::sqrt((v - mean).square().sum() / (n - 1) / n);
  EXPECT_LE(std::abs(mean - european_geometric_basket(m, put, 0.25)), 3 * se);
}

TEST(GeometricBasket, Example2Delta) {
  // Geometric basket call, K = 100, T = 2, r = 0, delta = 0.02, sigma = 0.25, rho = 0.75, N = 50.
  const auto m7 = BlackScholesMarket::symmetric(7, 100, 0.0, 0.02, 0.25, 0.75);
  const auto r7 = bermudan_geometric_basket(m7, Payoff(PayoffKind::kGeometricCall, 100), 2.0, 50);
  EXPECT_NEAR(r7.delta(0), 0.0722, 0.001);
  EXPECT_NEAR(r7.delta(6), r7.delta(0), 1e-15);
  const auto m13 = BlackScholesMarket::symmetric(13, 100, 0.0, 0.02, 0.25, 0.75);
  EXPECT_NEAR(bermudan_geometric_basket(m13, Payoff(PayoffKind::kGeometricCall, 100), 2.0, 50).delta(0), 0.0387,
              0.001);
}
