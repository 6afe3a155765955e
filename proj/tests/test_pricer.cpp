#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include <omp.h>

#include <Eigen/QR>

#include "glsm/basis.hpp"
#include "glsm/errors.hpp"
#include "glsm/oracle.hpp"
#include "glsm/pricer.hpp"

using namespace glsm;

namespace {

BlackScholesMarket put_market_1d() { return BlackScholesMarket::symmetric(1, 100, 0.03, 0.0, 0.2, 0.0); }

PricerOptions small_order(int p) {
  PricerOptions o;
  o.order = p;
  return o;
}

}  // namespace

TEST(ExerciseDecision, Rule) {
  EXPECT_TRUE(exercise_decision(5, 6, true));
  EXPECT_FALSE(exercise_decision(6, 5, true));
  EXPECT_FALSE(exercise_decision(5, 6, false));
  EXPECT_FALSE(exercise_decision(6, 6, true));
}

TEST(Pricer, ZeroPayoff) {
  const auto m = BlackScholesMarket::symmetric(3, 100, 0.03, 0.0, 0.2, 0.5);
  PricerOptions o = small_order(4);
  o.compute_delta = true;
  for (auto fn : {glsm_price, lsm_price}) {
    const PricingResult r = fn(m, Payoff::zero(), 0.5, 2000, 5, 1, o);
    EXPECT_EQ(r.price, 0.0);
    EXPECT_EQ(r.exercises, 0);
    EXPECT_TRUE(r.delta.isZero());
    for (const auto& s : r.steps) EXPECT_TRUE(s.coefficients.isZero());
  }
}

TEST(Pricer, RejectsTooFewPaths) {
  const auto m = BlackScholesMarket::symmetric(2, 100, 0.03, 0.0, 0.2, 0.5);
  EXPECT_THROW(glsm_price(m, Payoff(PayoffKind::kGeometricPut, 100), 1.0, 20, 4, 1), std::invalid_argument);
  const auto w = simulate_brownian(1000, 4, 1.0, 3, 1);
  EXPECT_THROW(price_on_paths(m, Payoff(PayoffKind::kGeometricPut, 100), w, {}), std::invalid_argument);
}

TEST(Pricer, ImmediateExerciseLowerBound) {
  const BlackScholesMarket m = BlackScholesMarket::symmetric(2, 60, 0.05, 0.0, 0.2, 0.5);
  const Payoff put(PayoffKind::kGeometricPut, 100);
  PricerOptions o = small_order(4);
  o.compute_delta = true;
  const PricingResult r = glsm_price(m, put, 1.0, 5000, 10, 3, o);
  EXPECT_GE(r.price, put.value(m.spot()));
  EXPECT_DOUBLE_EQ(r.price, 40.0);
  EXPECT_TRUE(r.delta.isApprox(put.gradient(m.spot())));
}

TEST(Pricer, SingleDateIsEuropean) {
  const auto m = BlackScholesMarket::symmetric(2, 100, 0.03, 0.0, 0.2, 0.5);
  const Payoff put(PayoffKind::kGeometricPut, 100);
  const PricingResult r = glsm_price(m, put, 0.25, 20000, 1, 4, small_order(4));
  EXPECT_TRUE(r.steps.empty());
  EXPECT_DOUBLE_EQ(r.price, std::max(r.european, 0.0));
  EXPECT_LE(std::abs(r.price - european_geometric_basket(m, put, 0.25)), 3 * r.standard_error);
}

TEST(Pricer, StoppingTimesOnGridAndAboveEuropean) {
  const auto m = BlackScholesMarket::symmetric(2, 100, 0.03, 0.0, 0.2, 0.5);
  const PricingResult r = glsm_price(m, Payoff(PayoffKind::kGeometricPut, 100), 0.25, 20000, 10, 5, small_order(6));
  for (Index i = 0; i < r.stopping_times.size(); ++i) {
    const double k = r.stopping_times(i) / 0.025;
    EXPECT_NEAR(k, std::round(k), 1e-9);
    EXPECT_GE(std::round(k), 1.0);
    EXPECT_LE(std::round(k), 10.0);
  }
  EXPECT_GE(r.price, r.european - 3 * r.standard_error);
  EXPECT_EQ(r.steps.size(), 9u);
  EXPECT_EQ(r.steps.front().step, 9);
  EXPECT_EQ(r.basis_size, build_index_set(2, 6).size());
}

TEST(Pricer, DeterministicAcrossThreadCounts) {
  const auto m = BlackScholesMarket::symmetric(3, 100, 0.03, 0.0, 0.2, 0.5);
  const Payoff put(PayoffKind::kGeometricPut, 100);
  PricerOptions o = small_order(6);
  o.compute_delta = true;
  o.block_rows = 300;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const PricingResult a = glsm_price(m, put, 0.25, 30000, 6, 8, o);
  omp_set_num_threads(4);
  const PricingResult b = glsm_price(m, put, 0.25, 30000, 6, 8, o);
  omp_set_num_threads(saved);
  EXPECT_EQ(a.price, b.price);
  EXPECT_TRUE((a.delta.array() == b.delta.array()).all());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_TRUE((a.steps[i].coefficients.array() == b.steps[i].coefficients.array()).all());
  }
}

TEST(Pricer, MatrixFreeRouteAgrees) {
  const auto m = BlackScholesMarket::symmetric(2, 100, 0.03, 0.0, 0.2, 0.5);
  const Payoff put(PayoffKind::kGeometricPut, 100);
  const auto w = simulate_brownian(20000, 5, 0.25, 2, 12);
  PricerOptions gram = small_order(6);
  PricerOptions free = gram;
  free.solver.gram_limit = 0;
  const PricingResult a = price_on_paths(m, put, w, gram);
  const PricingResult b = price_on_paths(m, put, w, free);
  EXPECT_NEAR(a.price, b.price, 1e-8);
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_LE((a.steps[i].coefficients - b.steps[i].coefficients).norm(), 1e-6 * a.steps[i].coefficients.norm());
  }
}

TEST(Pricer, PairedRunsSharePaths) {
  const auto m = BlackScholesMarket::symmetric(3, 100, 0.03, 0.0, 0.2, 0.5);
  const Payoff put(PayoffKind::kGeometricPut, 100);
  const PricingResult g = glsm_price(m, put, 0.25, 10000, 5, 21, small_order(4));
  const PricingResult l = lsm_price(m, put, 0.25, 10000, 5, 21, small_order(4));
  EXPECT_EQ(g.european, l.european);
  EXPECT_EQ(g.basis_size, l.basis_size);
  const PricingResult other = lsm_price(m, put, 0.25, 10000, 5, 22, small_order(4));
  EXPECT_NE(other.european, l.european);
}

TEST(Pricer, Example1OneDimensional) {
  const PricingResult r = glsm_price(put_market_1d(), Payoff(PayoffKind::kPut1d, 100), 0.25, 100000, 50, 1);
  const double ref = bermudan_1d(100, 0.2, 0.0, 100, 0.03, 0.25, 50, OptionType::kPut);
  EXPECT_EQ(r.basis_size, 11);
  EXPECT_LE(std::abs(r.price - ref), std::max(4 * r.standard_error, 0.01 * ref));
}

TEST(Delta, AtZeroMatchesReducedOls) {
  const auto m = BlackScholesMarket::symmetric(3, 100, 0.0, 0.02, 0.25, 0.75);
  const IndexSet set = build_index_set(3, 6);
  const auto w = simulate_brownian(5000, 2, 0.2, 3, 31);
  const Eigen::VectorXd u = (1.0 + w.at(1).col(0).array() * 0.5 - w.at(1).col(2).array().square()).matrix();
  const Eigen::VectorXd delta = delta_at_zero(w.at(1), u, set, m, 0.1);

  Eigen::MatrixXd x(5000, 4);
  x.col(0).setOnes();
  x.rightCols(3) = w.at(1);
  const Eigen::VectorXd gamma = x.colPivHouseholderQr().solve(u);
  const Eigen::VectorXd expected = inverse_jacobian(m, m.spot()).transpose() * gamma.tail(3);
  EXPECT_LE((delta - expected).norm(), 1e-10 * expected.norm());
}

TEST(Delta, AtZeroMatchesFullMatrixSolve) {
  const auto m = BlackScholesMarket::symmetric(2, 100, 0.03, 0.0, 0.2, 0.5);
  const IndexSet set = build_index_set(2, 5);
  const double dt = 0.05;
  const auto w = simulate_brownian(3000, 2, 2 * dt, 2, 41);
  const Eigen::VectorXd u = w.at(1).col(1).array().exp().matrix();
  // Full rank-deficient system: rows phi(0) + grad phi(0) . W_1.
  const Eigen::MatrixXd origin = Eigen::MatrixXd::Zero(3000, 2);
  const Eigen::MatrixXd a = assemble_regression_matrix(eval_basis_matrix(origin, dt, set), w.at(1), set);
  const Eigen::VectorXd beta = a.completeOrthogonalDecomposition().solve(u);
  const Eigen::MatrixXd phi0 = eval_basis_matrix(Eigen::MatrixXd::Zero(1, 2), dt, set).values;
  const Eigen::VectorXd grad = eval_gradient(beta, set, phi0.row(0).transpose(), dt);
  const Eigen::VectorXd expected = inverse_jacobian(m, m.spot()).transpose() * grad;
  const Eigen::VectorXd delta = delta_at_zero(w.at(1), u, set, m, dt);
  EXPECT_LE((delta - expected).norm(), 1e-8 * expected.norm());
}

TEST(Delta, ZeroPayoffAndConstant) {
  const auto m = BlackScholesMarket::symmetric(2, 100, 0.03, 0.0, 0.2, 0.5);
  const IndexSet set = build_index_set(2, 4);
  const auto w = simulate_brownian(1000, 2, 0.1, 2, 1);
  EXPECT_TRUE(delta_at_zero(w.at(1), Eigen::VectorXd::Zero(1000), set, m, 0.05).isZero());
  EXPECT_LE(delta_at_zero(w.at(1), Eigen::VectorXd::Constant(1000, 3.0), set, m, 0.05).norm(), 1e-12);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(set.size());
  beta(0) = 2.0;
  const Eigen::MatrixXd states = Eigen::MatrixXd::Constant(3, 2, 120.0);
  const StepDelta sd = delta_at_step(1, 0.05, beta, set, m, Payoff(PayoffKind::kGeometricPut, 100), states);
  EXPECT_TRUE(sd.delta.isZero());
}

TEST(Delta, AtStepMatchesFiniteDifferences) {
  const auto m = BlackScholesMarket::symmetric(2, 100, 0.03, 0.01, 0.2, 0.4);
  const IndexSet set = build_index_set(2, 6);
  const double t = 0.3;
  Eigen::VectorXd beta(set.size());
  for (Index n = 0; n < set.size(); ++n) beta(n) = 0.5 / (1.0 + n);
  beta(0) = 50.0;  // keeps the continuation above the payoff
  const Payoff put(PayoffKind::kGeometricPut, 100);
  Eigen::MatrixXd states(3, 2);
  states << 100, 105, 95, 110, 120, 90;
  const StepDelta sd = delta_at_step(2, t, beta, set, m, put, states);
  auto fitted = [&](const Eigen::MatrixXd& s) {
    return std::exp(m.rate() * t) *
           eval_basis_matrix(brownian_from_prices(s, t, m), t, set).values.row(0).dot(beta);
  };
  for (Index q = 0; q < 3; ++q) {
    EXPECT_FALSE(sd.exercise_region[static_cast<std::size_t>(q)]);
    for (int j = 0; j < 2; ++j) {
      Eigen::MatrixXd up = states.row(q), dn = states.row(q);
      const double h = 1e-5 * states(q, j);
      up(0, j) += h;
      dn(0, j) -= h;
      const double fd = (fitted(up) - fitted(dn)) / (2 * h);
      EXPECT_NEAR(sd.delta(q, j), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Delta, ExerciseRegionReturnsPayoffGradient) {
  const auto m = BlackScholesMarket::symmetric(1, 100, 0.03, 0.0, 0.2, 0.0);
  const IndexSet set = build_index_set(1, 3);
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(set.size());
  const Eigen::MatrixXd states = Eigen::MatrixXd::Constant(1, 1, 80.0);
  const StepDelta sd = delta_at_step(1, 0.1, beta, set, m, Payoff(PayoffKind::kPut1d, 100), states);
  EXPECT_TRUE(sd.exercise_region[0]);
  EXPECT_DOUBLE_EQ(sd.delta(0, 0), -1.0);
}

TEST(Delta, OneDimensionalOutOfTheMoney) {
  const auto m = put_market_1d();
  const auto w = simulate_brownian(100000, 50, 0.25, 1, 5);
  const PricingResult r = price_on_paths(m, Payoff(PayoffKind::kPut1d, 100), w, PricerOptions{});
  const auto s = std::find_if(r.steps.begin(), r.steps.end(), [](const StepSolution& x) { return x.step == 10; });
  ASSERT_NE(s, r.steps.end());
  const StepDelta sd = delta_at_step(s->step, s->time, s->coefficients, build_index_set(1, 10), m,
                                     Payoff(PayoffKind::kPut1d, 100), Eigen::MatrixXd::Constant(1, 1, 110.0));
  const double rest = 0.25 - s->time;
  const double oracle = (bermudan_1d(110.0 + 0.01, 0.2, 0.0, 100, 0.03, rest, 40, OptionType::kPut) -
                         bermudan_1d(110.0 - 0.01, 0.2, 0.0, 100, 0.03, rest, 40, OptionType::kPut)) /
                        0.02;
  EXPECT_FALSE(sd.exercise_region[0]);
  EXPECT_NEAR(sd.delta(0, 0), oracle, 0.01);
}

TEST(Classification, MatchesOneDimensionalBoundary) {
  const auto m = put_market_1d();
  const Payoff put(PayoffKind::kPut1d, 100);
  PricerOptions o;
  // Near maturity the polynomial fit of the kinked value leaves many indifferent paths
  // misclassified; the comparison uses dates away from expiry.
  o.classify_steps = {10, 19};
  const PricingResult r = glsm_price(m, put, 0.25, 100000, 50, 7, o);
  const OracleResult oracle = bermudan_1d_full(100, 0.2, 0.0, 100, 0.03, 0.25, 50, OptionType::kPut);
  ASSERT_EQ(r.classification.size(), 2u);
  for (const auto& rec : r.classification) {
    const double b = oracle.boundary[static_cast<std::size_t>(rec.step - 1)];
    long long itm = 0, wrong = 0;
    for (Index i = 0; i < rec.states.rows(); ++i) {
      if (!(rec.payoff(i) > 0.0)) {
        EXPECT_FALSE(rec.exercised[static_cast<std::size_t>(i)]);
        continue;
      }
      ++itm;
      const bool truth = rec.states(i, 0) < b;
      if (truth != static_cast<bool>(rec.exercised[static_cast<std::size_t>(i)])) ++wrong;
    }
    EXPECT_LE(static_cast<double>(wrong), 0.02 * static_cast<double>(itm)) << "step " << rec.step;
  }
  // The stand-alone classifier reproduces the in-sweep decisions.
  const auto w = simulate_brownian(100000, 50, 0.25, 1, 7);
  for (const auto& s : r.steps) {
    if (s.step != 10) continue;
    const ClassificationRecord again = classify_exercise(10, s.coefficients, build_index_set(1, 10), w, m, put);
    EXPECT_EQ(again.exercised, r.classification[1].exercised);
    EXPECT_TRUE(again.continuation.isApprox(r.classification[1].continuation, 1e-13));
  }
}

TEST(Classification, CsvLayout) {
  ClassificationRecord rec;
  rec.step = 4;
  rec.states = Eigen::MatrixXd::Constant(1, 3, 100.0);
  rec.payoff = Eigen::VectorXd::Zero(1);
  rec.continuation = Eigen::VectorXd::Constant(1, 1.5);
  rec.exercised = {0};
  std::ostringstream out;
  write_classification_csv(out, rec, Payoff(PayoffKind::kMaxCall, 100));
  EXPECT_EQ(out.str(), "step,geometric_mean,max,payoff,continuation,exercised\n4,100,100,0,1.5,0\n");
  ClassificationRecord empty;
  empty.states.resize(0, 2);
  std::ostringstream e;
  write_classification_csv(e, empty, Payoff(PayoffKind::kMaxCall, 100));
  EXPECT_EQ(e.str(), "step,s1,s2,payoff,continuation,exercised\n");
}

TEST(Chebyshev, TablesMatchTrigonometricForm) {
  Eigen::VectorXd x(4);
  x << -1.0, -0.3, 0.4, 0.95;
  const Eigen::MatrixXd t = chebyshev_table(x, 8);
  const Eigen::MatrixXd dt = chebyshev_derivative_table(x, 8);
  for (Index i = 0; i < 4; ++i) {
    for (int n = 0; n <= 8; ++n) {
      EXPECT_NEAR(t(i, n), std::cos(n * std::acos(x(i))), 1e-13);
      if (i > 0) EXPECT_NEAR(dt(i, n), n * std::sin(n * std::acos(x(i))) / std::sqrt(1 - x(i) * x(i)), 1e-10);
    }
  }
  EXPECT_NEAR(dt(0, 3), 9.0, 1e-12);  // T_n'(-1) = (-1)^{n+1} n^2
}

TEST(Heston, IndexSetSize) {
  EXPECT_EQ(heston_index_set({}).size(), 70);
  EXPECT_EQ(heston_index_set({}).dimension(), 2);
}

TEST(Heston, DegenerateLimitMatchesOracle) {
  const HestonMarket p{10, 0.0625, 0.1, 0.1, 1e-10, 0.0625, 1e-10};
  HestonOptions o;
  o.price_order = 10;
  o.logvar_order = 10;
  o.order = 10;
  const PricingResult r = glsm_price_heston(p, Payoff(PayoffKind::kPut1d, 10), 0.25, 50000, 20, 3, o);
  const double ref = bermudan_1d(10, 0.25, 0.0, 10, 0.1, 0.25, 20, OptionType::kPut);
  EXPECT_NEAR(r.price, ref, 0.01 * ref);
}

TEST(Heston, SharedPathsAcrossSpots) {
  const HestonMarket p{10, 0.0625, 0.1, 0.1, 5, 0.16, 0.9};
  HestonOptions o;
  o.order = 6;
  o.price_order = 6;
  o.logvar_order = 6;
  const auto many = glsm_price_heston_spots(p, {9.0, 10.0}, Payoff(PayoffKind::kPut1d, 10), 0.25, 5000, 10, 4, o);
  ASSERT_EQ(many.size(), 2u);
  EXPECT_GT(many[0].price, many[1].price);
  HestonMarket nine = p;
  nine.spot = 9.0;
  const PricingResult one = glsm_price_heston(nine, Payoff(PayoffKind::kPut1d, 10), 0.25, 5000, 10, 4, o);
  EXPECT_NEAR(one.price, many[0].price, 1e-10);
}
