#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include <Eigen/QR>

#include "glsm/basis.hpp"
#include "glsm/regression.hpp"

using namespace glsm;

namespace {

Eigen::MatrixXd gaussian(Index rows, Index cols, unsigned seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, scale);
  Eigen::MatrixXd a(rows, cols);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = dist(gen);
  return a;
}

// A_k on synthetic W_k ~ N(0, k dt), dW ~ N(0, dt).
Eigen::MatrixXd step_matrix(const IndexSet& set, int k, double dt, Index rows, unsigned seed) {
  const double t = k * dt;
  const Eigen::MatrixXd w = gaussian(rows, set.dimension(), seed, std::sqrt(t));
  const Eigen::MatrixXd dw = gaussian(rows, set.dimension(), seed + 1, std::sqrt(dt));
  return assemble_regression_matrix(eval_basis_matrix(w, t, set), dw, set);
}

}  // namespace

TEST(LeastSquares, OrthonormalColumns) {
  const Eigen::MatrixXd q = gaussian(60, 8, 1).householderQr().householderQ() * Eigen::MatrixXd::Identity(60, 8);
  const Eigen::VectorXd rhs = gaussian(60, 1, 2);
  const auto sol = solve_least_squares(q, rhs);
  EXPECT_TRUE(sol.diagnostics.converged);
  EXPECT_FALSE(sol.diagnostics.fallback);
  EXPECT_LE((sol.beta - q.transpose() * rhs).norm(), 1e-10);
  EXPECT_LE(sol.diagnostics.iterations, 2);
}

TEST(LeastSquares, ConsistentSystem) {
  const Eigen::MatrixXd a = gaussian(100, 10, 3);
  const Eigen::VectorXd beta = gaussian(10, 1, 4);
  const Eigen::VectorXd rhs = a * beta;
  const auto sol = solve_least_squares(a, rhs);
  EXPECT_LE((a * sol.beta - rhs).norm() / rhs.norm(), 1e-10);
}

TEST(LeastSquares, MatchesDenseQr) {
  Eigen::MatrixXd a = gaussian(200, 20, 5);
  a.col(3) *= 30.0;  // mild column scaling
  const Eigen::VectorXd rhs = gaussian(200, 1, 6);
  const Eigen::VectorXd ref = dense_least_squares(a, rhs);
  const auto sol = solve_least_squares(a, rhs);
  EXPECT_TRUE(sol.diagnostics.converged);
  EXPECT_LE((sol.beta - ref).norm() / ref.norm(), 1e-8);

  SolverOptions free;
  free.gram_limit = 0;
  const auto mf = solve_least_squares(a, rhs, free);
  EXPECT_LE((mf.beta - ref).norm() / ref.norm(), 1e-8);
}

TEST(LeastSquares, ReSolveFromSolutionIsImmediate) {
  const Eigen::MatrixXd a = gaussian(300, 25, 7);
  const Eigen::VectorXd rhs = gaussian(300, 1, 8);
  const auto first = solve_least_squares(a, rhs);
  const auto second = solve_least_squares(a, rhs, {}, first.beta);
  EXPECT_LE(second.diagnostics.iterations, 2);
  EXPECT_LE((second.beta - first.beta).norm(), 1e-9 * first.beta.norm());
}

TEST(LeastSquares, ZeroRightHandSide) {
  const auto sol = solve_least_squares(gaussian(30, 5, 9), Eigen::VectorXd::Zero(30));
  EXPECT_TRUE(sol.beta.isZero());
  EXPECT_EQ(sol.diagnostics.iterations, 0);
}

TEST(LeastSquares, NonConvergenceFallsBack) {
  const Eigen::MatrixXd a = gaussian(200, 20, 10);
  const Eigen::VectorXd rhs = gaussian(200, 1, 11);
  SolverOptions opts;
  opts.max_iterations = 1;
  const auto sol = solve_least_squares(a, rhs, opts);
  EXPECT_TRUE(sol.diagnostics.fallback);
  EXPECT_LE((sol.beta - dense_least_squares(a, rhs)).norm(), 1e-8 * sol.beta.norm());
}

TEST(LeastSquares, RejectsBadInput) {
  EXPECT_THROW(solve_least_squares(gaussian(5, 8, 1), Eigen::VectorXd::Zero(5)), std::invalid_argument);
  EXPECT_THROW(solve_least_squares(gaussian(10, 2, 1), Eigen::VectorXd::Zero(9)), std::invalid_argument);
  Eigen::MatrixXd a = gaussian(10, 2, 1);
  a(0, 0) = std::nan("");
  EXPECT_THROW(solve_least_squares(a, Eigen::VectorXd::Zero(10)), std::invalid_argument);
}

TEST(NormalEquations, BlockedAccumulationMatchesDirect) {
  const Eigen::MatrixXd a = gaussian(1000, 12, 12);
  const Eigen::VectorXd u = gaussian(1000, 1, 13);
  NormalEquations left(12), right(12);
  left.add(a.topRows(300), u.head(300));
  left.add(a.middleRows(300, 400), u.segment(300, 400));
  right.add(a.bottomRows(300), u.tail(300));
  left.merge(right);
  EXPECT_EQ(left.rows(), 1000);
  EXPECT_LE((left.gram() - a.transpose() * a).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((left.rhs() - a.transpose() * u).cwiseAbs().maxCoeff(), 1e-9);
  const auto sol = solve_normal_equations(left);
  EXPECT_LE((sol.beta - dense_least_squares(a, u)).norm(), 1e-9);
}

TEST(Condition, TheoreticalFormula) {
  EXPECT_DOUBLE_EQ(theoretical_condition(10, 2, 1), 12.0);
  EXPECT_NEAR(theoretical_condition(4, 2, 1000000), 1.0, 1e-5);
  EXPECT_THROW(theoretical_condition(4, 2, 0), std::invalid_argument);
}

TEST(Condition, RankDeficientIsInfinite) {
  Eigen::MatrixXd a = gaussian(50, 4, 14);
  a.col(3) = a.col(0) + a.col(1);
  const auto est = estimate_condition(a, 4, 2, 1);
  EXPECT_TRUE(est.rank_deficient);
  EXPECT_TRUE(std::isinf(est.empirical));
}

TEST(Condition, DiagonalLimit) {
  const int k = 3;
  const double dt = 0.01;
  for (int d = 1; d <= 3; ++d) {
    const IndexSet set = build_index_set(d, 4);
    const Eigen::MatrixXd a = step_matrix(set, k, dt, 1000000, 20 + d);
    const Eigen::VectorXd diag = a.colwise().squaredNorm().transpose() / static_cast<double>(a.rows());
    for (Index n = 0; n < set.size(); ++n) {
      const double expected = 1.0 + static_cast<double>(set[n].degree()) / k;
      EXPECT_NEAR(diag(n), expected, 0.05 * expected) << "d=" << d << " n=" << n;
    }
  }
}

TEST(Condition, OffDiagonalDecay) {
  const Index m = 100000;
  const IndexSet set = build_index_set(2, 4);
  const Eigen::MatrixXd a = step_matrix(set, 2, 0.02, m, 31);
  const Eigen::MatrixXd g = a.transpose() * a / static_cast<double>(m);
  // Each off-diagonal mean is zero; compare against its own Monte Carlo error.
  for (Index i = 0; i < set.size(); ++i) {
    for (Index j = 0; j < i; ++j) {
      const Eigen::ArrayXd prod = a.col(i).array() * a.col(j).array();
      const double sd = std::sqrt((prod - prod.mean()).square().mean());
      EXPECT_LE(std::abs(g(i, j)), 5.0 * sd / std::sqrt(static_cast<double>(m))) << i << "," << j;
    }
  }
}

TEST(Condition, LargeStepApproachesOne) {
  const IndexSet set = build_index_set(1, 4);
  const auto est = estimate_condition(step_matrix(set, 400, 0.001, 200000, 41), 4, 1, 400);
  EXPECT_NEAR(est.theoretical, 1.0 + 4.0 / 400, 1e-15);
  EXPECT_LT(est.empirical, 1.1);
}

TEST(Diagnostics, CsvHeader) {
  std::ostringstream out;
  StepDiagnostics row;
  row.step = 3;
  row.solve.iterations = 7;
  write_diagnostics_csv(out, {row});
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "step,iterations,residual,condition,theoretical_condition,fallback");
}
