#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "glsm/index_set.hpp"

namespace glsm {

struct SolverOptions {
  double tolerance = 1e-10;  // relative normal-equation residual
  int max_iterations = 500;
  double ridge = 0.0;        // adds ridge * rows * I to A^T A
  Index gram_limit = 4096;   // largest N_b for which A^T A is formed explicitly
};

struct SolveDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  bool fallback = false;  // dense orthogonal factorization was used
};

struct LeastSquaresSolution {
  Eigen::VectorXd beta;
  SolveDiagnostics diagnostics;
};

/// Jacobi-preconditioned conjugate gradients for a symmetric positive semi-definite
/// operator. `apply(x, y)` must write y = G x. Convergence is ||b - G x|| <= tol ||b||.
/// A zero right-hand side returns x = 0 immediately.
template <typename Apply>
LeastSquaresSolution conjugate_gradient(Apply&& apply, const Eigen::VectorXd& b,
                                        const Eigen::VectorXd& diagonal, double tolerance,
                                        int max_iterations,
                                        std::optional<Eigen::VectorXd> initial = std::nullopt) {
  const Index n = b.size();
  LeastSquaresSolution out;
  out.beta = initial ? *initial : Eigen::VectorXd::Zero(n);
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    out.beta.setZero();
    out.diagnostics.converged = true;
    return out;
  }
  Eigen::VectorXd inv_diag(n);
  for (Index i = 0; i < n; ++i) inv_diag(i) = diagonal(i) > 0.0 ? 1.0 / diagonal(i) : 1.0;

  Eigen::VectorXd gx(n);
  Eigen::VectorXd r = b;
  if (initial) {
    apply(out.beta, gx);
    r -= gx;
  }
  double residual = r.norm() / b_norm;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd dir = z;
  double rz = r.dot(z);
  int it = 0;
  while (residual > tolerance && it < max_iterations) {
    apply(dir, gx);
    const double curvature = dir.dot(gx);
    if (!(curvature > 0.0) || !std::isfinite(curvature)) break;
    const double step = rz / curvature;
    out.beta += step * dir;
    r -= step * gx;
    ++it;
    residual = r.norm() / b_norm;
    if (residual <= tolerance) break;
    z = inv_diag.cwiseProduct(r);
    const double rz_next = r.dot(z);
    dir = z + (rz_next / rz) * dir;
    rz = rz_next;
  }
  out.diagnostics.iterations = it;
  out.diagnostics.residual = residual;
  out.diagnostics.converged = residual <= tolerance && out.beta.allFinite();
  return out;
}

/// Accumulates G = A^T A and c = A^T u from row blocks. Adding the same blocks in the
/// same order gives bit-identical results.
class NormalEquations {
 public:
  explicit NormalEquations(Index cols);

  Index cols() const { return gram_.cols(); }
  Index rows() const { return rows_; }

  void add(const Eigen::Ref<const Eigen::MatrixXd>& a_block, const Eigen::Ref<const Eigen::VectorXd>& u_block);
  /// Adds another accumulator's sums (used to merge per-chunk partial sums in a fixed order).
  void merge(const NormalEquations& other);

  /// Full symmetric G.
  Eigen::MatrixXd gram() const;
  const Eigen::VectorXd& rhs() const { return rhs_; }
  /// Replaces A^T u, e.g. to reuse one Gram matrix for several right-hand sides.
  void set_rhs(const Eigen::Ref<const Eigen::VectorXd>& rhs);

 private:
  Eigen::MatrixXd gram_;  // lower triangle is authoritative
  Eigen::VectorXd rhs_;
  Index rows_ = 0;
};

/// Minimizes ||A beta - rhs||_2 with CG on the normal equations. Forms A^T A when
/// A.cols() <= gram_limit, otherwise applies A^T (A x) matrix-free. Falls back to a
/// complete orthogonal decomposition of A on non-convergence.
LeastSquaresSolution solve_least_squares(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                         const Eigen::Ref<const Eigen::VectorXd>& rhs,
                                         const SolverOptions& options = {},
                                         std::optional<Eigen::VectorXd> initial = std::nullopt);

/// CG on an explicit normal-equation system; falls back to a complete orthogonal
/// decomposition of G on non-convergence.
LeastSquaresSolution solve_normal_equations(const NormalEquations& system, const SolverOptions& options = {});

/// Dense reference solve by column-pivoted Householder QR.
Eigen::VectorXd dense_least_squares(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                    const Eigen::Ref<const Eigen::VectorXd>& rhs);

struct ConditionEstimate {
  double empirical = std::numeric_limits<double>::infinity();
  double theoretical = 1.0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool rank_deficient = false;
};

/// 1 + (p + d - 1) / k.
double theoretical_condition(int p, int d, int k);

/// Extreme-eigenvalue ratio of a symmetric matrix; infinite when the smallest eigenvalue is
/// below 1e-12 times the largest.
ConditionEstimate condition_from_gram(const Eigen::Ref<const Eigen::MatrixXd>& gram, int p, int d, int k);

/// Condition of A^T A / M for an assembled matrix at step k.
ConditionEstimate estimate_condition(const Eigen::Ref<const Eigen::MatrixXd>& a, int p, int d, int k);

struct StepDiagnostics {
  int step = 0;
  SolveDiagnostics solve;
  double condition = std::numeric_limits<double>::quiet_NaN();
  double theoretical_condition = std::numeric_limits<double>::quiet_NaN();
};

/// Header "step,iterations,residual,condition,theoretical_condition,fallback".
void write_diagnostics_csv(std::ostream& out, const std::vector<StepDiagnostics>& rows);

}  // namespace glsm
