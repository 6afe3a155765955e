#include "glsm/regression.hpp"

#include <iomanip>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace glsm {

namespace {

constexpr double kRankTolerance = 1e-12;

void check_system(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::VectorXd>& rhs) {
  if (a.rows() != rhs.size()) throw std::invalid_argument("solve_least_squares: row count mismatch");
  if (a.rows() < a.cols()) throw std::invalid_argument("solve_least_squares: fewer rows than unknowns");
  if (!a.allFinite() || !rhs.allFinite()) throw std::invalid_argument("solve_least_squares: non-finite input");
}

}  // namespace

NormalEquations::NormalEquations(Index cols)
    : gram_(Eigen::MatrixXd::Zero(cols, cols)), rhs_(Eigen::VectorXd::Zero(cols)) {}

void NormalEquations::add(const Eigen::Ref<const Eigen::MatrixXd>& a_block,
                          const Eigen::Ref<const Eigen::VectorXd>& u_block) {
  if (a_block.cols() != cols() || a_block.rows() != u_block.size()) {
    throw std::invalid_argument("NormalEquations::add: shape mismatch");
  }
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(a_block.transpose());
  rhs_.noalias() += a_block.transpose() * u_block;
  rows_ += a_block.rows();
}

void NormalEquations::merge(const NormalEquations& other) {
  if (other.cols() != cols()) throw std::invalid_argument("NormalEquations::merge: shape mismatch");
  gram_.triangularView<Eigen::Lower>() += other.gram_;
  rhs_ += other.rhs_;
  rows_ += other.rows_;
}

void NormalEquations::set_rhs(const Eigen::Ref<const Eigen::VectorXd>& rhs) {
  if (rhs.size() != cols()) throw std::invalid_argument("NormalEquations::set_rhs: size mismatch");
  rhs_ = rhs;
}

Eigen::MatrixXd NormalEquations::gram() const {
  Eigen::MatrixXd g = gram_.selfadjointView<Eigen::Lower>();
  return g;
}

Eigen::VectorXd dense_least_squares(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                    const Eigen::Ref<const Eigen::VectorXd>& rhs) {
  return a.colPivHouseholderQr().solve(rhs);
}

LeastSquaresSolution solve_least_squares(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                         const Eigen::Ref<const Eigen::VectorXd>& rhs,
                                         const SolverOptions& options, std::optional<Eigen::VectorXd> initial) {
  check_system(a, rhs);
  const Index n = a.cols();
  const double shift = options.ridge * static_cast<double>(a.rows());
  const Eigen::VectorXd b = a.transpose() * rhs;
  LeastSquaresSolution sol;
  if (n <= options.gram_limit) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
    g = g.selfadjointView<Eigen::Lower>();
    g.diagonal().array() += shift;
    const Eigen::VectorXd diag = g.diagonal();
    sol = conjugate_gradient([&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y.noalias() = g * x; }, b, diag,
                             options.tolerance, options.max_iterations, std::move(initial));
  } else {
    const Eigen::VectorXd diag = a.colwise().squaredNorm().transpose().array() + shift;
    Eigen::VectorXd tmp(a.rows());
    sol = conjugate_gradient(
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
          tmp.noalias() = a * x;
          y.noalias() = a.transpose() * tmp;
          y += shift * x;
        },
        b, diag, options.tolerance, options.max_iterations, std::move(initial));
  }
  if (!sol.diagnostics.converged) {
    if (shift > 0.0) {
      Eigen::MatrixXd aug(a.rows() + n, n);
      aug << a, std::sqrt(shift) * Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd rhs_aug = Eigen::VectorXd::Zero(a.rows() + n);
      rhs_aug.head(a.rows()) = rhs;
      sol.beta = aug.completeOrthogonalDecomposition().solve(rhs_aug);
    } else {
      sol.beta = a.completeOrthogonalDecomposition().solve(rhs);
    }
    sol.diagnostics.fallback = true;
    sol.diagnostics.converged = sol.beta.allFinite();
  }
  return sol;
}

LeastSquaresSolution solve_normal_equations(const NormalEquations& system, const SolverOptions& options) {
  Eigen::MatrixXd g = system.gram();
  g.diagonal().array() += options.ridge * static_cast<double>(system.rows());
  const Eigen::VectorXd diag = g.diagonal();
  LeastSquaresSolution sol =
      conjugate_gradient([&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y.noalias() = g * x; },
                         system.rhs(), diag, options.tolerance, options.max_iterations);
  if (!sol.diagnostics.converged) {
    sol.beta = g.completeOrthogonalDecomposition().solve(system.rhs());
    sol.diagnostics.fallback = true;
    sol.diagnostics.converged = sol.beta.allFinite();
  }
  return sol;
}

double theoretical_condition(int p, int d, int k) {
  if (k < 1) throw std::invalid_argument("theoretical_condition: k must be >= 1");
  return 1.0 + static_cast<double>(p + d - 1) / k;
}

ConditionEstimate condition_from_gram(const Eigen::Ref<const Eigen::MatrixXd>& gram, int p, int d, int k) {
  ConditionEstimate est;
  est.theoretical = theoretical_condition(p, d, k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw std::runtime_error("condition_from_gram: eigenvalue solve failed");
  est.min_eigenvalue = eig.eigenvalues().minCoeff();
  est.max_eigenvalue = eig.eigenvalues().maxCoeff();
  if (!(est.max_eigenvalue > 0.0) || est.min_eigenvalue <= kRankTolerance * est.max_eigenvalue) {
    est.rank_deficient = true;
    est.empirical = std::numeric_limits<double>::infinity();
  } else {
    est.empirical = est.max_eigenvalue / est.min_eigenvalue;
  }
  return est;
}

ConditionEstimate estimate_condition(const Eigen::Ref<const Eigen::MatrixXd>& a, int p, int d, int k) {
  if (a.rows() == 0) throw std::invalid_argument("estimate_condition: empty matrix");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(a.cols(), a.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose(), 1.0 / static_cast<double>(a.rows()));
  g = g.selfadjointView<Eigen::Lower>();
  return condition_from_gram(g, p, d, k);
}

void write_diagnostics_csv(std::ostream& out, const std::vector<StepDiagnostics>& rows) {
  out << "step,iterations,residual,condition,theoretical_condition,fallback\n";
  out << std::setprecision(10);
  for (const auto& row : rows) {
    out << row.step << ',' << row.solve.iterations << ',' << row.solve.residual << ',' << row.condition << ','
        << row.theoretical_condition << ',' << (row.solve.fallback ? 1 : 0) << '\n';
  }
}

}  // namespace glsm
