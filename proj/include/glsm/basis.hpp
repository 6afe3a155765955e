#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "glsm/index_set.hpp"

namespace glsm {

/// Normalized generalized Hermite polynomial H_n^{(t)}(y) = He_n(y / sqrt(t)) / sqrt(n!),
/// orthonormal under N(0, t). Evaluated with the normalized three-term recurrence.
template <typename Scalar>
Scalar hermite_value(int n, Scalar t, Scalar y) {
  using std::sqrt;
  if (n < 0) throw std::invalid_argument("hermite_value: negative order");
  if (!(t > Scalar(0))) throw std::invalid_argument("hermite_value: scale must be positive");
  const Scalar x = y / sqrt(t);
  Scalar prev(1);
  if (n == 0) return prev;
  Scalar cur = x;
  for (int k = 1; k < n; ++k) {
    const Scalar next = (x * cur - sqrt(Scalar(k)) * prev) / sqrt(Scalar(k + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Column-wise Hermite table: column n holds H_n^{(t)} at every entry of `y`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> hermite_table(
    const Eigen::MatrixBase<Derived>& y, typename Derived::Scalar t, int max_order) {
  using Scalar = typename Derived::Scalar;
  using std::sqrt;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> table(y.size(), max_order + 1);
  table.col(0).setOnes();
  if (max_order == 0) return table;
  table.col(1) = y / sqrt(t);
  const auto x = table.col(1);
  for (int k = 1; k < max_order; ++k) {
    table.col(k + 1) = (x.cwiseProduct(table.col(k)) - sqrt(Scalar(k)) * table.col(k - 1)) /
                       sqrt(Scalar(k + 1));
  }
  return table;
}

/// Tensor-product Hermite values on a set of points, one row per point.
template <typename Scalar>
struct BasisMatrix {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> values;
  Scalar time;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

/// Phi(m, n) = prod_j H_{alpha_j}^{(t)}(points(m, j)) for alpha = I[n].
///
/// One Hermite table per axis, then each column is its parent column times a single
/// table column, so the cost is O(M (d p + N_b)).
template <typename Derived>
BasisMatrix<typename Derived::Scalar> eval_basis_matrix(const Eigen::MatrixBase<Derived>& points,
                                                        typename Derived::Scalar t,
                                                        const IndexSet& set) {
  using Scalar = typename Derived::Scalar;
  if (points.cols() != set.dimension()) {
    throw std::invalid_argument("eval_basis_matrix: point dimension does not match index set");
  }
  if (!(t > Scalar(0))) throw std::invalid_argument("eval_basis_matrix: scale must be positive");
  const Index rows = points.rows();
  const int order = set.max_entry();
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> tables;
  tables.reserve(static_cast<std::size_t>(set.dimension()));
  for (int j = 0; j < set.dimension(); ++j) tables.push_back(hermite_table(points.col(j), t, order));

  BasisMatrix<Scalar> phi{Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(rows, set.size()), t};
  for (Index n = 0; n < set.size(); ++n) {
    const auto& f = set.factor(n);
    if (f.parent < 0) {
      phi.values.col(n).setOnes();
    } else {
      phi.values.col(n) = phi.values.col(f.parent).cwiseProduct(
          tables[static_cast<std::size_t>(f.axis)].col(f.order));
    }
  }
  return phi;
}

/// Gradient-enhanced regression matrix
///   A(m, n) = phi_n(W_m) + grad phi_n(W_m) . dW_m,
/// using d/dy_j H_alpha^{(t)} = sqrt(alpha_j / t) H_{alpha - e_j}^{(t)}. Cost is linear in ||I||_0.
/// Writes into `a`, which is resized as needed.
template <typename Scalar, typename DerivedW, typename DerivedA>
void assemble_regression_matrix_into(const BasisMatrix<Scalar>& phi,
                                     const Eigen::MatrixBase<DerivedW>& increments,
                                     const IndexSet& set, Eigen::MatrixBase<DerivedA>& a) {
  using std::sqrt;
  if (phi.cols() != set.size() || increments.cols() != set.dimension() ||
      increments.rows() != phi.rows()) {
    throw std::invalid_argument("assemble_regression_matrix: shape mismatch");
  }
  a.derived() = phi.values;
  for (Index n = 0; n < set.size(); ++n) {
    for (const auto& [axis, order] : set.support(n)) {
      const Index lower = set.neighbor(n, axis);
      if (lower < 0) throw std::logic_error("assemble_regression_matrix: missing lower neighbor");
      a.col(n) += sqrt(Scalar(order) / phi.time) *
                  increments.col(axis).cwiseProduct(phi.values.col(lower));
    }
  }
}

template <typename Scalar, typename DerivedW>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> assemble_regression_matrix(
    const BasisMatrix<Scalar>& phi, const Eigen::MatrixBase<DerivedW>& increments,
    const IndexSet& set) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a;
  assemble_regression_matrix_into(phi, increments, set, a);
  return a;
}

/// Gradient of psi = sum_n coeffs_n phi_n at the point whose basis row is `phi_row`.
template <typename DerivedC, typename DerivedR>
Eigen::Matrix<typename DerivedC::Scalar, Eigen::Dynamic, 1> eval_gradient(
    const Eigen::MatrixBase<DerivedC>& coeffs, const IndexSet& set,
    const Eigen::MatrixBase<DerivedR>& phi_row, typename DerivedC::Scalar t) {
  using Scalar = typename DerivedC::Scalar;
  using std::sqrt;
  if (coeffs.size() != set.size() || phi_row.size() != set.size()) {
    throw std::invalid_argument("eval_gradient: size mismatch");
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(set.dimension());
  for (Index n = 0; n < set.size(); ++n) {
    for (const auto& [axis, order] : set.support(n)) {
      grad(axis) += coeffs(n) * sqrt(Scalar(order) / t) * phi_row(set.neighbor(n, axis));
    }
  }
  return grad;
}

}  // namespace glsm
