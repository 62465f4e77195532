#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <type_traits>

#include "krrstab/errors.hpp"

namespace krrstab {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Relative eigenvalue cutoff below which pinv_solve treats a direction as null.
inline constexpr double kDefaultRankTol = 1e-10;

/// Relative residual above which pinv_solve reports an unsatisfiable system.
inline constexpr double kInconsistencyTol = 1e-6;

/// Spectral decomposition of a symmetric matrix, eigenvalues sorted descending.
template <typename Scalar>
struct EigenDecomposition {
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;  // column k pairs with eigenvalues(k)

  Eigen::Index size() const { return eigenvalues.size(); }
  Scalar largest() const { return size() > 0 ? eigenvalues(0) : Scalar(0); }
  Scalar smallest() const { return size() > 0 ? eigenvalues(size() - 1) : Scalar(0); }

  Matrix<Scalar> reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw ArgumentError(std::string(what) + ": non-finite entry");
}

template <typename Derived>
typename Derived::Scalar max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? typename Derived::Scalar(0) : m.cwiseAbs().maxCoeff();
}

}  // namespace detail

template <typename Derived>
EigenDecomposition<typename Derived::Scalar> sym_eigen(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) throw ArgumentError("sym_eigen: matrix is not square");
  if (a.rows() == 0) return {};
  detail::require_finite(a, "sym_eigen");

  const Matrix<Scalar> dense = a;
  const Scalar asymmetry = detail::max_abs(dense - dense.transpose());
  if (asymmetry > Scalar(1e-12) * detail::max_abs(dense)) {
    throw ArgumentError("sym_eigen: matrix is not symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(dense, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw DiagnosticsError("sym_eigen: eigensolver did not converge");

  EigenDecomposition<Scalar> out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

/// (A + cI)^{-1} y through a cached decomposition of A. y may hold several columns.
template <typename Scalar, typename Derived>
typename Derived::PlainObject regularized_solve(const EigenDecomposition<Scalar>& eig,
                                                std::type_identity_t<Scalar> c,
                                                const Eigen::MatrixBase<Derived>& y) {
  if (!(c > 0)) throw ArgumentError("regularized_solve: shift must be positive");
  if (y.rows() != eig.size()) throw ArgumentError("regularized_solve: right side has wrong length");
  const auto& q = eig.eigenvectors;
  Matrix<Scalar> coords = q.transpose() * y;
  coords.array().colwise() /= (eig.eigenvalues.array() + c);
  return q * coords;
}

/// (A + cI)^{-1} y by Cholesky of the shifted matrix; no decomposition of A required.
template <typename DerivedA, typename DerivedY>
typename DerivedY::PlainObject regularized_solve_llt(const Eigen::MatrixBase<DerivedA>& a,
                                                     typename DerivedA::Scalar c,
                                                     const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedA::Scalar;
  if (!(c > 0)) throw ArgumentError("regularized_solve: shift must be positive");
  if (a.rows() != a.cols()) throw ArgumentError("regularized_solve: matrix is not square");
  if (y.rows() != a.rows()) throw ArgumentError("regularized_solve: right side has wrong length");
  Matrix<Scalar> shifted = a;
  shifted.diagonal().array() += c;
  Eigen::LLT<Matrix<Scalar>> llt(shifted);
  if (llt.info() != Eigen::Success) {
    throw DiagnosticsError("regularized_solve: shifted matrix is not positive definite");
  }
  return llt.solve(y);
}

/// Minimum-norm least-squares solution of A alpha = y, discarding eigen-directions with
/// eigenvalue <= rank_tol * largest. Throws InconsistencyError when the residual is
/// too large for y to lie in the numerical range of A.
template <typename DerivedA, typename Scalar, typename DerivedY>
Vector<Scalar> pinv_solve(const Eigen::MatrixBase<DerivedA>& a, const EigenDecomposition<Scalar>& eig,
                          const Eigen::MatrixBase<DerivedY>& y,
                          std::type_identity_t<Scalar> rank_tol = Scalar(kDefaultRankTol)) {
  if (y.cols() != 1 || y.rows() != eig.size() || a.rows() != eig.size()) {
    throw ArgumentError("pinv_solve: right side has wrong length");
  }
  if (!(rank_tol >= 0)) throw ArgumentError("pinv_solve: rank_tol must be non-negative");

  const Scalar cutoff = rank_tol * std::max(eig.largest(), Scalar(0));
  Vector<Scalar> coords = eig.eigenvectors.transpose() * y;
  for (Eigen::Index k = 0; k < coords.size(); ++k) {
    const Scalar gamma = eig.eigenvalues(k);
    coords(k) = (gamma > cutoff && gamma > 0) ? coords(k) / gamma : Scalar(0);
  }
  Vector<Scalar> alpha = eig.eigenvectors * coords;

  const Scalar residual = detail::max_abs(a * alpha - y);
  if (residual > Scalar(kInconsistencyTol) * (1 + detail::max_abs(y))) {
    throw InconsistencyError("pinv_solve: right side is not in the range of the matrix (residual " +
                             std::to_string(residual) + ")");
  }
  return alpha;
}

template <typename DerivedA, typename DerivedY>
Vector<typename DerivedA::Scalar> pinv_solve(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedY>& y,
                                             typename DerivedA::Scalar rank_tol = kDefaultRankTol) {
  return pinv_solve(a, sym_eigen(a), y, rank_tol);
}

}  // namespace krrstab
