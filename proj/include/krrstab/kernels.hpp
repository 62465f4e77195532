#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "krrstab/errors.hpp"
#include "krrstab/linalg.hpp"

namespace krrstab {

enum class KernelKind { gaussian, linear, polynomial };

/// A positive semidefinite kernel on R^d.
///
///   gaussian    K(x, y) = exp(-|x - y|^2 / (2 width^2))
///   linear      K(x, y) = x . y
///   polynomial  K(x, y) = (x . y + offset)^degree
///
/// Only the fields belonging to `kind` take part in equality.
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double width = 1.0;
  int degree = 1;
  double offset = 0.0;

  static KernelSpec gaussian(double width) {
    KernelSpec s;
    s.kind = KernelKind::gaussian;
    s.width = width;
    s.validate();
    return s;
  }
  static KernelSpec linear() {
    KernelSpec s;
    s.kind = KernelKind::linear;
    return s;
  }
  static KernelSpec polynomial(int degree, double offset = 0.0) {
    KernelSpec s;
    s.kind = KernelKind::polynomial;
    s.degree = degree;
    s.offset = offset;
    s.validate();
    return s;
  }

  void validate() const {
    switch (kind) {
      case KernelKind::gaussian:
        if (!(width > 0) || !std::isfinite(width)) throw ArgumentError("gaussian kernel: width must be > 0");
        break;
      case KernelKind::polynomial:
        if (degree < 1) throw ArgumentError("polynomial kernel: degree must be >= 1");
        if (!(offset >= 0) || !std::isfinite(offset)) throw ArgumentError("polynomial kernel: offset must be >= 0");
        break;
      case KernelKind::linear:
        break;
    }
  }

  friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case KernelKind::gaussian: return a.width == b.width;
      case KernelKind::polynomial: return a.degree == b.degree && a.offset == b.offset;
      case KernelKind::linear: return true;
    }
    return false;
  }
};

inline std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::linear: return "linear";
    case KernelKind::polynomial: return "polynomial";
  }
  return "unknown";
}

/// N points in R^d stored column-wise (one column per point).
template <typename Scalar>
class PointSet {
 public:
  PointSet() = default;

  explicit PointSet(Matrix<Scalar> coords) : coords_(std::move(coords)) {
    if (coords_.rows() < 1) throw ArgumentError("PointSet: dimension must be >= 1");
    if (coords_.cols() < 1) throw ArgumentError("PointSet: at least one point required");
    if (!coords_.allFinite()) throw ArgumentError("PointSet: non-finite coordinate");
  }

  /// One inner vector per point; all must share a dimension.
  static PointSet from_rows(const std::vector<std::vector<Scalar>>& rows) {
    if (rows.empty()) throw ArgumentError("PointSet: at least one point required");
    const auto d = static_cast<Eigen::Index>(rows.front().size());
    Matrix<Scalar> m(d, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != d) {
        throw ArgumentError("PointSet: point " + std::to_string(i) + " has inconsistent dimension");
      }
      for (Eigen::Index k = 0; k < d; ++k) m(k, static_cast<Eigen::Index>(i)) = rows[i][static_cast<std::size_t>(k)];
    }
    return PointSet(std::move(m));
  }

  /// 1-d convenience.
  static PointSet from_values(const std::vector<Scalar>& xs) {
    Matrix<Scalar> m(1, static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = xs[i];
    return PointSet(std::move(m));
  }

  Eigen::Index size() const { return coords_.cols(); }
  Eigen::Index dim() const { return coords_.rows(); }
  auto point(Eigen::Index i) const { return coords_.col(i); }
  const Matrix<Scalar>& coords() const { return coords_; }

  PointSet concat(const PointSet& other) const {
    if (other.dim() != dim()) throw ArgumentError("PointSet: dimension mismatch in concat");
    Matrix<Scalar> m(dim(), size() + other.size());
    m << coords_, other.coords_;
    return PointSet(std::move(m));
  }

  friend bool operator==(const PointSet& a, const PointSet& b) {
    return a.coords_.rows() == b.coords_.rows() && a.coords_.cols() == b.coords_.cols() &&
           a.coords_ == b.coords_;
  }

 private:
  Matrix<Scalar> coords_;
};

template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar eval_kernel(const KernelSpec& spec, const Eigen::MatrixBase<DerivedX>& x,
                                      const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != y.size()) throw ArgumentError("eval_kernel: dimension mismatch");
  switch (spec.kind) {
    case KernelKind::gaussian: {
      const Scalar w = static_cast<Scalar>(spec.width);
      return std::exp(-(x - y).squaredNorm() / (Scalar(2) * w * w));
    }
    case KernelKind::linear:
      return x.dot(y);
    case KernelKind::polynomial:
      return std::pow(x.dot(y) + static_cast<Scalar>(spec.offset), spec.degree);
  }
  return Scalar(0);
}

/// Matrix of K(a_i, b_j).
template <typename Scalar>
Matrix<Scalar> cross_gram(const KernelSpec& spec, const PointSet<Scalar>& a, const PointSet<Scalar>& b) {
  if (a.dim() != b.dim()) throw ArgumentError("cross_gram: dimension mismatch");
  Matrix<Scalar> k(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    for (Eigen::Index i = 0; i < a.size(); ++i) k(i, j) = eval_kernel(spec, a.point(i), b.point(j));
  }
  return k;
}

/// Whether GramMatrix computes its eigendecomposition when constructed.
enum class Decompose { eager, deferred };

/// Symmetric PSD matrix with kappa = max diagonal entry and (unless deferred) a cached
/// eigendecomposition. Eager construction rejects eigenvalues below -psd_tolerance().
template <typename Scalar>
class GramMatrix {
 public:
  explicit GramMatrix(Matrix<Scalar> entries, Decompose mode = Decompose::eager) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
      throw ArgumentError("GramMatrix: entries must be a non-empty square matrix");
    }
    if (!entries_.allFinite()) throw ArgumentError("GramMatrix: non-finite entry");
    kappa_ = entries_.diagonal().maxCoeff();
    if (mode == Decompose::eager) {
      eigen_ = sym_eigen(entries_);
      if (eigen_.smallest() < -psd_tolerance()) {
        throw DiagnosticsError("GramMatrix: eigenvalue " + std::to_string(eigen_.smallest()) +
                               " below PSD tolerance");
      }
      decomposed_ = true;
    } else if (detail::max_abs(entries_ - entries_.transpose()) > 0) {
      throw ArgumentError("GramMatrix: entries are not symmetric");
    }
  }

  Eigen::Index size() const { return entries_.rows(); }
  const Matrix<Scalar>& entries() const { return entries_; }
  Scalar kappa() const { return kappa_; }
  Scalar psd_tolerance() const { return Scalar(1e-10) * static_cast<Scalar>(size()) * kappa_; }

  bool has_eigen() const { return decomposed_; }
  const EigenDecomposition<Scalar>& eigen() const {
    if (!decomposed_) throw std::logic_error("GramMatrix: eigendecomposition was deferred");
    return eigen_;
  }

 private:
  Matrix<Scalar> entries_;
  Scalar kappa_{};
  EigenDecomposition<Scalar> eigen_;
  bool decomposed_ = false;
};

/// Upper triangle evaluated once and mirrored, so the result is exactly symmetric.
template <typename Scalar>
GramMatrix<Scalar> gram(const KernelSpec& spec, const PointSet<Scalar>& pts, Decompose mode = Decompose::eager) {
  spec.validate();
  const Eigen::Index n = pts.size();
  Matrix<Scalar> g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const Scalar v = eval_kernel(spec, pts.point(i), pts.point(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return GramMatrix<Scalar>(std::move(g), mode);
}

/// (G + cI)^{-1} y, through the cached decomposition when present and Cholesky otherwise.
template <typename Scalar, typename Derived>
typename Derived::PlainObject regularized_solve(const GramMatrix<Scalar>& g, std::type_identity_t<Scalar> c,
                                                const Eigen::MatrixBase<Derived>& y) {
  if (g.has_eigen()) return regularized_solve(g.eigen(), c, y);
  return regularized_solve_llt(g.entries(), c, y);
}

template <typename Scalar, typename Derived>
Vector<Scalar> pinv_solve(const GramMatrix<Scalar>& g, const Eigen::MatrixBase<Derived>& y,
                          std::type_identity_t<Scalar> rank_tol = Scalar(kDefaultRankTol)) {
  if (g.has_eigen()) return pinv_solve(g.entries(), g.eigen(), y, rank_tol);
  return pinv_solve(g.entries(), sym_eigen(g.entries()), y, rank_tol);
}

}  // namespace krrstab
