#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "krrstab/errors.hpp"
#include "krrstab/kernels.hpp"

namespace krrstab {

/// f = sum_i coeffs[i] K(anchors[i], .), an element of the RKHS of `kernel`.
template <typename Scalar>
class RepresenterFunction {
 public:
  RepresenterFunction(KernelSpec kernel, PointSet<Scalar> anchors, Vector<Scalar> coeffs)
      : kernel_(kernel), anchors_(std::move(anchors)), coeffs_(std::move(coeffs)) {
    kernel_.validate();
    if (anchors_.size() != coeffs_.size()) throw ArgumentError("RepresenterFunction: anchors/coeffs length mismatch");
    if (!coeffs_.allFinite()) throw ArgumentError("RepresenterFunction: non-finite coefficient");
  }

  static RepresenterFunction zero(const KernelSpec& kernel, const PointSet<Scalar>& anchors) {
    return RepresenterFunction(kernel, anchors, Vector<Scalar>::Zero(anchors.size()));
  }

  /// K_x as a one-anchor expansion.
  template <typename Derived>
  static RepresenterFunction section(const KernelSpec& kernel, const Eigen::MatrixBase<Derived>& x) {
    Matrix<Scalar> m(x.size(), 1);
    for (Eigen::Index k = 0; k < x.size(); ++k) m(k, 0) = x(k);
    return RepresenterFunction(kernel, PointSet<Scalar>(std::move(m)), Vector<Scalar>::Ones(1));
  }

  const KernelSpec& kernel() const { return kernel_; }
  const PointSet<Scalar>& anchors() const { return anchors_; }
  const Vector<Scalar>& coeffs() const { return coeffs_; }
  Eigen::Index size() const { return coeffs_.size(); }
  Eigen::Index dim() const { return anchors_.dim(); }

 private:
  KernelSpec kernel_;
  PointSet<Scalar> anchors_;
  Vector<Scalar> coeffs_;
};

namespace detail {

template <typename Scalar>
void require_same_kernel(const RepresenterFunction<Scalar>& f, const RepresenterFunction<Scalar>& g) {
  if (!(f.kernel() == g.kernel())) throw ArgumentError("RKHS operation on functions with different kernels");
  if (f.dim() != g.dim()) throw ArgumentError("RKHS operation on functions with different input dimension");
}

}  // namespace detail

template <typename Scalar, typename Derived>
Scalar evaluate(const RepresenterFunction<Scalar>& f, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != f.dim()) throw ArgumentError("evaluate: dimension mismatch");
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i) sum += f.coeffs()(i) * eval_kernel(f.kernel(), f.anchors().point(i), x);
  return sum;
}

/// Values of f at every point of `pts`.
template <typename Scalar>
Vector<Scalar> evaluate(const RepresenterFunction<Scalar>& f, const PointSet<Scalar>& pts) {
  if (pts.dim() != f.dim()) throw ArgumentError("evaluate: dimension mismatch");
  return cross_gram(f.kernel(), pts, f.anchors()) * f.coeffs();
}

template <typename Scalar>
Scalar inner_product(const RepresenterFunction<Scalar>& f, const RepresenterFunction<Scalar>& g) {
  detail::require_same_kernel(f, g);
  return f.coeffs().dot(cross_gram(f.kernel(), f.anchors(), g.anchors()) * g.coeffs());
}

/// Squared norm before clamping; `flagged` marks round-off below -1e-8.
template <typename Scalar>
struct NormReport {
  Scalar norm;
  Scalar raw_squared;
  bool flagged;
};

template <typename Scalar>
NormReport<Scalar> norm_report(const RepresenterFunction<Scalar>& f) {
  const Scalar sq = inner_product(f, f);
  return {std::sqrt(std::max(sq, Scalar(0))), sq, sq < Scalar(-1e-8)};
}

template <typename Scalar>
Scalar rkhs_norm(const RepresenterFunction<Scalar>& f) {
  return norm_report(f).norm;
}

/// a*f + b*g on the concatenated anchors, with exactly coincident anchors merged.
/// Merged anchors keep first-occurrence order (f's anchors first).
template <typename Scalar>
RepresenterFunction<Scalar> linear_combination(Scalar a, const RepresenterFunction<Scalar>& f, Scalar b,
                                               const RepresenterFunction<Scalar>& g) {
  detail::require_same_kernel(f, g);
  if (f.anchors() == g.anchors()) {
    return RepresenterFunction<Scalar>(f.kernel(), f.anchors(), a * f.coeffs() + b * g.coeffs());
  }

  const PointSet<Scalar> all = f.anchors().concat(g.anchors());
  Vector<Scalar> coeffs(all.size());
  coeffs << a * f.coeffs(), b * g.coeffs();

  const auto& c = all.coords();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(all.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index i, Eigen::Index j) {
    for (Eigen::Index k = 0; k < c.rows(); ++k) {
      if (c(k, i) != c(k, j)) return c(k, i) < c(k, j);
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), less);

  // representative[i] = smallest original index with identical coordinates
  std::vector<Eigen::Index> representative(order.size());
  for (std::size_t s = 0; s < order.size();) {
    std::size_t e = s + 1;
    while (e < order.size() && !less(order[s], order[e])) ++e;
    for (std::size_t k = s; k < e; ++k) representative[static_cast<std::size_t>(order[k])] = order[s];
    s = e;
  }

  std::vector<Eigen::Index> kept;
  Vector<Scalar> merged = Vector<Scalar>::Zero(all.size());
  for (Eigen::Index i = 0; i < all.size(); ++i) {
    const Eigen::Index r = representative[static_cast<std::size_t>(i)];
    if (r == i) kept.push_back(i);
    merged(r) += coeffs(i);
  }
  if (static_cast<Eigen::Index>(kept.size()) == all.size()) {
    return RepresenterFunction<Scalar>(f.kernel(), all, std::move(coeffs));
  }
  Matrix<Scalar> anchors(all.dim(), static_cast<Eigen::Index>(kept.size()));
  Vector<Scalar> out(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    anchors.col(static_cast<Eigen::Index>(k)) = c.col(kept[k]);
    out(static_cast<Eigen::Index>(k)) = merged(kept[k]);
  }
  return RepresenterFunction<Scalar>(f.kernel(), PointSet<Scalar>(std::move(anchors)), std::move(out));
}

template <typename Scalar>
RepresenterFunction<Scalar> operator-(const RepresenterFunction<Scalar>& f, const RepresenterFunction<Scalar>& g) {
  return linear_combination(Scalar(1), f, Scalar(-1), g);
}

template <typename Scalar>
RepresenterFunction<Scalar> operator+(const RepresenterFunction<Scalar>& f, const RepresenterFunction<Scalar>& g) {
  return linear_combination(Scalar(1), f, Scalar(1), g);
}

template <typename Scalar>
RepresenterFunction<Scalar> operator*(Scalar a, const RepresenterFunction<Scalar>& f) {
  return RepresenterFunction<Scalar>(f.kernel(), f.anchors(), a * f.coeffs());
}

template <typename Scalar>
NormReport<Scalar> h_distance_report(const RepresenterFunction<Scalar>& f, const RepresenterFunction<Scalar>& g) {
  return norm_report(f - g);
}

template <typename Scalar>
Scalar h_distance(const RepresenterFunction<Scalar>& f, const RepresenterFunction<Scalar>& g) {
  return h_distance_report(f, g).norm;
}

}  // namespace krrstab
