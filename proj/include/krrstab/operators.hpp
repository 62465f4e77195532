#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "krrstab/errors.hpp"
#include "krrstab/kernels.hpp"
#include "krrstab/linalg.hpp"
#include "krrstab/rkhs.hpp"
#include "krrstab/rng.hpp"
#include "krrstab/solver.hpp"

namespace krrstab {

/// Evaluation at fixed positions, P f = (f(x_1), ..., f(x_N)).
///
/// Every function handled here is a finite kernel expansion, so P, P* and P*P are realized in
/// coefficient space: on span{K_{x_i}}, P*P maps coefficients alpha to G alpha. The spectrum of
/// P*P restricted to that span is therefore the spectrum of G.
template <typename Scalar>
class EvaluationOperator {
 public:
  EvaluationOperator(KernelSpec kernel, PointSet<Scalar> pts)
      : kernel_(kernel), pts_(std::move(pts)), gram_(gram(kernel_, pts_)) {}

  const KernelSpec& kernel() const { return kernel_; }
  const PointSet<Scalar>& points() const { return pts_; }
  const GramMatrix<Scalar>& gram_matrix() const { return gram_; }
  Eigen::Index size() const { return pts_.size(); }

 private:
  KernelSpec kernel_;
  PointSet<Scalar> pts_;
  GramMatrix<Scalar> gram_;
};

template <typename Scalar>
Vector<Scalar> apply_P(const EvaluationOperator<Scalar>& op, const RepresenterFunction<Scalar>& f) {
  if (!(f.kernel() == op.kernel())) throw ArgumentError("apply_P: kernel mismatch");
  return evaluate(f, op.points());
}

template <typename Scalar, typename Derived>
RepresenterFunction<Scalar> apply_P_star(const EvaluationOperator<Scalar>& op, const Eigen::MatrixBase<Derived>& c) {
  if (c.size() != op.size()) throw ArgumentError("apply_P_star: coefficient vector has wrong length");
  return RepresenterFunction<Scalar>(op.kernel(), op.points(), Vector<Scalar>(c));
}

/// sqrt(max_j sum_i |G_ij|), an upper bound on ||P||.
template <typename Scalar>
Scalar operator_norm_bound_P(const GramMatrix<Scalar>& g) {
  return std::sqrt(g.entries().cwiseAbs().colwise().sum().maxCoeff());
}

template <typename Scalar>
Scalar operator_norm_bound_P(const EvaluationOperator<Scalar>& op) {
  return operator_norm_bound_P(op.gram_matrix());
}

/// ||P|| = sqrt(largest eigenvalue of G).
template <typename Scalar>
Scalar operator_norm_P(const GramMatrix<Scalar>& g) {
  return std::sqrt(std::max(g.eigen().largest(), Scalar(0)));
}

/// An element of Ker P supported on pts and extra_pts: the given coefficients sit on the
/// extra anchors and the data-anchor coefficients are solved so that h(x_i) = 0.
template <typename Scalar, typename Derived>
RepresenterFunction<Scalar> ker_p_sample(const EvaluationOperator<Scalar>& op, const PointSet<Scalar>& extra_pts,
                                         const Eigen::MatrixBase<Derived>& extra_coeffs) {
  if (extra_pts.dim() != op.points().dim()) throw ArgumentError("ker_p_sample: dimension mismatch");
  if (extra_coeffs.size() != extra_pts.size()) throw ArgumentError("ker_p_sample: coefficient length mismatch");
  const auto& pts = op.points();
  for (Eigen::Index j = 0; j < extra_pts.size(); ++j) {
    for (Eigen::Index i = 0; i < pts.size(); ++i) {
      if (pts.point(i) == extra_pts.point(j)) throw ArgumentError("ker_p_sample: extra point coincides with a data point");
    }
  }

  const Vector<Scalar> pushed = cross_gram(op.kernel(), pts, extra_pts) * extra_coeffs;
  const Vector<Scalar> data_coeffs = pinv_solve(op.gram_matrix(), Vector<Scalar>(-pushed));

  Vector<Scalar> coeffs(pts.size() + extra_pts.size());
  coeffs << data_coeffs, extra_coeffs;
  RepresenterFunction<Scalar> h(op.kernel(), pts.concat(extra_pts), std::move(coeffs));

  const Scalar leak = detail::max_abs(apply_P(op, h));
  if (leak > Scalar(1e-8) * (1 + detail::max_abs(pushed))) {
    throw InconsistencyError("ker_p_sample: could not make the sample vanish on the data points");
  }
  return h;
}

/// Extra-anchor coefficients drawn iid standard normal from `seed`.
template <typename Scalar>
RepresenterFunction<Scalar> ker_p_sample(const EvaluationOperator<Scalar>& op, const PointSet<Scalar>& extra_pts,
                                         std::uint64_t seed) {
  rng::Xoshiro256 gen(seed);
  Vector<Scalar> c(extra_pts.size());
  for (Eigen::Index j = 0; j < c.size(); ++j) c(j) = static_cast<Scalar>(gen.normal());
  return ker_p_sample(op, extra_pts, c);
}

template <typename Scalar>
struct FilterMax {
  Scalar argmax;
  Scalar max_value;
};

/// phi(z) = z / (z/N + lambda)^2
template <typename Scalar>
Scalar filter_value(Scalar z, Eigen::Index n, Scalar lambda) {
  const Scalar d = z / static_cast<Scalar>(n) + lambda;
  return z / (d * d);
}

/// Location and value of the maximum of phi on z >= 0: (N lambda, N / (4 lambda)).
template <typename Scalar>
FilterMax<Scalar> filter_max(Eigen::Index n, Scalar lambda) {
  if (n < 1) throw ArgumentError("filter_max: N must be >= 1");
  if (!(lambda > 0)) throw ArgumentError("filter_max: lambda must be > 0");
  const auto nn = static_cast<Scalar>(n);
  return {nn * lambda, nn / (4 * lambda)};
}

/// (1/(N t)) * sqrt(N) / (2 sqrt(lambda)) * ||b||_2 -- bound on the noise part of ||f - fbar||_H.
template <typename Scalar>
Scalar noise_operator_bound(Eigen::Index n, Scalar t, Scalar lambda, Scalar b_norm) {
  if (n < 1 || !(t > 0) || !(lambda > 0) || !(b_norm >= 0)) {
    throw ArgumentError("noise_operator_bound: N, t, lambda must be positive and b_norm non-negative");
  }
  const auto nn = static_cast<Scalar>(n);
  return (1 / (nn * t)) * (std::sqrt(nn) / (2 * std::sqrt(lambda))) * b_norm;
}

/// max_k sqrt(gamma_k) / (gamma_k/N + lambda), the norm of (P*P/N + lambda)^{-1} P* on the span.
template <typename Scalar>
Scalar spectral_filter_norm(const EigenDecomposition<Scalar>& eig, Eigen::Index n, Scalar lambda) {
  Scalar best = 0;
  for (Eigen::Index k = 0; k < eig.size(); ++k) {
    const Scalar gamma = std::max(eig.eigenvalues(k), Scalar(0));
    best = std::max(best, std::sqrt(gamma) / (gamma / static_cast<Scalar>(n) + lambda));
  }
  return best;
}

template <typename Scalar>
struct ShrinkageFactor {
  Scalar eigenvalue;
  Scalar factor;  // lambda / (eigenvalue/scale + lambda), in (0, 1]
};

/// Per-eigenvalue Tikhonov shrinkage. scale = N for P*P, 1 for an already normalized operator.
/// Eigenvalues below zero (round-off) are treated as zero.
template <typename Scalar>
std::vector<ShrinkageFactor<Scalar>> shrinkage_profile(const GramMatrix<Scalar>& g, std::type_identity_t<Scalar> lambda,
                                                       std::type_identity_t<Scalar> scale) {
  if (!(lambda > 0) || !(scale > 0)) throw ArgumentError("shrinkage_profile: lambda and scale must be > 0");
  const auto& ev = g.eigen().eigenvalues;
  std::vector<ShrinkageFactor<Scalar>> out;
  out.reserve(static_cast<std::size_t>(ev.size()));
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    out.push_back({ev(k), lambda / (std::max(ev(k), Scalar(0)) / scale + lambda)});
  }
  return out;
}

/// ||(P*P/scale + lambda)^{-1} lambda f||_H for f = sum_i coeffs_i K_{x_i}, evaluated spectrally:
/// sum_k gamma_k (q_k . coeffs)^2 factor_k^2.
template <typename Scalar, typename Derived>
Scalar shrinkage_norm(const GramMatrix<Scalar>& g, const Eigen::MatrixBase<Derived>& coeffs, std::type_identity_t<Scalar> lambda,
                      std::type_identity_t<Scalar> scale) {
  if (coeffs.size() != g.size()) throw ArgumentError("shrinkage_norm: coefficient length mismatch");
  const auto profile = shrinkage_profile(g, lambda, scale);
  const Vector<Scalar> proj = g.eigen().eigenvectors.transpose() * coeffs;
  Scalar sq = 0;
  for (std::size_t k = 0; k < profile.size(); ++k) {
    const Scalar c = proj(static_cast<Eigen::Index>(k));
    sq += std::max(profile[k].eigenvalue, Scalar(0)) * c * c * profile[k].factor * profile[k].factor;
  }
  return std::sqrt(sq);
}

/// H-norm of the gap between the fitted-minus-interpolant coefficients and the closed-form split
///   f - fbar = -(P*P/N + lambda)^{-1} lambda fbar + (P*P/N + lambda)^{-1} (1/N) P* (b / t).
/// The left side comes from krr_fit and the minimum-norm interpolant; the right side uses an
/// independent LDLT factorization of G + N lambda I.
template <typename Scalar, typename DerivedF, typename DerivedB>
Scalar thm2_decomposition_residual(const EvaluationOperator<Scalar>& op, const Eigen::MatrixBase<DerivedF>& f_tilde_values,
                                   const Eigen::MatrixBase<DerivedB>& b, std::type_identity_t<Scalar> t,
                                   std::type_identity_t<Scalar> lambda) {
  const Eigen::Index n = op.size();
  if (f_tilde_values.size() != n || b.size() != n) throw ArgumentError("thm2_decomposition_residual: length mismatch");
  if (!(t > 0) || !(lambda > 0)) throw ArgumentError("thm2_decomposition_residual: t and lambda must be > 0");

  const auto& g = op.gram_matrix();
  const Vector<Scalar> beta = pinv_solve(g, f_tilde_values);
  const DataSet<Scalar> data(op.points(), f_tilde_values + b / t);
  const Vector<Scalar> left = krr_fit(data, lambda, op.kernel(), g).f.coeffs() - beta;

  const Scalar shift = static_cast<Scalar>(n) * lambda;
  Matrix<Scalar> shifted = g.entries();
  shifted.diagonal().array() += shift;
  const Eigen::LDLT<Matrix<Scalar>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw DiagnosticsError("thm2_decomposition_residual: factorization failed");
  const Vector<Scalar> right = -ldlt.solve(Vector<Scalar>(shift * beta)) + ldlt.solve(Vector<Scalar>(b / t));

  const Vector<Scalar> d = left - right;
  return std::sqrt(std::max(d.dot(g.entries() * d), Scalar(0)));
}

}  // namespace krrstab
