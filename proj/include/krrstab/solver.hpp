#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "krrstab/errors.hpp"
#include "krrstab/kernels.hpp"
#include "krrstab/linalg.hpp"
#include "krrstab/rkhs.hpp"
#include "krrstab/rng.hpp"

namespace krrstab {

/// Labelled sample (x_i, y_i), i = 1..N.
template <typename Scalar>
class DataSet {
 public:
  DataSet(PointSet<Scalar> pts, Vector<Scalar> labels) : pts_(std::move(pts)), labels_(std::move(labels)) {
    if (pts_.size() < 1) throw ArgumentError("DataSet: at least one point required");
    if (pts_.size() != labels_.size()) throw ArgumentError("DataSet: points/labels length mismatch");
    if (!labels_.allFinite()) throw ArgumentError("DataSet: non-finite label");
  }

  const PointSet<Scalar>& pts() const { return pts_; }
  const Vector<Scalar>& labels() const { return labels_; }
  Eigen::Index size() const { return labels_.size(); }

 private:
  PointSet<Scalar> pts_;
  Vector<Scalar> labels_;
};

template <typename Scalar>
struct FitResult {
  RepresenterFunction<Scalar> f;  // anchors are the data positions
  Scalar lambda;
  Scalar objective;               // regularized risk at f
  Vector<Scalar> residuals;       // f(x_i) - y_i
};

/// (1/N) sum_i (f(x_i) - y_i)^2 + lambda ||f||_H^2
template <typename Scalar>
Scalar regularized_risk(const RepresenterFunction<Scalar>& f, const DataSet<Scalar>& data,
                        std::type_identity_t<Scalar> lambda) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw ArgumentError("regularized_risk: lambda must be >= 0");
  const Vector<Scalar> r = evaluate(f, data.pts()) - data.labels();
  const Scalar sq_norm = std::max(inner_product(f, f), Scalar(0));
  return r.squaredNorm() / static_cast<Scalar>(data.size()) + lambda * sq_norm;
}

/// Minimizer of the regularized risk over H. Coefficients solve (G + N lambda I) alpha = y.
template <typename Scalar>
FitResult<Scalar> krr_fit(const DataSet<Scalar>& data, std::type_identity_t<Scalar> lambda, const KernelSpec& kernel,
                          const GramMatrix<Scalar>& g) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw ArgumentError("krr_fit: lambda must be > 0");
  if (g.size() != data.size()) throw ArgumentError("krr_fit: Gram matrix does not match the data");
  const auto n = static_cast<Scalar>(data.size());
  Vector<Scalar> alpha = regularized_solve(g, n * lambda, data.labels());
  Vector<Scalar> residuals = g.entries() * alpha - data.labels();
  const Scalar objective = residuals.squaredNorm() / n + lambda * alpha.dot(g.entries() * alpha);
  return {RepresenterFunction<Scalar>(kernel, data.pts(), std::move(alpha)), Scalar(lambda), objective,
          std::move(residuals)};
}

template <typename Scalar>
FitResult<Scalar> krr_fit(const DataSet<Scalar>& data, std::type_identity_t<Scalar> lambda, const KernelSpec& kernel) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw ArgumentError("krr_fit: lambda must be > 0");
  return krr_fit(data, lambda, kernel, gram(kernel, data.pts()));
}

/// Smallest-norm f in H with f(x_i) = values[i]; coefficients are G^+ values.
template <typename Scalar, typename Derived>
RepresenterFunction<Scalar> min_norm_interpolant(const PointSet<Scalar>& pts, const Eigen::MatrixBase<Derived>& values,
                                                 const KernelSpec& kernel, const GramMatrix<Scalar>& g,
                                                 std::type_identity_t<Scalar> rank_tol = Scalar(kDefaultRankTol)) {
  if (values.size() != pts.size()) throw ArgumentError("min_norm_interpolant: values length mismatch");
  if (g.size() != pts.size()) throw ArgumentError("min_norm_interpolant: Gram matrix does not match the points");
  return RepresenterFunction<Scalar>(kernel, pts, pinv_solve(g, values, rank_tol));
}

template <typename Scalar, typename Derived>
RepresenterFunction<Scalar> min_norm_interpolant(const PointSet<Scalar>& pts, const Eigen::MatrixBase<Derived>& values,
                                                 const KernelSpec& kernel,
                                                 std::type_identity_t<Scalar> rank_tol = Scalar(kDefaultRankTol)) {
  return min_norm_interpolant(pts, values, kernel, gram(kernel, pts), rank_tol);
}

template <typename Scalar>
using Functional = std::function<Scalar(const RepresenterFunction<Scalar>&)>;

/// Quantities behind the minimizer-closeness argument for two functionals L1, L2
/// with claimed minimizers f1, f2.
template <typename Scalar>
struct ClosenessCertificate {
  Scalar eps{};
  Scalar max_probe_gap{};  // max over probes |L1(f) - L2(f)|
  Scalar minimizer_gap{};  // |L1(f1) - L2(f2)|
  Scalar cross_gap{};      // |L1(f1) - L1(f2)|
  Scalar distance{};       // ||f1 - f2||_H
  std::size_t probe_count = 0;

  bool probes_within_eps() const { return max_probe_gap <= eps; }
  bool minimizers_within_eps() const { return minimizer_gap <= eps; }
  bool cross_within_two_eps() const { return cross_gap <= 2 * eps; }
  bool passed() const { return probes_within_eps() && minimizers_within_eps() && cross_within_two_eps(); }
};

/// {f1, f2, (f1 + f2)/2} plus `per_side` random coefficient perturbations of f1 and of f2.
template <typename Scalar>
std::vector<RepresenterFunction<Scalar>> default_probes(const RepresenterFunction<Scalar>& f1,
                                                        const RepresenterFunction<Scalar>& f2, std::uint64_t seed,
                                                        int per_side = 8) {
  std::vector<RepresenterFunction<Scalar>> probes{f1, f2, linear_combination(Scalar(0.5), f1, Scalar(0.5), f2)};
  rng::Xoshiro256 gen(seed);
  for (const auto* base : {&f1, &f2}) {
    const Scalar scale = Scalar(0.1) * (1 + detail::max_abs(base->coeffs()));
    for (int k = 0; k < per_side; ++k) {
      Vector<Scalar> c = base->coeffs();
      for (Eigen::Index i = 0; i < c.size(); ++i) c(i) += scale * static_cast<Scalar>(gen.normal());
      probes.emplace_back(base->kernel(), base->anchors(), std::move(c));
    }
  }
  return probes;
}

template <typename Scalar>
ClosenessCertificate<Scalar> closeness_certificate(const Functional<Scalar>& l1, const Functional<Scalar>& l2,
                                                   const RepresenterFunction<Scalar>& f1,
                                                   const RepresenterFunction<Scalar>& f2,
                                                   std::type_identity_t<Scalar> eps,
                                                   std::vector<RepresenterFunction<Scalar>> probes = {},
                                                   std::uint64_t seed = 0) {
  auto call = [](const Functional<Scalar>& l, const RepresenterFunction<Scalar>& f, const char* which) {
    Scalar v;
    try {
      v = l(f);
    } catch (const std::exception& e) {
      throw DiagnosticsError(std::string("closeness_certificate: ") + which + " failed: " + e.what());
    }
    if (!std::isfinite(v)) throw DiagnosticsError(std::string("closeness_certificate: ") + which + " is not finite");
    return v;
  };

  if (probes.empty()) probes = default_probes(f1, f2, seed);

  ClosenessCertificate<Scalar> cert;
  cert.eps = eps;
  cert.probe_count = probes.size();
  for (const auto& p : probes) {
    cert.max_probe_gap = std::max(cert.max_probe_gap, std::abs(call(l1, p, "L1") - call(l2, p, "L2")));
  }
  const Scalar l1f1 = call(l1, f1, "L1");
  cert.minimizer_gap = std::abs(l1f1 - call(l2, f2, "L2"));
  cert.cross_gap = std::abs(l1f1 - call(l1, f2, "L1"));
  cert.distance = h_distance(f1, f2);
  return cert;
}

}  // namespace krrstab
