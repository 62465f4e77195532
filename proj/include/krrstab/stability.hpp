#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "krrstab/errors.hpp"

namespace krrstab {

/// Inputs to the uniform-stability generalization bound.
///   C      bound on the Lipschitz constant sigma_V of the loss
///   kappa  bound on the Gram diagonal
///   M      bound on |f(x)| for every output of the algorithm
///   eps    deviation between empirical and actual risk
template <typename Scalar = double>
struct StabilityParams {
  Scalar C{};
  Scalar kappa{};
  Scalar M{};
  std::int64_t N{};
  Scalar lambda{};
  Scalar eps{};

  void validate() const {
    auto pos = [](Scalar v) { return v > 0 && std::isfinite(v); };
    if (!pos(C) || !pos(kappa) || !pos(M) || N < 1 || !pos(lambda) || !pos(eps)) {
      throw ArgumentError("StabilityParams: C, kappa, M, N, lambda, eps must all be positive");
    }
  }

  /// The deviation bound only applies once N >= 8 M^2 / eps^2.
  bool sample_size_sufficient() const { return static_cast<Scalar>(N) >= 8 * M * M / (eps * eps); }
};

/// Lipschitz constant of the squared loss on |f(x) - y| <= x_max.
template <typename Scalar>
Scalar sigma_admissible_ls(Scalar x_max) {
  if (!(x_max > 0)) throw ArgumentError("sigma_admissible_ls: bound must be > 0");
  return 2 * x_max;
}

/// beta = C^2 kappa^2 / (N lambda)
template <typename Scalar>
Scalar beta_stability(const StabilityParams<Scalar>& p) {
  p.validate();
  return p.C * p.C * p.kappa * p.kappa / (static_cast<Scalar>(p.N) * p.lambda);
}

template <typename Scalar>
struct ProbabilityBound {
  Scalar value;
  bool vacuous;  // value >= 1; reported unclipped
};

/// p_N = (64 M N beta + 8 M^2) / (N eps^2) for a given beta.
template <typename Scalar>
ProbabilityBound<Scalar> stability_probability(const StabilityParams<Scalar>& p, Scalar beta) {
  if (!(p.M > 0) || p.N < 1 || !(p.eps > 0) || !(beta >= 0)) {
    throw ArgumentError("stability_probability: need M, N, eps > 0 and beta >= 0");
  }
  const auto n = static_cast<Scalar>(p.N);
  const Scalar v = (64 * p.M * n * beta + 8 * p.M * p.M) / (n * p.eps * p.eps);
  return {v, v >= 1};
}

/// p_N with beta substituted: (64 M C^2 kappa^2 + 8 M^2 lambda) / (N lambda eps^2).
template <typename Scalar>
ProbabilityBound<Scalar> stability_probability(const StabilityParams<Scalar>& p) {
  p.validate();
  const auto n = static_cast<Scalar>(p.N);
  const Scalar v = (64 * p.M * p.C * p.C * p.kappa * p.kappa + 8 * p.M * p.M * p.lambda) /
                   (n * p.lambda * p.eps * p.eps);
  return {v, v >= 1};
}

/// delta = sqrt(2 eps / lambda): radius within which the empirical minimizer sits around the
/// expected-risk minimizer once the two functionals are eps-close.
template <typename Scalar>
Scalar variance_radius(Scalar eps, Scalar lambda) {
  if (!(eps > 0) || !(lambda > 0)) throw ArgumentError("variance_radius: eps and lambda must be > 0");
  return std::sqrt(2 * eps / lambda);
}

/// eps_N = eta^2 lambda / 8, chosen so that variance_radius(eps_N, lambda) = eta / 2.
template <typename Scalar>
Scalar thm1_eps_for_target(Scalar eta, Scalar lambda) {
  if (!(eta > 0) || !(lambda > 0)) throw ArgumentError("thm1_eps_for_target: eta and lambda must be > 0");
  return eta * eta * lambda / 8;
}

/// lambda_N = lambda0 N^{-p}: lambda_N -> 0 and N lambda_N^3 -> infinity iff 0 < p < 1/3.
inline bool schedule_valid_thm1(double p_exponent) { return p_exponent > 0 && 3 * p_exponent < 1; }

/// lambda_t = lambda0 t^{-q}: lambda_t -> 0 and t sqrt(lambda_t) -> infinity iff 0 < q < 2.
inline bool schedule_valid_thm2(double q_exponent) { return q_exponent > 0 && q_exponent < 2; }

/// Power-law regularization schedule lambda(s) = lambda0 * s^{-exponent}.
struct PowerSchedule {
  double lambda0 = 1.0;
  double exponent = 0.0;

  void validate() const {
    if (!(lambda0 > 0) || !std::isfinite(lambda0)) throw ArgumentError("PowerSchedule: lambda0 must be > 0");
    if (!std::isfinite(exponent)) throw ArgumentError("PowerSchedule: exponent must be finite");
  }

  double operator()(double index) const {
    if (!(index > 0)) throw ArgumentError("PowerSchedule: index must be > 0");
    return lambda0 * std::pow(index, -exponent);
  }
};

/// sup_x |f(x)| <= ||f||_H sqrt(kappa), a usable value for M.
template <typename Scalar>
Scalar output_bound_estimate(Scalar h_norm, Scalar kappa) {
  return h_norm * std::sqrt(kappa);
}

}  // namespace krrstab
