#include <doctest.h>

#include <random>

#include "krrstab/stability.hpp"

using namespace krrstab;

namespace {

StabilityParams<double> params(double c, double kappa, double m, std::int64_t n, double lambda, double eps) {
  return {c, kappa, m, n, lambda, eps};
}

}  // namespace

TEST_CASE("sigma for the squared loss") {
  CHECK(sigma_admissible_ls(1.0) == 2.0);
  CHECK(sigma_admissible_ls(0.5) == 1.0);
  CHECK_THROWS_AS(sigma_admissible_ls(0.0), ArgumentError);

  std::mt19937_64 gen(50);
  for (double x_max : {0.1, 1.0, 7.0}) {
    std::uniform_real_distribution<double> u(-x_max, x_max);
    const double sigma = sigma_admissible_ls(x_max);
    for (int i = 0; i < 1000; ++i) {
      const double a = u(gen), b = u(gen);
      CHECK(std::abs(a * a - b * b) <= sigma * std::abs(a - b) * (1 + 1e-15));
    }
  }
}

TEST_CASE("beta") {
  CHECK(beta_stability(params(1, 1, 1, 100, 0.01, 1)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(beta_stability(params(2, 1, 1, 1, 4, 1)) == 1.0);
  const auto p = params(1.3, 0.7, 1, 50, 0.2, 0.1);
  auto q = p;
  q.N = 100;
  CHECK(beta_stability(q) == doctest::Approx(beta_stability(p) / 2).epsilon(1e-15));
  CHECK_THROWS_AS(beta_stability(params(1, 1, 1, 0, 1, 1)), ArgumentError);
  CHECK_THROWS_AS(beta_stability(params(1, 1, 1, 10, 0, 1)), ArgumentError);
}

TEST_CASE("deviation probability") {
  const auto p = params(1, 1, 1, 8, 1, 1);
  const auto two_step = stability_probability(p, 0.0);
  CHECK(two_step.value == 1.0);
  CHECK(two_step.vacuous);

  const auto big = params(1, 1, 1, 1000000, 0.1, 0.5);
  const auto combined = stability_probability(big);
  CHECK(combined.value == doctest::Approx(2.592e-3).epsilon(1e-12));
  CHECK_FALSE(combined.vacuous);

  std::mt19937_64 gen(51);
  std::uniform_real_distribution<double> u(0.1, 10);
  for (int i = 0; i < 200; ++i) {
    const auto r = params(u(gen), u(gen), u(gen), 1 + static_cast<std::int64_t>(u(gen) * 1000), u(gen), u(gen));
    const double a = stability_probability(r, beta_stability(r)).value;
    const double b = stability_probability(r).value;
    CHECK(std::abs(a - b) <= 1e-12 * std::abs(b));
  }
  CHECK_THROWS_AS(stability_probability(p, -1.0), ArgumentError);
}

TEST_CASE("sample size precondition") {
  CHECK(params(1, 1, 1, 8, 1, 1).sample_size_sufficient());
  CHECK_FALSE(params(1, 1, 1, 7, 1, 1).sample_size_sufficient());
}

TEST_CASE("variance radius and target eps") {
  CHECK(variance_radius(2.0, 1.0) == 2.0);
  CHECK(variance_radius(0.35, 0.7) == 1.0);
  CHECK(variance_radius(4 * 0.3, 0.9) == doctest::Approx(2 * variance_radius(0.3, 0.9)).epsilon(1e-15));
  CHECK(thm1_eps_for_target(2.0, 2.0) == 1.0);
  CHECK(thm1_eps_for_target(1e-200, 1.0) < 1e-300);

  std::mt19937_64 gen(52);
  std::uniform_real_distribution<double> u(1e-3, 10);
  for (int i = 0; i < 200; ++i) {
    const double eta = u(gen), lambda = u(gen);
    CHECK(std::abs(variance_radius(thm1_eps_for_target(eta, lambda), lambda) - eta / 2) <= 1e-12 * eta);
  }
  CHECK_THROWS_AS(variance_radius(0.0, 1.0), ArgumentError);
  CHECK_THROWS_AS(thm1_eps_for_target(1.0, 0.0), ArgumentError);
}

TEST_CASE("schedule validity") {
  CHECK(schedule_valid_thm1(0.3));
  CHECK_FALSE(schedule_valid_thm1(0.5));
  CHECK_FALSE(schedule_valid_thm1(1.0 / 3.0));
  CHECK_FALSE(schedule_valid_thm1(0.0));
  CHECK(schedule_valid_thm2(1.0));
  CHECK_FALSE(schedule_valid_thm2(3.0));
  CHECK_FALSE(schedule_valid_thm2(2.0));
  CHECK_FALSE(schedule_valid_thm2(0.0));
}

TEST_CASE("p_n vanishes along valid schedules") {
  // With eps_N = eta^2 lambda_N / 8 and lambda_N = lambda0 N^-p, p_N scales like N^{-(1-3p)}.
  for (double p : {0.1, 0.2, 0.3}) {
    const PowerSchedule s{0.5, p};
    double prev = INFINITY, first = 0;
    for (std::int64_t n = 32; n <= (std::int64_t{1} << 30); n *= 4) {
      const double lambda = s(static_cast<double>(n));
      const auto q = params(2, 1, 1, n, lambda, thm1_eps_for_target(0.1, lambda));
      const double v = stability_probability(q).value;
      CHECK(v < prev);
      if (n == 32) first = v;
      prev = v;
    }
    // Twelve factors of four in N: the decay follows the exponent 1 - 3p up to a lower-order term.
    CHECK(prev / first == doctest::Approx(std::pow(4.0, -12 * (1 - 3 * p))).epsilon(0.02));
  }
  // p = 1/3 keeps N lambda^3 constant: p_N stays bounded away from zero.
  const PowerSchedule flat{0.5, 1.0 / 3.0};
  const auto at = [&](std::int64_t n) {
    const double lambda = flat(static_cast<double>(n));
    return stability_probability(params(2, 1, 1, n, lambda, thm1_eps_for_target(0.1, lambda))).value;
  };
  CHECK(at(1 << 30) > 0.5 * at(32));
}

TEST_CASE("homogeneity") {
  const auto p = params(1.5, 0.8, 2.0, 40, 0.3, 0.2);
  const double s = 3.0;
  auto q = p;
  q.C *= s;
  CHECK(beta_stability(q) == doctest::Approx(s * s * beta_stability(p)).epsilon(1e-14));
  q = p;
  q.lambda *= s;
  CHECK(beta_stability(q) == doctest::Approx(beta_stability(p) / s).epsilon(1e-14));
  q = p;
  q.eps *= s;
  CHECK(stability_probability(q).value == doctest::Approx(stability_probability(p).value / (s * s)).epsilon(1e-14));
  CHECK(variance_radius(s * 0.2, s * 0.3) == doctest::Approx(variance_radius(0.2, 0.3)).epsilon(1e-15));
  CHECK(thm1_eps_for_target(s * 0.2, 0.3) == doctest::Approx(s * s * thm1_eps_for_target(0.2, 0.3)).epsilon(1e-15));
}

TEST_CASE("power schedule") {
  const PowerSchedule s{0.5, 0.3};
  CHECK(s(1.0) == 0.5);
  CHECK(s(32.0) == doctest::Approx(0.5 * std::pow(32.0, -0.3)).epsilon(1e-15));
  CHECK_THROWS_AS(s(0.0), ArgumentError);
  CHECK_THROWS_AS((PowerSchedule{0.0, 1.0}.validate()), ArgumentError);
  CHECK(output_bound_estimate(2.0, 4.0) == 4.0);
}
