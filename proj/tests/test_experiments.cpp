#include <doctest.h>

#include <random>
#include <sstream>

#include "krrstab/experiments.hpp"
#include "krrstab/io.hpp"
#include "krrstab/operators.hpp"

using namespace krrstab;
using RF = RepresenterFunction<double>;

namespace {

RF target_1d(double width = 0.5) {
  return RF(KernelSpec::gaussian(width), PointSet<double>::from_values({0.2, 0.4, 0.65, 0.85}),
            (Eigen::VectorXd(4) << 1.0, 0.7, 0.8, 0.5).finished());
}

DataDistribution unit_dist(const RF& target, NoiseProcess noise) {
  return DataDistribution{Box{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)}, target, noise};
}

Thm2Setup small_thm2(double b_max, double lambda0, double q) {
  const auto pts = PointSet<double>(Eigen::RowVectorXd::LinSpaced(12, 0.0, 1.0));
  const RF f(KernelSpec::gaussian(0.1), PointSet<double>::from_values({0.1, 0.5, 0.8}),
             (Eigen::VectorXd(3) << 1.0, -0.5, 0.7).finished());
  return Thm2Setup{pts, f, NoiseProcess::uniform(b_max), PowerSchedule{lambda0, q}, {1, 10, 100, 1000}, 5, 3, {}};
}

ExperimentReport synthetic(const std::vector<double>& index, std::function<double(double, int)> dist, int trials) {
  ExperimentReport r;
  r.experiment = "thm1";
  for (double i : index)
    for (int t = 0; t < trials; ++t) {
      ReportRow row;
      row.index_var = i;
      row.trial = t;
      row.h_distance = dist(i, t);
      r.rows.push_back(row);
    }
  return r;
}

}  // namespace

TEST_CASE("noise processes stay bounded and centered") {
  for (const auto& noise : {NoiseProcess::uniform(0.8), NoiseProcess::rademacher(0.8),
                            NoiseProcess::truncated_gaussian(0.5, 0.8)}) {
    rng::Xoshiro256 gen(60);
    const int draws = 100000;
    double sum = 0;
    for (int i = 0; i < draws; ++i) {
      const double b = noise.sample(gen);
      REQUIRE(std::abs(b) <= noise.b_max);
      sum += b;
    }
    CHECK(std::abs(sum / draws) <= 5 * noise.b_max / std::sqrt(double(draws)));
  }
  rng::Xoshiro256 gen(61);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(NoiseProcess::rademacher(0.3).sample(gen)) == 0.3);
  CHECK_THROWS_AS(NoiseProcess::uniform(-1), ArgumentError);
  CHECK_THROWS_AS(NoiseProcess::truncated_gaussian(0, 1), ArgumentError);
}

TEST_CASE("sample_dataset") {
  const auto target = target_1d();
  const auto exact = sample_dataset(unit_dist(target, NoiseProcess::uniform(0)), 50, 1);
  CHECK((exact.labels() - evaluate(target, exact.pts())).cwiseAbs().maxCoeff() == 0.0);
  CHECK(exact.pts().coords().minCoeff() >= 0.0);
  CHECK(exact.pts().coords().maxCoeff() < 1.0);

  const auto dist = unit_dist(target, NoiseProcess::uniform(0.5));
  const auto a = sample_dataset(dist, 30, 99);
  const auto b = sample_dataset(dist, 30, 99);
  CHECK(a.pts() == b.pts());
  CHECK(a.labels() == b.labels());
  CHECK_FALSE(sample_dataset(dist, 30, 100).labels() == a.labels());
  CHECK_THROWS_AS(sample_dataset(dist, 0, 1), ArgumentError);
}

TEST_CASE("label mean at a fixed position is the target value") {
  const auto dist = unit_dist(target_1d(), NoiseProcess::uniform(0.5));
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.37);
  rng::Xoshiro256 gen(62);
  const int trials = 10000;
  double sum = 0;
  for (int i = 0; i < trials; ++i) sum += sample_label(dist, x, gen);
  const double sigma = 0.5 / std::sqrt(3.0);
  CHECK(std::abs(sum / trials - evaluate(dist.target, x)) <= 3 * sigma / std::sqrt(double(trials)));
}

TEST_CASE("row seeds do not depend on the trial count") {
  auto setup = small_thm2(0.5, 1, 1);
  setup.trials = 2;
  const auto few = run_thm2(setup);
  setup.trials = 5;
  const auto many = run_thm2(setup);
  for (const auto& r : few.rows) {
    const auto it = std::find_if(many.rows.begin(), many.rows.end(),
                                 [&](const ReportRow& m) { return m.index_var == r.index_var && m.trial == r.trial; });
    REQUIRE(it != many.rows.end());
    CHECK(it->seed == r.seed);
    CHECK(it->h_distance == r.h_distance);
  }
  CHECK(row_seed(5, 1, 2) == rng::mix64(5, (std::uint64_t{1} << 32) | 2));
}

TEST_CASE("thm2 harness: ordering, bound on every row, residual") {
  const auto report = run_thm2(small_thm2(1.0, 1.0, 1.0));
  CHECK(report.rows.size() == 20);
  CHECK(report.schedule_valid);
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& a = report.rows[i - 1];
    const auto& b = report.rows[i];
    CHECK((a.index_var < b.index_var || (a.index_var == b.index_var && a.trial < b.trial)));
  }
  for (const auto& r : report.rows) {
    CHECK(r.flag.empty());
    CHECK(r.h_distance >= 0);
    CHECK(r.h_distance <= r.shrinkage_term + r.noise_bound + 1e-8);
    CHECK(r.decomposition_residual <= 1e-8);
    CHECK(r.lambda == doctest::Approx(1.0 / r.index_var).epsilon(1e-15));
  }
  const auto med = median_by_index(report);
  CHECK(med.back().median < med.front().median);
}

TEST_CASE("thm2 without noise equals pure shrinkage; tiny lambda gives the interpolant") {
  const auto quiet = run_thm2(small_thm2(0.0, 1.0, 1.0));
  for (const auto& r : quiet.rows) {
    CHECK(r.noise_bound == 0.0);
    CHECK(r.h_distance == doctest::Approx(r.shrinkage_term).epsilon(1e-8));
  }
  const auto limit = run_thm2(small_thm2(0.0, 1e-12, 0.0));
  CHECK_FALSE(limit.schedule_valid);
  for (const auto& r : limit.rows) CHECK(r.h_distance <= 1e-4);
}

TEST_CASE("thm1 harness") {
  Thm1Setup setup{unit_dist(target_1d(), NoiseProcess::uniform(0.5)), PowerSchedule{0.5, 0.3}, {16, 32, 64}, 3, 4, {}};
  const auto report = run_thm1(setup);
  CHECK(report.rows.size() == 9);
  CHECK(report.schedule_valid);
  for (const auto& r : report.rows) {
    CHECK(r.flag.empty());
    CHECK(r.h_distance >= 0);
    CHECK(r.noise_bound == doctest::Approx(0.05).epsilon(1e-12));  // eta / 2
    CHECK(r.beta > 0);
  }
  // p_n depends on the row only through N: strictly decreasing along the grid.
  CHECK(report.rows[0].p_n > report.rows[3].p_n);
  CHECK(report.rows[3].p_n > report.rows[6].p_n);

  setup.schedule.exponent = 0.5;
  CHECK_FALSE(run_thm1(setup).schedule_valid);

  // Noise-free labels, target anchored on exactly the positions the first row will draw.
  const auto probe = unit_dist(target_1d(), NoiseProcess::uniform(0));
  const auto pts = sample_dataset(probe, 6, row_seed(0, 0, 0)).pts();
  const RF on_sample(KernelSpec::gaussian(0.5), pts, (Eigen::VectorXd(6) << 1, -1, 0.5, 0.2, 0, 0.3).finished());
  Thm1Setup degenerate{unit_dist(on_sample, NoiseProcess::uniform(0)), PowerSchedule{1e-12, 0.0}, {6}, 1, 0, {}};
  const auto near = run_thm1(degenerate);
  CHECK(near.rows[0].h_distance <= 1e-4);
}

TEST_CASE("bias estimators") {
  const auto target = target_1d();
  const auto dist = unit_dist(target, NoiseProcess::uniform(0.5));
  CHECK(bias_estimate(target, dist, 1e-12, 300, 1) < 1e-2);

  double prev = 0;
  for (double lambda : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    const double b = bias_estimate(target, dist, lambda, 200, 7);
    const double s = spectral_bias_estimate(target, dist, lambda, 200, 7);
    CHECK(b >= prev - 1e-9);
    CHECK(std::abs(b - s) <= 0.2 * b);
    prev = b;
  }
}

TEST_CASE("rate estimation on synthetic rows") {
  const std::vector<double> grid{1, 10, 100, 1000, 10000};
  auto fit = estimate_rate(synthetic(grid, [](double t, int) { return 3.0 / t; }, 3));
  CHECK(std::abs(fit.slope + 1.0) <= 1e-9);
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(fit.r2 == doctest::Approx(1.0));

  fit = estimate_rate(synthetic(grid, [](double, int) { return 0.25; }, 2));
  CHECK(std::abs(fit.slope) <= 1e-12);

  std::mt19937_64 gen(63);
  std::normal_distribution<double> jitter(0, 0.01);
  const std::vector<double> ns{32, 64, 128, 256, 512, 1024, 2048};
  fit = estimate_rate(synthetic(ns, [&](double n, int) { return 2.0 * std::pow(n, -0.4) * (1 + jitter(gen)); }, 5));
  CHECK(std::abs(fit.slope + 0.4) <= 0.05);

  CHECK_THROWS_AS(estimate_rate(synthetic({1, 2}, [](double, int) { return 1.0; }, 1)), DiagnosticsError);
  CHECK_THROWS_AS(estimate_rate(synthetic({1, 2, 3}, [](double, int) { return 0.0; }, 1)), DiagnosticsError);
}

TEST_CASE("median ignores failed rows") {
  auto r = synthetic({1, 2, 3}, [](double i, int t) { return i + t; }, 3);
  r.rows[1].h_distance = NAN;
  const auto m = median_by_index(r);
  CHECK(m[0].count == 2);
  CHECK(m[0].median == 2.0);  // mean of 1 and 3
  CHECK(m[1].median == 3.0);
}

TEST_CASE("report CSV is deterministic and uses the fixed header") {
  const auto setup = small_thm2(0.5, 1, 1);
  std::ostringstream a, b;
  io::write_report_csv(a, run_thm2(setup), "abc");
  io::write_report_csv(b, run_thm2(setup), "abc");
  CHECK(a.str() == b.str());
  std::istringstream lines(a.str());
  std::string first, header;
  std::getline(lines, first);
  std::getline(lines, header);
  CHECK(first == "# rng=xoshiro256starstar+splitmix64 config_hash=abc");
  CHECK(header == "index_var,lambda,trial,seed,h_distance,shrinkage_term,noise_bound,beta,p_n");
}

TEST_CASE("format_double round trips") {
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(32) == "32");
  CHECK(io::format_double(NAN) == "nan");
  std::mt19937_64 gen(64);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
    CHECK(std::stod(io::format_double(v)) == v);
  }
}

TEST_CASE("dataset CSV parsing") {
  std::istringstream ok("x1,x2,y\n0,1,2\n# note\n\n3,4,5\n");
  const auto d = io::parse_dataset_csv(ok, "mem");
  CHECK(d.size() == 2);
  CHECK(d.pts().dim() == 2);
  CHECK(d.labels()(1) == 5.0);

  std::istringstream bad("0,1\n2,x\n");
  try {
    io::parse_dataset_csv(bad, "mem");
    FAIL("expected an error");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("mem:2") != std::string::npos);
  }
  std::istringstream ragged("0,1\n2,3,4\n");
  CHECK_THROWS_WITH_AS(io::parse_dataset_csv(ragged, "f"), doctest::Contains("f:2"), ArgumentError);
  std::istringstream empty("");
  CHECK_THROWS_AS(io::parse_dataset_csv(empty, "f"), ArgumentError);
  std::istringstream header_only("x,y\n");
  CHECK_THROWS_AS(io::parse_dataset_csv(header_only, "f"), ArgumentError);
}
