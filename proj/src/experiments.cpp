#include "krrstab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>

#include "krrstab/errors.hpp"
#include "krrstab/operators.hpp"

namespace krrstab {

NoiseProcess NoiseProcess::uniform(double b_max) {
  NoiseProcess p;
  p.kind = Kind::uniform;
  p.b_max = b_max;
  p.validate();
  return p;
}

NoiseProcess NoiseProcess::rademacher(double b_max) {
  NoiseProcess p;
  p.kind = Kind::rademacher;
  p.b_max = b_max;
  p.validate();
  return p;
}

NoiseProcess NoiseProcess::truncated_gaussian(double sd, double b_max) {
  NoiseProcess p;
  p.kind = Kind::truncated_gaussian;
  p.sd = sd;
  p.b_max = b_max;
  p.validate();
  return p;
}

void NoiseProcess::validate() const {
  if (!(b_max >= 0) || !std::isfinite(b_max)) throw ArgumentError("noise: b_max must be >= 0");
  if (kind == Kind::truncated_gaussian && (!(sd > 0) || !std::isfinite(sd))) {
    throw ArgumentError("noise: sd must be > 0");
  }
}

double NoiseProcess::sample(rng::Xoshiro256& gen) const {
  switch (kind) {
    case Kind::uniform:
      return b_max * (2.0 * gen.uniform01() - 1.0);
    case Kind::rademacher:
      return (gen() >> 63) != 0 ? b_max : -b_max;
    case Kind::truncated_gaussian: {
      if (b_max == 0) return 0.0;
      for (;;) {
        const double z = sd * gen.normal();
        if (std::abs(z) <= b_max) return z;
      }
    }
  }
  return 0.0;
}

std::string to_string(NoiseProcess::Kind kind) {
  switch (kind) {
    case NoiseProcess::Kind::uniform: return "uniform";
    case NoiseProcess::Kind::rademacher: return "rademacher";
    case NoiseProcess::Kind::truncated_gaussian: return "truncated_gaussian";
  }
  return "unknown";
}

void Box::validate() const {
  if (lower.size() < 1 || lower.size() != upper.size()) throw ArgumentError("domain: lower/upper must share a dimension >= 1");
  if (!lower.allFinite() || !upper.allFinite()) throw ArgumentError("domain: bounds must be finite");
  if ((lower.array() > upper.array()).any()) throw ArgumentError("domain: lower must not exceed upper");
}

void DataDistribution::validate() const {
  domain.validate();
  noise.validate();
  if (target.dim() != domain.dim()) throw ArgumentError("distribution: target dimension differs from the domain");
}

PointSet<double> sample_positions(const Box& domain, Eigen::Index n, rng::Xoshiro256& gen) {
  if (n < 1) throw ArgumentError("sample_positions: N must be >= 1");
  Eigen::MatrixXd x(domain.dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < domain.dim(); ++k) x(k, i) = gen.uniform(domain.lower(k), domain.upper(k));
  }
  return PointSet<double>(std::move(x));
}

double sample_label(const DataDistribution& dist, const Eigen::VectorXd& x, rng::Xoshiro256& gen) {
  return evaluate(dist.target, x) + dist.noise.sample(gen);
}

DataSet<double> sample_dataset(const DataDistribution& dist, Eigen::Index n, std::uint64_t seed) {
  dist.validate();
  if (n < 1) throw ArgumentError("sample_dataset: N must be >= 1");
  rng::Xoshiro256 gen(seed);
  const Eigen::Index d = dist.domain.dim();
  Eigen::MatrixXd x(d, n);
  Eigen::VectorXd noise(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) x(k, i) = gen.uniform(dist.domain.lower(k), dist.domain.upper(k));
    noise(i) = dist.noise.sample(gen);
  }
  PointSet<double> pts(std::move(x));
  Eigen::VectorXd labels = evaluate(dist.target, pts) + noise;
  return DataSet<double>(std::move(pts), std::move(labels));
}

std::uint64_t row_seed(std::uint64_t master, std::size_t grid_index, int trial) {
  const std::uint64_t key = (static_cast<std::uint64_t>(grid_index) << 32) | static_cast<std::uint32_t>(trial);
  return rng::mix64(master, key);
}

namespace {

void validate_bounds(const BoundColumns& b) {
  if (!(b.eta > 0) || !(b.loss_bound > 0) || !(b.output_bound > 0)) {
    throw ArgumentError("bound columns: eta, loss_bound and output_bound must be > 0");
  }
}

template <typename T>
void validate_grid(const std::vector<T>& grid, T minimum, const char* what) {
  if (grid.empty()) throw ArgumentError(std::string(what) + ": grid must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= minimum)) throw ArgumentError(std::string(what) + ": grid values out of range");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ArgumentError(std::string(what) + ": grid must be strictly increasing");
  }
}

void fill_stability_columns(ReportRow& row, const BoundColumns& b, double kappa, std::int64_t n) {
  StabilityParams<double> p;
  p.C = sigma_admissible_ls(b.loss_bound);
  p.kappa = kappa;
  p.M = b.output_bound;
  p.N = n;
  p.lambda = row.lambda;
  p.eps = thm1_eps_for_target(b.eta, row.lambda);
  row.beta = beta_stability(p);
  row.p_n = stability_probability(p, row.beta).value;
}

void mark_failed(ReportRow& row, const std::exception& e) {
  row.flag = e.what();
  row.h_distance = row.shrinkage_term = row.noise_bound = row.beta = row.p_n = row.decomposition_residual =
      std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void Thm2Setup::validate() const {
  f_tilde.kernel().validate();
  if (f_tilde.dim() != points.dim()) throw ArgumentError("thm2: target dimension differs from the points");
  noise.validate();
  schedule.validate();
  validate_grid(t_grid, std::numeric_limits<double>::min(), "thm2");
  if (trials < 1) throw ArgumentError("thm2: trials must be >= 1");
  validate_bounds(bounds);
}

ExperimentReport run_thm2(const Thm2Setup& setup) {
  setup.validate();
  const KernelSpec& kernel = setup.f_tilde.kernel();
  const EvaluationOperator<double> op(kernel, setup.points);
  const auto& g = op.gram_matrix();
  const Eigen::Index n = op.size();
  const Eigen::VectorXd values = apply_P(op, setup.f_tilde);

  ExperimentReport report;
  report.experiment = "thm2";
  report.kernel = kernel;
  report.schedule = setup.schedule;
  report.schedule_valid = schedule_valid_thm2(setup.schedule.exponent);

  std::string interpolant_error;
  std::optional<RepresenterFunction<double>> fbar;
  try {
    fbar = min_norm_interpolant(setup.points, values, kernel, g);
  } catch (const std::exception& e) {
    interpolant_error = e.what();
  }

  for (std::size_t gi = 0; gi < setup.t_grid.size(); ++gi) {
    const double t = setup.t_grid[gi];
    for (int trial = 0; trial < setup.trials; ++trial) {
      ReportRow row;
      row.index_var = t;
      row.lambda = setup.schedule(t);
      row.trial = trial;
      row.seed = row_seed(setup.seed, gi, trial);

      rng::Xoshiro256 gen(row.seed);
      Eigen::VectorXd b(n);
      for (Eigen::Index i = 0; i < n; ++i) b(i) = setup.noise.sample(gen);

      try {
        if (!fbar) throw InconsistencyError(interpolant_error);
        const DataSet<double> data(setup.points, values + b / t);
        const auto fit = krr_fit(data, row.lambda, kernel, g);
        const auto dist = h_distance_report(fit.f, *fbar);
        row.h_distance = dist.norm;
        if (dist.flagged) row.flag = "negative squared norm clamped";
        row.shrinkage_term = shrinkage_norm(g, fbar->coeffs(), row.lambda, static_cast<double>(n));
        row.noise_bound = noise_operator_bound(n, t, row.lambda, b.norm());
        row.decomposition_residual = thm2_decomposition_residual(op, values, b, t, row.lambda);
        fill_stability_columns(row, setup.bounds, g.kappa(), n);
      } catch (const std::exception& e) {
        mark_failed(row, e);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

void Thm1Setup::validate() const {
  dist.validate();
  schedule.validate();
  validate_grid<std::int64_t>(n_grid, 1, "thm1");
  if (trials < 1) throw ArgumentError("thm1: trials must be >= 1");
  validate_bounds(bounds);
}

ExperimentReport run_thm1(const Thm1Setup& setup) {
  setup.validate();
  const auto& target = setup.dist.target;
  const KernelSpec& kernel = target.kernel();

  ExperimentReport report;
  report.experiment = "thm1";
  report.kernel = kernel;
  report.schedule = setup.schedule;
  report.schedule_valid = schedule_valid_thm1(setup.schedule.exponent);

  for (std::size_t gi = 0; gi < setup.n_grid.size(); ++gi) {
    const std::int64_t n = setup.n_grid[gi];
    for (int trial = 0; trial < setup.trials; ++trial) {
      ReportRow row;
      row.index_var = static_cast<double>(n);
      row.lambda = setup.schedule(static_cast<double>(n));
      row.trial = trial;
      row.seed = row_seed(setup.seed, gi, trial);
      try {
        const auto data = sample_dataset(setup.dist, n, row.seed);
        // Cholesky only: a full eigendecomposition is far too slow at the top of the grid.
        const auto g = gram(kernel, data.pts(), Decompose::deferred);
        Eigen::MatrixXd rhs(n, 2);
        rhs.col(0) = data.labels();
        rhs.col(1) = evaluate(target, data.pts());
        const Eigen::MatrixXd coeffs = regularized_solve(g, static_cast<double>(n) * row.lambda, rhs);

        const RepresenterFunction<double> noisy(kernel, data.pts(), coeffs.col(0));
        const RepresenterFunction<double> clean(kernel, data.pts(), coeffs.col(1));
        const auto dist = h_distance_report(noisy, target);
        const auto bias = h_distance_report(clean, target);
        row.h_distance = dist.norm;
        row.shrinkage_term = bias.norm;
        if (dist.flagged || bias.flagged) row.flag = "negative squared norm clamped";
        row.noise_bound = variance_radius(thm1_eps_for_target(setup.bounds.eta, row.lambda), row.lambda);
        fill_stability_columns(row, setup.bounds, g.kappa(), n);
      } catch (const std::exception& e) {
        mark_failed(row, e);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

double bias_estimate(const RepresenterFunction<double>& f_e, const DataDistribution& dist, double lambda,
                     Eigen::Index m, std::uint64_t seed) {
  if (m < 1) throw ArgumentError("bias_estimate: M must be >= 1");
  if (!(lambda > 0)) throw ArgumentError("bias_estimate: lambda must be > 0");
  dist.domain.validate();
  rng::Xoshiro256 gen(seed);
  const auto pts = sample_positions(dist.domain, m, gen);
  const auto g = gram(f_e.kernel(), pts, Decompose::deferred);
  const Eigen::VectorXd alpha = regularized_solve(g, static_cast<double>(m) * lambda, evaluate(f_e, pts));
  return h_distance(RepresenterFunction<double>(f_e.kernel(), pts, alpha), f_e);
}

double spectral_bias_estimate(const RepresenterFunction<double>& f_e, const DataDistribution& dist, double lambda,
                              Eigen::Index m, std::uint64_t seed) {
  if (m < 1) throw ArgumentError("spectral_bias_estimate: M must be >= 1");
  if (!(lambda > 0)) throw ArgumentError("spectral_bias_estimate: lambda must be > 0");
  dist.domain.validate();
  rng::Xoshiro256 gen(seed);
  const auto pts = sample_positions(dist.domain, m, gen);
  const auto g = gram(f_e.kernel(), pts);
  const auto& eig = g.eigen();
  const auto profile = shrinkage_profile(g, lambda, static_cast<double>(m));

  // Coordinates of f_E along the orthonormal functions u_k = P* q_k / sqrt(gamma_k).
  const Eigen::VectorXd proj = eig.eigenvectors.transpose() * evaluate(f_e, pts);
  const double cutoff = kDefaultRankTol * std::max(eig.largest(), 0.0);
  double in_span = 0.0;
  double shrunk = 0.0;
  for (Eigen::Index k = 0; k < eig.size(); ++k) {
    const double gamma = eig.eigenvalues(k);
    if (!(gamma > cutoff)) continue;
    const double c2 = proj(k) * proj(k) / gamma;
    const double factor = profile[static_cast<std::size_t>(k)].factor;
    in_span += c2;
    shrunk += c2 * factor * factor;
  }
  const double outside = std::max(inner_product(f_e, f_e) - in_span, 0.0);
  return std::sqrt(outside + shrunk);
}

std::vector<GridMedian> median_by_index(const ExperimentReport& report) {
  std::vector<GridMedian> out;
  std::size_t i = 0;
  const auto& rows = report.rows;
  while (i < rows.size()) {
    const double idx = rows[i].index_var;
    std::vector<double> values;
    for (; i < rows.size() && rows[i].index_var == idx; ++i) {
      if (std::isfinite(rows[i].h_distance)) values.push_back(rows[i].h_distance);
    }
    if (values.empty()) continue;
    std::sort(values.begin(), values.end());
    const std::size_t k = values.size();
    const double median = (k % 2 == 1) ? values[k / 2] : 0.5 * (values[k / 2 - 1] + values[k / 2]);
    out.push_back({idx, median, k});
  }
  return out;
}

RateFit fit_log_log(const std::vector<GridMedian>& medians) {
  if (medians.size() < 3) throw DiagnosticsError("estimate_rate: need at least 3 grid values with finite distances");
  std::vector<double> xs, ys;
  for (const auto& m : medians) {
    if (!(m.index_var > 0) || !(m.median > 0)) {
      throw DiagnosticsError("estimate_rate: index values and median distances must be positive");
    }
    xs.push_back(std::log(m.index_var));
    ys.push_back(std::log(m.median));
  }
  const auto n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0)) throw DiagnosticsError("estimate_rate: index values must be distinct");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

RateFit estimate_rate(const ExperimentReport& report) { return fit_log_log(median_by_index(report)); }

}  // namespace krrstab
