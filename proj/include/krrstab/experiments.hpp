#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "krrstab/kernels.hpp"
#include "krrstab/rkhs.hpp"
#include "krrstab/rng.hpp"
#include "krrstab/solver.hpp"
#include "krrstab/stability.hpp"

namespace krrstab {

/// Bounded zero-mean label noise; every draw lies in [-b_max, b_max].
struct NoiseProcess {
  enum class Kind { uniform, rademacher, truncated_gaussian };

  Kind kind = Kind::uniform;
  double b_max = 0.0;
  double sd = 1.0;  // truncated_gaussian only

  static NoiseProcess uniform(double b_max);
  static NoiseProcess rademacher(double b_max);
  static NoiseProcess truncated_gaussian(double sd, double b_max);

  void validate() const;
  double sample(rng::Xoshiro256& gen) const;
};

std::string to_string(NoiseProcess::Kind kind);

/// Axis-aligned box [lower, upper] in R^d.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index dim() const { return lower.size(); }
  void validate() const;
};

/// x uniform on `domain`, y = target(x) + noise. The target plays the regression function.
struct DataDistribution {
  Box domain;
  RepresenterFunction<double> target;
  NoiseProcess noise;

  void validate() const;
};

PointSet<double> sample_positions(const Box& domain, Eigen::Index n, rng::Xoshiro256& gen);

/// One label at a fixed position.
double sample_label(const DataDistribution& dist, const Eigen::VectorXd& x, rng::Xoshiro256& gen);

/// N iid pairs. For each point the stream yields its d coordinates, then its noise draw.
DataSet<double> sample_dataset(const DataDistribution& dist, Eigen::Index n, std::uint64_t seed);

/// Constants feeding the beta / p_N report columns; they do not influence any fit.
struct BoundColumns {
  double eta = 0.1;           // target H-distance; eps_N = eta^2 lambda / 8
  double loss_bound = 1.0;    // bound on |f(x) - y|; C = 2 * loss_bound
  double output_bound = 1.0;  // M
};

struct ReportRow {
  double index_var = 0;  // N for thm1, t for thm2
  double lambda = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double h_distance = std::numeric_limits<double>::quiet_NaN();
  double shrinkage_term = std::numeric_limits<double>::quiet_NaN();
  double noise_bound = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double p_n = std::numeric_limits<double>::quiet_NaN();
  double decomposition_residual = std::numeric_limits<double>::quiet_NaN();  // thm2 only
  std::string flag;                                                          // empty when the row is clean
};

struct ExperimentReport {
  std::string experiment;  // "thm1" or "thm2"
  KernelSpec kernel;
  PowerSchedule schedule;
  bool schedule_valid = false;
  std::vector<ReportRow> rows;  // ordered by (index_var, trial)
};

/// Per-row stream seed: mix64(master, (grid_index << 32) | trial). A row's seed depends only on
/// its grid position and trial number, never on the grid length or trial count.
std::uint64_t row_seed(std::uint64_t master, std::size_t grid_index, int trial);

/// Fixed positions, labels f_tilde(x_i) + b_i / t, lambda = schedule(t).
struct Thm2Setup {
  PointSet<double> points;
  RepresenterFunction<double> f_tilde;
  NoiseProcess noise;
  PowerSchedule schedule;
  std::vector<double> t_grid;  // strictly increasing, positive
  int trials = 1;
  std::uint64_t seed = 0;
  BoundColumns bounds;

  void validate() const;
};

/// Columns: h_distance = ||f_fit - fbar||_H, shrinkage_term = ||(P*P/N + lambda)^{-1} lambda fbar||_H,
/// noise_bound = noise_operator_bound(N, t, lambda, ||b||_2), plus the decomposition residual.
ExperimentReport run_thm2(const Thm2Setup& setup);

/// Growing iid samples from `dist`, lambda = schedule(N).
struct Thm1Setup {
  DataDistribution dist;
  PowerSchedule schedule;
  std::vector<std::int64_t> n_grid;  // strictly increasing, >= 1
  int trials = 1;
  std::uint64_t seed = 0;
  BoundColumns bounds;

  void validate() const;
};

/// Columns: h_distance = ||f_fit - target||_H; shrinkage_term = the same distance for a fit to
/// noise-free labels at the trial's positions (empirical bias); noise_bound = variance radius
/// sqrt(2 eps_N / lambda_N) with eps_N = eta^2 lambda_N / 8.
ExperimentReport run_thm1(const Thm1Setup& setup);

/// ||fhat - f_E||_H where fhat is fitted to exact labels f_E(x_j) at M positions drawn from dist.
double bias_estimate(const RepresenterFunction<double>& f_e, const DataDistribution& dist, double lambda,
                     Eigen::Index m, std::uint64_t seed);

/// The same quantity from the spectrum of G_M/M: the component of f_E outside the numerical span of
/// the sample is not shrunk, each eigen-component inside it is scaled by lambda / (gamma/M + lambda).
double spectral_bias_estimate(const RepresenterFunction<double>& f_e, const DataDistribution& dist, double lambda,
                              Eigen::Index m, std::uint64_t seed);

struct GridMedian {
  double index_var;
  double median;
  std::size_t count;
};

/// Median h_distance per grid value over rows with a finite distance.
std::vector<GridMedian> median_by_index(const ExperimentReport& report);

struct RateFit {
  double slope;
  double intercept;
  double r2;
};

/// Least squares line through (log index, log median). Needs >= 3 distinct positive points.
RateFit fit_log_log(const std::vector<GridMedian>& medians);

RateFit estimate_rate(const ExperimentReport& report);

}  // namespace krrstab
