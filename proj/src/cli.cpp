#include "krrstab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "krrstab/errors.hpp"
#include "krrstab/experiments.hpp"
#include "krrstab/io.hpp"
#include "krrstab/kernels.hpp"
#include "krrstab/operators.hpp"
#include "krrstab/solver.hpp"
#include "krrstab/stability.hpp"

namespace krrstab::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Shared pieces of the key table.
#define KRR_KERNEL_KEYS                                                                        \
  {"kernel.kind", "required; \"gaussian\" | \"linear\" | \"polynomial\""},                    \
      {"kernel.width", "gaussian only; required, > 0"},                                       \
      {"kernel.degree", "polynomial only; required integer >= 1"},                            \
      {"kernel.offset", "polynomial only; >= 0, default 0"}

#define KRR_DATA_KEYS                                                                          \
  {"data", "object {points, labels}; exactly one of data / data_csv"},                         \
      {"data.points", "array of N coordinate arrays, all of one dimension d >= 1"},            \
      {"data.labels", "array of N finite numbers"},                                            \
      {"data_csv", "path to a CSV file with rows x1,...,xd,y (optional header line)"}

#define KRR_EXPERIMENT_KEYS                                                                    \
  {"noise.kind", "required; \"uniform\" | \"rademacher\" | \"truncated_gaussian\""},          \
      {"noise.b_max", "required, >= 0; every draw lies in [-b_max, b_max]"},                  \
      {"noise.sd", "truncated_gaussian only; required, > 0"},                                 \
      {"schedule.family", "\"power\" (default); lambda = lambda0 * index^-exponent"},         \
      {"schedule.lambda0", "required, > 0"}, {"schedule.exponent", "required, finite"},       \
      {"trials", "integer >= 1, default 1"}, {"seed", "integer in [0, 2^64), default 0"},     \
      {"eta", "> 0, default 0.1; eps_N = eta^2 lambda / 8 for the beta and p_n columns"},     \
      {"loss_bound", "> 0, default 1; bound on |f(x) - y|, C = 2 * loss_bound"},              \
      {"output_bound", "> 0, default 1; M in the p_n column"},                                \
      {"out", "required output directory unless --out is given"}

const std::map<std::string_view, std::vector<ConfigKey>>& key_table() {
  static const std::map<std::string_view, std::vector<ConfigKey>> table{
      {"fit",
       {KRR_KERNEL_KEYS,
        KRR_DATA_KEYS,
        {"lambda", "required, > 0"},
        {"out", "required output directory unless --out is given"}}},
      {"interpolate",
       {KRR_KERNEL_KEYS,
        KRR_DATA_KEYS,
        {"rank_tol", "> 0, default 1e-10; eigenvalues below rank_tol * max are dropped"},
        {"out", "required output directory unless --out is given"}}},
      {"thm2",
       {KRR_KERNEL_KEYS,
        {"points", "required; array of N coordinate arrays (the fixed positions)"},
        {"f_tilde.anchors", "required; array of coordinate arrays, same dimension as points"},
        {"f_tilde.coeffs", "required; one finite number per anchor"},
        {"t_grid", "required; strictly increasing numbers > 0"},
        KRR_EXPERIMENT_KEYS}},
      {"thm1",
       {KRR_KERNEL_KEYS,
        {"domain.lower", "required; array of d finite numbers"},
        {"domain.upper", "required; array of d finite numbers, each >= lower"},
        {"target.anchors", "required; array of coordinate arrays of dimension d"},
        {"target.coeffs", "required; one finite number per anchor"},
        {"n_grid", "required; strictly increasing integers >= 1"},
        KRR_EXPERIMENT_KEYS}},
      {"bounds",
       {{"lambda", "required, > 0"},
        {"eps", "required, > 0"},
        {"output_bound", "required, > 0 (M)"},
        {"C", "> 0; Lipschitz bound of the loss. Exactly one of C / loss_bound"},
        {"loss_bound", "> 0; bound on |f(x) - y|, gives C = 2 * loss_bound"},
        {"kernel", "with points: Gram source (keys as in fit)"},
        {"points", "with kernel: array of coordinate arrays"},
        {"gram", "square symmetric PSD matrix as an array of rows"},
        {"n", "integer >= 1; with kappa, used when neither gram nor points is given"},
        {"kappa", "> 0; overrides the Gram diagonal maximum when given"},
        {"beta", ">= 0, optional plug-in value for the two-step p_n"},
        {"eta", "> 0, optional; adds eps_N = eta^2 lambda / 8 and its radius"},
        {"t", "> 0, optional; with b_max adds the noise bound"},
        {"b_max", ">= 0, optional; with t adds the noise bound for ||b|| = sqrt(N) b_max"},
        {"out", "required output directory unless --out is given"}}},
      {"spectrum",
       {KRR_KERNEL_KEYS,
        {"points", "required; array of N coordinate arrays"},
        {"lambda", "required, > 0"},
        {"scale", "> 0, default N; shrinkage factor lambda / (gamma/scale + lambda)"},
        {"out", "required output directory unless --out is given"}}},
  };
  return table;
}

#undef KRR_KERNEL_KEYS
#undef KRR_DATA_KEYS
#undef KRR_EXPERIMENT_KEYS

// Keys allowed directly under `prefix` ("" for the top level) according to the table.
std::vector<std::string> allowed_keys(std::string_view command, std::string_view prefix) {
  std::vector<std::string> out;
  for (const auto& k : config_keys(command)) {
    std::string_view key = k.key;
    if (!prefix.empty()) {
      if (key.size() <= prefix.size() + 1 || key.substr(0, prefix.size()) != prefix || key[prefix.size()] != '.') {
        continue;
      }
      key.remove_prefix(prefix.size() + 1);
    }
    const auto dot = key.find('.');
    std::string head(key.substr(0, dot));
    if (std::find(out.begin(), out.end(), head) == out.end()) out.push_back(std::move(head));
  }
  return out;
}

std::string join_path(std::string_view prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : std::string(prefix) + "." + std::string(key);
}

void check_object(const json& j, std::string_view command, std::string_view prefix) {
  if (!j.is_object()) throw ConfigError((prefix.empty() ? std::string("config") : std::string(prefix)) + " must be an object");
  const auto allowed = allowed_keys(command, prefix);
  std::vector<std::string> unknown;
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) unknown.push_back(join_path(prefix, key));
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config key(s):";
    for (const auto& u : unknown) msg += " " + u;
    throw ConfigError(msg);
  }
}

void require_fields(const json& j, std::string_view prefix, std::initializer_list<const char*> keys) {
  std::vector<std::string> missing;
  for (const char* k : keys) {
    if (!j.contains(k)) missing.push_back(join_path(prefix, k));
  }
  if (!missing.empty()) {
    std::string msg = "missing required config field(s):";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigError(msg);
  }
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + " must be finite");
  return v;
}

double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0)) throw ConfigError(path + " must be > 0");
  return v;
}

double non_negative(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v >= 0)) throw ConfigError(path + " must be >= 0");
  return v;
}

std::int64_t integer_at_least(const json& j, const std::string& path, std::int64_t minimum) {
  if (!j.is_number_integer()) throw ConfigError(path + " must be an integer");
  const auto v = j.is_number_unsigned() ? static_cast<std::int64_t>(std::min<std::uint64_t>(j.get<std::uint64_t>(), INT64_MAX))
                                        : j.get<std::int64_t>();
  if (v < minimum) throw ConfigError(path + " must be >= " + std::to_string(minimum));
  return v;
}

std::uint64_t seed_value(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw ConfigError("seed must be an integer in [0, 2^64)");
}

template <typename F>
auto as_config(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ArgumentError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

KernelSpec parse_kernel(const json& config, std::string_view command) {
  check_object(config.at("kernel"), command, "kernel");
  return as_config("kernel", [&] { return io::kernel_from_json(config.at("kernel")); });
}

PointSet<double> parse_points(const json& j, const std::string& path) {
  return as_config(path, [&] { return io::points_from_json(j); });
}

Eigen::VectorXd parse_vector(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

RepresenterFunction<double> parse_expansion(const json& config, std::string_view command, const char* key,
                                            const KernelSpec& kernel) {
  const json& j = config.at(key);
  check_object(j, command, key);
  require_fields(j, key, {"anchors", "coeffs"});
  auto anchors = parse_points(j.at("anchors"), std::string(key) + ".anchors");
  auto coeffs = parse_vector(j.at("coeffs"), std::string(key) + ".coeffs");
  return as_config(key, [&] { return RepresenterFunction<double>(kernel, std::move(anchors), std::move(coeffs)); });
}

DataSet<double> parse_data(const json& config, std::string_view command) {
  const bool inline_data = config.contains("data");
  const bool csv = config.contains("data_csv");
  if (inline_data == csv) throw ConfigError("exactly one of data / data_csv is required");
  if (csv) {
    if (!config.at("data_csv").is_string()) throw ConfigError("data_csv must be a path string");
    const auto path = config.at("data_csv").get<std::string>();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open data file '" + path + "'");
    return as_config("data_csv", [&] { return io::parse_dataset_csv(in, path); });
  }
  const json& d = config.at("data");
  check_object(d, command, "data");
  require_fields(d, "data", {"points", "labels"});
  auto pts = parse_points(d.at("points"), "data.points");
  auto labels = parse_vector(d.at("labels"), "data.labels");
  return as_config("data", [&] { return DataSet<double>(std::move(pts), std::move(labels)); });
}

NoiseProcess parse_noise(const json& config, std::string_view command) {
  const json& j = config.at("noise");
  check_object(j, command, "noise");
  require_fields(j, "noise", {"kind", "b_max"});
  if (!j.at("kind").is_string()) throw ConfigError("noise.kind must be a string");
  const auto kind = j.at("kind").get<std::string>();
  const double b_max = non_negative(j.at("b_max"), "noise.b_max");
  if (kind == "truncated_gaussian") {
    require_fields(j, "noise", {"sd"});
    return NoiseProcess::truncated_gaussian(positive(j.at("sd"), "noise.sd"), b_max);
  }
  if (j.contains("sd")) throw ConfigError("noise.sd applies only to truncated_gaussian");
  if (kind == "uniform") return NoiseProcess::uniform(b_max);
  if (kind == "rademacher") return NoiseProcess::rademacher(b_max);
  throw ConfigError("noise.kind: unknown kind '" + kind + "'");
}

PowerSchedule parse_schedule(const json& config, std::string_view command) {
  const json& j = config.at("schedule");
  check_object(j, command, "schedule");
  require_fields(j, "schedule", {"lambda0", "exponent"});
  if (j.contains("family") && j.at("family") != "power") throw ConfigError("schedule.family must be \"power\"");
  PowerSchedule s;
  s.lambda0 = positive(j.at("lambda0"), "schedule.lambda0");
  s.exponent = number(j.at("exponent"), "schedule.exponent");
  return s;
}

BoundColumns parse_bound_columns(const json& config) {
  BoundColumns b;
  if (config.contains("eta")) b.eta = positive(config.at("eta"), "eta");
  if (config.contains("loss_bound")) b.loss_bound = positive(config.at("loss_bound"), "loss_bound");
  if (config.contains("output_bound")) b.output_bound = positive(config.at("output_bound"), "output_bound");
  return b;
}

int parse_trials(const json& config) {
  if (!config.contains("trials")) return 1;
  const auto v = integer_at_least(config.at("trials"), "trials", 1);
  if (v > 1000000) throw ConfigError("trials must be <= 1000000");
  return static_cast<int>(v);
}

std::string require_out(const json& config) {
  if (!config.contains("out")) throw ConfigError("missing required config field(s): out");
  if (!config.at("out").is_string() || config.at("out").get<std::string>().empty()) {
    throw ConfigError("out must be a non-empty path string");
  }
  return config.at("out").get<std::string>();
}

/// Collects outputs in memory and publishes them with write-to-temp + rename.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  void add(std::string name, std::string contents) { files_.emplace_back(std::move(name), std::move(contents)); }

  std::vector<fs::path> commit() {
    std::vector<fs::path> temps;
    std::vector<fs::path> finals;
    try {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
      for (const auto& [name, contents] : files_) {
        const fs::path tmp = dir_ / ("." + name + ".tmp");
        temps.push_back(tmp);
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write '" + tmp.string() + "'");
        os << contents;
        os.close();
        if (!os) throw IoError("write failed for '" + tmp.string() + "'");
      }
      for (std::size_t i = 0; i < files_.size(); ++i) {
        const fs::path dest = dir_ / files_[i].first;
        fs::rename(temps[i], dest, ec);
        if (ec) throw IoError("cannot move output into place at '" + dest.string() + "': " + ec.message());
        finals.push_back(dest);
      }
    } catch (...) {
      std::error_code ignore;
      for (const auto& p : temps) fs::remove(p, ignore);
      for (const auto& p : finals) fs::remove(p, ignore);
      throw;
    }
    return finals;
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<fs::path> cmd_fit(const json& config, const fs::path& out) {
  require_fields(config, "", {"kernel", "lambda"});
  const auto kernel = parse_kernel(config, "fit");
  const double lambda = positive(config.at("lambda"), "lambda");
  const auto data = parse_data(config, "fit");
  const auto fit = as_config("fit", [&] { return krr_fit(data, lambda, kernel); });

  std::ostringstream residuals;
  io::write_residuals_csv(residuals, data, fit);
  OutputSet files(out);
  files.add("fit.json", dump(io::fit_to_json(fit)));
  files.add("residuals.csv", residuals.str());
  return files.commit();
}

std::vector<fs::path> cmd_interpolate(const json& config, const fs::path& out) {
  require_fields(config, "", {"kernel"});
  const auto kernel = parse_kernel(config, "interpolate");
  const double rank_tol = config.contains("rank_tol") ? positive(config.at("rank_tol"), "rank_tol") : kDefaultRankTol;
  const auto data = parse_data(config, "interpolate");
  const auto f = min_norm_interpolant(data.pts(), data.labels(), kernel, rank_tol);

  json j = io::function_to_json(f);
  j["rank_tol"] = rank_tol;
  j["max_abs_residual"] = detail::max_abs(Eigen::VectorXd(evaluate(f, data.pts()) - data.labels()));
  j["h_norm"] = rkhs_norm(f);
  OutputSet files(out);
  files.add("interpolant.json", dump(j));
  return files.commit();
}

std::vector<fs::path> write_experiment(const ExperimentReport& report, const json& hashed, const fs::path& out) {
  const auto hash = io::config_hash(hashed);
  std::ostringstream csv, plot;
  io::write_report_csv(csv, report, hash);
  io::write_plot_data(plot, report);
  json summary = io::summary_json(report, hash);
  summary["config"] = hashed;

  OutputSet files(out);
  files.add("report.csv", csv.str());
  files.add("summary.json", dump(summary));
  files.add("plot.dat", plot.str());
  return files.commit();
}

std::vector<fs::path> cmd_thm2(const json& config, const json& hashed, const fs::path& out) {
  require_fields(config, "", {"kernel", "points", "f_tilde", "noise", "schedule", "t_grid"});
  const auto kernel = parse_kernel(config, "thm2");
  auto pts = parse_points(config.at("points"), "points");
  auto f_tilde = parse_expansion(config, "thm2", "f_tilde", kernel);
  auto noise = parse_noise(config, "thm2");
  const auto schedule = parse_schedule(config, "thm2");
  const auto& grid = config.at("t_grid");
  if (!grid.is_array() || grid.empty()) throw ConfigError("t_grid must be a non-empty array");
  std::vector<double> t_grid;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    t_grid.push_back(positive(grid[i], "t_grid[" + std::to_string(i) + "]"));
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) throw ConfigError("t_grid must be strictly increasing");
  }
  Thm2Setup setup{std::move(pts), std::move(f_tilde), noise, schedule, std::move(t_grid), parse_trials(config),
                  config.contains("seed") ? seed_value(config.at("seed")) : 0, parse_bound_columns(config)};
  as_config("thm2", [&] { setup.validate(); });
  return write_experiment(run_thm2(setup), hashed, out);
}

std::vector<fs::path> cmd_thm1(const json& config, const json& hashed, const fs::path& out) {
  require_fields(config, "", {"kernel", "domain", "target", "noise", "schedule", "n_grid"});
  const auto kernel = parse_kernel(config, "thm1");
  const json& dom = config.at("domain");
  check_object(dom, "thm1", "domain");
  require_fields(dom, "domain", {"lower", "upper"});
  Box box{parse_vector(dom.at("lower"), "domain.lower"), parse_vector(dom.at("upper"), "domain.upper")};
  as_config("domain", [&] { box.validate(); });
  auto target = parse_expansion(config, "thm1", "target", kernel);
  auto noise = parse_noise(config, "thm1");
  const auto schedule = parse_schedule(config, "thm1");
  const auto& grid = config.at("n_grid");
  if (!grid.is_array() || grid.empty()) throw ConfigError("n_grid must be a non-empty array");
  std::vector<std::int64_t> n_grid;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    n_grid.push_back(integer_at_least(grid[i], "n_grid[" + std::to_string(i) + "]", 1));
    if (i > 0 && !(n_grid[i] > n_grid[i - 1])) throw ConfigError("n_grid must be strictly increasing");
  }
  Thm1Setup setup{DataDistribution{std::move(box), std::move(target), noise},
                  schedule,
                  std::move(n_grid),
                  parse_trials(config),
                  config.contains("seed") ? seed_value(config.at("seed")) : 0,
                  parse_bound_columns(config)};
  as_config("thm1", [&] { setup.validate(); });
  return write_experiment(run_thm1(setup), hashed, out);
}

json probability_json(const ProbabilityBound<double>& p) { return {{"value", p.value}, {"vacuous", p.vacuous}}; }

std::vector<fs::path> cmd_bounds(const json& config, const json& hashed, const fs::path& out) {
  require_fields(config, "", {"lambda", "eps", "output_bound"});
  const double lambda = positive(config.at("lambda"), "lambda");
  const double eps = positive(config.at("eps"), "eps");
  const double m = positive(config.at("output_bound"), "output_bound");
  const bool has_c = config.contains("C");
  if (has_c == config.contains("loss_bound")) throw ConfigError("exactly one of C / loss_bound is required");
  const double c = has_c ? positive(config.at("C"), "C")
                         : sigma_admissible_ls(positive(config.at("loss_bound"), "loss_bound"));

  json report;
  report["inputs"] = hashed;

  std::int64_t n = 0;
  double kappa = 0;
  std::optional<GramMatrix<double>> g;
  const bool has_points = config.contains("points") || config.contains("kernel");
  if (has_points + config.contains("gram") + config.contains("n") != 1) {
    throw ConfigError("exactly one Gram source is required: kernel+points, gram, or n+kappa");
  }
  if (has_points) {
    require_fields(config, "", {"kernel", "points"});
    const auto kernel = parse_kernel(config, "bounds");
    const auto pts = parse_points(config.at("points"), "points");
    g = gram(kernel, pts);
  } else if (config.contains("gram")) {
    const json& rows = config.at("gram");
    if (!rows.is_array() || rows.empty()) throw ConfigError("gram must be a non-empty array of rows");
    const auto size = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd a(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
      const auto row = parse_vector(rows[static_cast<std::size_t>(i)], "gram[" + std::to_string(i) + "]");
      if (row.size() != size) throw ConfigError("gram must be square");
      a.row(i) = row.transpose();
    }
    if (!a.isApprox(a.transpose(), 0.0) && (a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * a.cwiseAbs().maxCoeff()) {
      throw ConfigError("gram must be symmetric");
    }
    g = GramMatrix<double>(a);
  } else {
    require_fields(config, "", {"n", "kappa"});
    n = integer_at_least(config.at("n"), "n", 1);
  }
  if (g) {
    n = g->size();
    kappa = g->kappa();
    report["operator_norm_bound"] = operator_norm_bound_P(*g);
    report["operator_norm"] = operator_norm_P(*g);
    report["spectral_filter_norm"] = spectral_filter_norm(g->eigen(), n, lambda);
  }
  if (config.contains("kappa")) kappa = positive(config.at("kappa"), "kappa");
  if (!(kappa > 0)) throw DiagnosticsError("kappa is zero: the Gram diagonal vanishes");

  StabilityParams<double> p{c, kappa, m, n, lambda, eps};
  const double beta = beta_stability(p);
  report["n"] = n;
  report["kappa"] = kappa;
  report["C"] = c;
  report["beta"] = beta;
  report["p_n"] = probability_json(stability_probability(p, beta));
  report["p_n_combined"] = probability_json(stability_probability(p));
  if (config.contains("beta")) {
    report["p_n_given_beta"] = probability_json(stability_probability(p, non_negative(config.at("beta"), "beta")));
  }
  report["sample_size_sufficient"] = p.sample_size_sufficient();
  report["variance_radius"] = variance_radius(eps, lambda);
  const auto fm = filter_max(static_cast<Eigen::Index>(n), lambda);
  report["filter_max"] = {{"argmax", fm.argmax}, {"max_value", fm.max_value}};
  report["spectral_filter_bound"] = std::sqrt(static_cast<double>(n)) / (2 * std::sqrt(lambda));
  if (config.contains("eta")) {
    const double eps_n = thm1_eps_for_target(positive(config.at("eta"), "eta"), lambda);
    report["eps_for_target"] = eps_n;
    report["variance_radius_at_target"] = variance_radius(eps_n, lambda);
  }
  if (config.contains("t") != config.contains("b_max")) throw ConfigError("t and b_max must be given together");
  if (config.contains("t")) {
    const double t = positive(config.at("t"), "t");
    const double b_max = non_negative(config.at("b_max"), "b_max");
    report["noise_bound"] =
        noise_operator_bound(static_cast<Eigen::Index>(n), t, lambda, std::sqrt(static_cast<double>(n)) * b_max);
  }

  OutputSet files(out);
  files.add("bounds.json", dump(report));
  return files.commit();
}

std::vector<fs::path> cmd_spectrum(const json& config, const fs::path& out) {
  require_fields(config, "", {"kernel", "points", "lambda"});
  const auto kernel = parse_kernel(config, "spectrum");
  const auto pts = parse_points(config.at("points"), "points");
  const double lambda = positive(config.at("lambda"), "lambda");
  const double scale = config.contains("scale") ? positive(config.at("scale"), "scale") : static_cast<double>(pts.size());
  const auto g = gram(kernel, pts);

  json shrink = json::array();
  for (const auto& s : shrinkage_profile(g, lambda, scale)) shrink.push_back({{"eigenvalue", s.eigenvalue}, {"factor", s.factor}});
  const auto& ev = g.eigen().eigenvalues;
  json j;
  j["n"] = g.size();
  j["kappa"] = g.kappa();
  j["lambda"] = lambda;
  j["scale"] = scale;
  j["eigenvalues"] = std::vector<double>(ev.data(), ev.data() + ev.size());
  j["shrinkage"] = std::move(shrink);
  j["operator_norm"] = operator_norm_P(g);
  j["operator_norm_bound"] = operator_norm_bound_P(g);
  j["spectral_filter_norm"] = spectral_filter_norm(g.eigen(), g.size(), lambda);
  j["spectral_filter_bound"] = std::sqrt(static_cast<double>(g.size())) / (2 * std::sqrt(lambda));

  OutputSet files(out);
  files.add("spectrum.json", dump(j));
  return files.commit();
}

std::string help_footer(std::string_view command) {
  std::ostringstream os;
  os << "Config keys (" << command << "):\n";
  for (const auto& k : config_keys(command)) os << "  " << k.key << "  " << k.constraint << "\n";
  return os.str();
}

}  // namespace

const std::vector<ConfigKey>& config_keys(std::string_view command) {
  static const std::vector<ConfigKey> none;
  const auto& table = key_table();
  const auto it = table.find(command);
  return it == table.end() ? none : it->second;
}

std::vector<fs::path> execute(std::string_view command, json config, const Overrides& overrides) {
  if (config_keys(command).empty()) throw ConfigError("unknown command '" + std::string(command) + "'");
  if (overrides.seed) {
    if (command != "thm1" && command != "thm2") throw ConfigError("--seed applies only to thm1 and thm2");
    if (config.is_object()) config["seed"] = *overrides.seed;
  }
  if (overrides.out && config.is_object()) config["out"] = *overrides.out;
  check_object(config, command, "");
  const fs::path out = require_out(config);

  json hashed = config;
  hashed.erase("out");

  if (command == "fit") return cmd_fit(config, out);
  if (command == "interpolate") return cmd_interpolate(config, out);
  if (command == "thm2") return cmd_thm2(config, hashed, out);
  if (command == "thm1") return cmd_thm1(config, hashed, out);
  if (command == "bounds") return cmd_bounds(config, hashed, out);
  return cmd_spectrum(config, out);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kernel ridge regression and stability experiments"};
  app.require_subcommand(1);
  std::string all_keys = "Each command reads one JSON config (--config PATH).\n\n";
  for (const auto& [name, keys] : key_table()) all_keys += help_footer(name) + "\n";
  app.footer(all_keys);

  struct Parsed {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
  };
  Parsed parsed;
  const std::vector<std::pair<const char*, const char*>> commands{
      {"fit", "fit a regularized least squares model"},
      {"interpolate", "minimum-norm interpolant"},
      {"thm1", "convergence harness with iid samples of growing size"},
      {"thm2", "convergence harness with fixed points and vanishing noise"},
      {"bounds", "evaluate the stability and operator bounds"},
      {"spectrum", "eigenvalues of G and shrinkage factors"},
  };
  std::map<std::string, CLI::Option*> seed_opts, out_opts;
  for (const auto& [name, desc] : commands) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", parsed.config_path, "JSON config file")->required();
    out_opts[name] = sub->add_option("--out", parsed.out, "output directory (overrides config 'out')");
    if (std::string_view(name) == "thm1" || std::string_view(name) == "thm2") {
      seed_opts[name] = sub->add_option("--seed", parsed.seed, "master seed (overrides config 'seed')");
    }
    sub->footer(help_footer(name));
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  Overrides overrides;
  if (out_opts[command]->count() > 0) overrides.out = parsed.out;
  if (seed_opts.count(command) && seed_opts[command]->count() > 0) overrides.seed = parsed.seed;

  try {
    std::ifstream in(parsed.config_path);
    if (!in) throw IoError("cannot open config '" + parsed.config_path + "'");
    json config;
    try {
      config = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    for (const auto& p : execute(command, std::move(config), overrides)) out << p.string() << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ArgumentError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << "\n";
    return kDiagnosticsError;
  }
}

}  // namespace krrstab::cli
