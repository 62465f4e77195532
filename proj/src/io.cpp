#include "krrstab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "krrstab/errors.hpp"
#include "krrstab/rng.hpp"

namespace krrstab::io {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

std::string config_hash(const json& config) { return hex64(fnv1a64(config.dump())); }

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const char* what) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ArgumentError(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

double number_field(const json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw ArgumentError(std::string(what) + ": missing '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ArgumentError(std::string(what) + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::vector<double> number_array(const json& j, const char* what) {
  if (!j.is_array()) throw ArgumentError(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ArgumentError(std::string(what) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

json kernel_to_json(const KernelSpec& k) {
  json j;
  j["kind"] = to_string(k.kind);
  switch (k.kind) {
    case KernelKind::gaussian:
      j["width"] = k.width;
      break;
    case KernelKind::polynomial:
      j["degree"] = k.degree;
      j["offset"] = k.offset;
      break;
    case KernelKind::linear:
      break;
  }
  return j;
}

KernelSpec kernel_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("kernel must be an object");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ArgumentError("kernel: missing string 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    reject_unknown(j, {"kind", "width"}, "kernel");
    return KernelSpec::gaussian(number_field(j, "width", "kernel"));
  }
  if (kind == "linear") {
    reject_unknown(j, {"kind"}, "kernel");
    return KernelSpec::linear();
  }
  if (kind == "polynomial") {
    reject_unknown(j, {"kind", "degree", "offset"}, "kernel");
    if (!j.contains("degree") || !j.at("degree").is_number_integer()) {
      throw ArgumentError("kernel: 'degree' must be an integer");
    }
    const double offset = j.contains("offset") ? number_field(j, "offset", "kernel") : 0.0;
    return KernelSpec::polynomial(j.at("degree").get<int>(), offset);
  }
  throw ArgumentError("kernel: unknown kind '" + kind + "'");
}

PointSet<double> points_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ArgumentError("points must be a non-empty array of coordinate arrays");
  std::vector<std::vector<double>> rows;
  rows.reserve(j.size());
  for (const auto& row : j) {
    if (row.is_number()) {
      rows.push_back({row.get<double>()});
    } else {
      rows.push_back(number_array(row, "each point"));
    }
  }
  return PointSet<double>::from_rows(rows);
}

json points_to_json(const PointSet<double>& pts) {
  json out = json::array();
  for (Eigen::Index i = 0; i < pts.size(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < pts.dim(); ++k) row.push_back(pts.coords()(k, i));
    out.push_back(std::move(row));
  }
  return out;
}

json function_to_json(const RepresenterFunction<double>& f) {
  json j;
  j["kernel"] = kernel_to_json(f.kernel());
  j["anchors"] = points_to_json(f.anchors());
  j["coeffs"] = std::vector<double>(f.coeffs().data(), f.coeffs().data() + f.coeffs().size());
  return j;
}

RepresenterFunction<double> function_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("function must be an object");
  reject_unknown(j, {"kernel", "anchors", "coeffs"}, "function");
  for (const char* key : {"kernel", "anchors", "coeffs"}) {
    if (!j.contains(key)) throw ArgumentError(std::string("function: missing '") + key + "'");
  }
  const auto coeffs = number_array(j.at("coeffs"), "function coeffs");
  return RepresenterFunction<double>(kernel_from_json(j.at("kernel")), points_from_json(j.at("anchors")),
                                     Eigen::Map<const Eigen::VectorXd>(coeffs.data(),
                                                                       static_cast<Eigen::Index>(coeffs.size())));
}

json fit_to_json(const FitResult<double>& fit) {
  json j = function_to_json(fit.f);
  j["lambda"] = fit.lambda;
  j["objective"] = fit.objective;
  return j;
}

void write_report_csv(std::ostream& os, const ExperimentReport& report, std::string_view hash) {
  os << "# rng=" << rng::kGeneratorId << " config_hash=" << hash << '\n';
  os << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    os << format_double(r.index_var) << ',' << format_double(r.lambda) << ',' << r.trial << ',' << r.seed << ','
       << format_double(r.h_distance) << ',' << format_double(r.shrinkage_term) << ','
       << format_double(r.noise_bound) << ',' << format_double(r.beta) << ',' << format_double(r.p_n) << '\n';
  }
}

void write_residuals_csv(std::ostream& os, const DataSet<double>& data, const FitResult<double>& fit) {
  os << "index,label,fitted,residual\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double y = data.labels()(i);
    const double r = fit.residuals(i);
    os << i << ',' << format_double(y) << ',' << format_double(y + r) << ',' << format_double(r) << '\n';
  }
}

void write_plot_data(std::ostream& os, const ExperimentReport& report) {
  os << "# log10(" << (report.experiment == "thm2" ? "t" : "N") << ") log10(median h_distance)\n";
  for (const auto& m : median_by_index(report)) {
    if (m.index_var > 0 && m.median > 0) {
      os << format_double(std::log10(m.index_var)) << ' ' << format_double(std::log10(m.median)) << '\n';
    }
  }
}

namespace {

// nlohmann writes NaN as null; keep that explicit.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json summary_json(const ExperimentReport& report, std::string_view hash) {
  json j;
  j["experiment"] = report.experiment;
  j["config_hash"] = std::string(hash);
  j["rng"] = std::string(rng::kGeneratorId);
  j["kernel"] = kernel_to_json(report.kernel);
  j["schedule"] = {{"family", "power"}, {"lambda0", report.schedule.lambda0}, {"exponent", report.schedule.exponent}};
  j["schedule_valid"] = report.schedule_valid;
  j["row_count"] = report.rows.size();

  json medians = json::array();
  for (const auto& m : median_by_index(report)) {
    medians.push_back({{"index_var", m.index_var}, {"median_h_distance", m.median}, {"count", m.count}});
  }
  j["medians"] = std::move(medians);

  try {
    const auto rate = estimate_rate(report);
    j["rate"] = {{"slope", rate.slope}, {"intercept", rate.intercept}, {"r2", rate.r2}};
  } catch (const std::exception& e) {
    j["rate"] = nullptr;
    j["rate_error"] = e.what();
  }

  json flagged = json::array();
  for (const auto& r : report.rows) {
    if (!r.flag.empty()) flagged.push_back({{"index_var", r.index_var}, {"trial", r.trial}, {"flag", r.flag}});
  }
  j["flagged_rows"] = std::move(flagged);

  if (report.experiment == "thm2") {
    double max_resid = 0;
    std::size_t violations = 0;
    for (const auto& r : report.rows) {
      if (std::isfinite(r.decomposition_residual)) max_resid = std::max(max_resid, r.decomposition_residual);
      if (std::isfinite(r.h_distance) && r.h_distance > r.shrinkage_term + r.noise_bound + 1e-8) ++violations;
    }
    j["max_decomposition_residual"] = finite_or_null(max_resid);
    j["bound_violations"] = violations;
  }
  return j;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view field, double& out) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return false;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size() && std::isfinite(out);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

DataSet<double> parse_dataset_csv(std::istream& is, std::string_view source) {
  const std::string where(source);
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(is, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split(body);
    std::vector<double> values(fields.size());
    bool ok = true;
    for (std::size_t i = 0; i < fields.size() && ok; ++i) ok = parse_number(fields[i], values[i]);
    if (!ok) {
      if (!seen_content) {  // header
        seen_content = true;
        width = fields.size();
        continue;
      }
      throw ArgumentError(where + ":" + std::to_string(line_no) + ": malformed row (expected numbers)");
    }
    seen_content = true;
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw ArgumentError(where + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                          " columns, found " + std::to_string(fields.size()));
    }
    if (width < 2) throw ArgumentError(where + ":" + std::to_string(line_no) + ": need at least x1,y");
    labels.push_back(values.back());
    values.pop_back();
    rows.push_back(std::move(values));
  }
  if (is.bad()) throw ArgumentError(where + ": read error");
  if (rows.empty()) throw ArgumentError(where + ": dataset is empty");
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  return DataSet<double>(PointSet<double>::from_rows(rows), std::move(y));
}

}  // namespace krrstab::io
