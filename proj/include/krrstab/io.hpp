#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "krrstab/experiments.hpp"
#include "krrstab/kernels.hpp"
#include "krrstab/rkhs.hpp"
#include "krrstab/solver.hpp"

namespace krrstab::io {

using json = nlohmann::json;

inline constexpr std::string_view kReportHeader =
    "index_var,lambda,trial,seed,h_distance,shrinkage_term,noise_bound,beta,p_n";

/// Shortest decimal string that parses back to the same binary64 value. "nan", "inf", "-inf" otherwise.
std::string format_double(double v);

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Hash of the canonical (sorted-key, compact) serialization.
std::string config_hash(const json& config);

json kernel_to_json(const KernelSpec& k);
/// Strict: unknown keys and missing fields raise ArgumentError.
KernelSpec kernel_from_json(const json& j);

json function_to_json(const RepresenterFunction<double>& f);
RepresenterFunction<double> function_from_json(const json& j);

json fit_to_json(const FitResult<double>& fit);

/// [[x11, x12, ...], ...] -> PointSet; every row must share one dimension.
PointSet<double> points_from_json(const json& j);
json points_to_json(const PointSet<double>& pts);

/// Comment line with the generator and config hash, the fixed header, one line per row.
void write_report_csv(std::ostream& os, const ExperimentReport& report, std::string_view hash);

/// index,label,fitted,residual
void write_residuals_csv(std::ostream& os, const DataSet<double>& data, const FitResult<double>& fit);

/// Two columns, log10 index and log10 median distance, for grid points with a positive median.
void write_plot_data(std::ostream& os, const ExperimentReport& report);

json summary_json(const ExperimentReport& report, std::string_view hash);

/// Rows of `x1,...,xd,y`. A first line that does not parse as numbers is taken as a header;
/// blank lines and lines starting with '#' are skipped. Errors name the offending line.
DataSet<double> parse_dataset_csv(std::istream& is, std::string_view source);

}  // namespace krrstab::io
