#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lfgnss/frames.hpp"
#include "lfgnss/network.hpp"
#include "lfgnss/pipeline.hpp"

namespace lfgnss::eval {

struct ErrorSeries {
  std::vector<double> e, n, u;
  std::vector<bool> valid;
  GeodeticPos reference;

  std::size_t size() const { return valid.size(); }
};

/// ENU errors at a fixed reference; epochs without a solution or truth are invalid.
ErrorSeries enu_errors(const std::vector<std::optional<EcefPos>>& solutions,
                       const std::vector<std::optional<EcefPos>>& truth, const GeodeticPos& reference);
/// Reference = first truth position.
ErrorSeries enu_errors(const std::vector<std::optional<EcefPos>>& solutions,
                       const std::vector<std::optional<EcefPos>>& truth);

inline constexpr int kCdfPoints = 100;

struct RunReport {
  std::string method;
  double rmse_e = 0.0, rmse_n = 0.0, rmse_u = 0.0, rmse_2d = 0.0, rmse_3d = 0.0;
  double p95_3d = 0.0;
  std::vector<double> cdf_3d;  // error at quantiles 0.01 .. 1.00
  std::size_t epochs_used = 0;
  std::size_t epochs_skipped = 0;
  GeodeticPos reference;
};

/// Empirical quantile by linear interpolation between order statistics.
double quantile(std::vector<double> sorted_values, double q);

RunReport summarize(const ErrorSeries& series, const std::string& method = "");

using Solutions = std::vector<std::optional<EcefPos>>;

Solutions run_baseline_ls(const std::vector<EpochRecord>& epochs, const pipeline::PrepConfig& prep);
Solutions run_baseline_ls(const pipeline::PreparedDataset& prepared);
Solutions run_baseline_ekf(const pipeline::PreparedDataset& prepared, const pipeline::FilterConfig& filter,
                           double a = 0.3, double b = 0.3);
Solutions run_lf(const pipeline::PreparedDataset& prepared, const net::NetParams& params,
                 const pipeline::FilterConfig& filter);

std::vector<std::optional<EcefPos>> truth_of(const std::vector<EpochRecord>& epochs);
std::vector<std::optional<EcefPos>> truth_of(const pipeline::PreparedDataset& prepared);

void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const RunReport& r);
void write_cdf_csv(std::ostream& out, const std::vector<RunReport>& reports);
void write_solutions_csv(std::ostream& out, const std::vector<double>& t, const Solutions& sol,
                         const ErrorSeries& errors);
std::string summary_table(const std::vector<RunReport>& reports);

}  // namespace lfgnss::eval
