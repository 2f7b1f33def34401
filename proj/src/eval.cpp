#include "lfgnss/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "lfgnss/error.hpp"
#include "lfgnss/ingest.hpp"

namespace lfgnss::eval {

ErrorSeries enu_errors(const Solutions& solutions, const std::vector<std::optional<EcefPos>>& truth,
                       const GeodeticPos& reference) {
  if (solutions.size() != truth.size()) throw Error(Errc::LengthMismatch, "solutions and truth differ in length");
  ErrorSeries s;
  s.reference = reference;
  const Eigen::Matrix3d rot = enu_rotation(reference);
  for (std::size_t k = 0; k < solutions.size(); ++k) {
    const bool ok = solutions[k] && truth[k] && solutions[k]->vec().allFinite();
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    if (ok) d = rot * (solutions[k]->vec() - truth[k]->vec());
    s.e.push_back(d.x());
    s.n.push_back(d.y());
    s.u.push_back(d.z());
    s.valid.push_back(ok);
  }
  return s;
}

ErrorSeries enu_errors(const Solutions& solutions, const std::vector<std::optional<EcefPos>>& truth) {
  for (const auto& p : truth) {
    if (p) return enu_errors(solutions, truth, ecef_to_geodetic(*p));
  }
  throw Error(Errc::NoGroundTruth, "no truth position to anchor the ENU frame");
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error(Errc::NoValidEpochs, "quantile of nothing");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

RunReport summarize(const ErrorSeries& series, const std::string& method) {
  RunReport r;
  r.method = method;
  r.reference = series.reference;
  double se = 0.0, sn = 0.0, su = 0.0;
  std::vector<double> err3;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (!series.valid[k]) {
      ++r.epochs_skipped;
      continue;
    }
    se += series.e[k] * series.e[k];
    sn += series.n[k] * series.n[k];
    su += series.u[k] * series.u[k];
    err3.push_back(std::sqrt(series.e[k] * series.e[k] + series.n[k] * series.n[k] + series.u[k] * series.u[k]));
  }
  r.epochs_used = err3.size();
  if (r.epochs_used == 0) throw Error(Errc::NoValidEpochs, "no valid epochs to summarize");
  const auto n = static_cast<double>(r.epochs_used);
  r.rmse_e = std::sqrt(se / n);
  r.rmse_n = std::sqrt(sn / n);
  r.rmse_u = std::sqrt(su / n);
  r.rmse_2d = std::sqrt((se + sn) / n);
  r.rmse_3d = std::sqrt((se + sn + su) / n);
  std::sort(err3.begin(), err3.end());
  r.p95_3d = quantile(err3, 0.95);
  for (int i = 1; i <= kCdfPoints; ++i) r.cdf_3d.push_back(quantile(err3, static_cast<double>(i) / kCdfPoints));
  return r;
}

Solutions run_baseline_ls(const pipeline::PreparedDataset& prepared) {
  Solutions out;
  for (const pipeline::PreparedEpoch& ep : prepared.epochs) {
    if (ep.ok) {
      out.push_back(ep.coarse.rx_pos);
    } else {
      out.push_back(std::nullopt);
    }
  }
  return out;
}

Solutions run_baseline_ls(const std::vector<EpochRecord>& epochs, const pipeline::PrepConfig& prep) {
  return run_baseline_ls(pipeline::prepare(epochs, prep));
}

Solutions run_baseline_ekf(const pipeline::PreparedDataset& prepared, const pipeline::FilterConfig& filter, double a,
                           double b) {
  return pipeline::positions(pipeline::run_filter(prepared, pipeline::ElevationModel(a, b), filter));
}

Solutions run_lf(const pipeline::PreparedDataset& prepared, const net::NetParams& params,
                 const pipeline::FilterConfig& filter) {
  return pipeline::positions(pipeline::run_filter(prepared, pipeline::NetworkModel(params), filter));
}

std::vector<std::optional<EcefPos>> truth_of(const std::vector<EpochRecord>& epochs) {
  std::vector<std::optional<EcefPos>> out;
  for (const EpochRecord& e : epochs) out.push_back(e.truth);
  return out;
}

std::vector<std::optional<EcefPos>> truth_of(const pipeline::PreparedDataset& prepared) {
  std::vector<std::optional<EcefPos>> out;
  for (const pipeline::PreparedEpoch& e : prepared.epochs) out.push_back(e.truth);
  return out;
}

void write_report_header(std::ostream& out) {
  out << "method,rmse_e,rmse_n,rmse_u,rmse_2d,rmse_3d,p95_3d,epochs_used,epochs_skipped,ref_lat,ref_lon,ref_height\n";
}

void write_report_row(std::ostream& out, const RunReport& r) {
  using ingest::format_double;
  out << r.method << ',' << format_double(r.rmse_e) << ',' << format_double(r.rmse_n) << ','
      << format_double(r.rmse_u) << ',' << format_double(r.rmse_2d) << ',' << format_double(r.rmse_3d) << ','
      << format_double(r.p95_3d) << ',' << r.epochs_used << ',' << r.epochs_skipped << ','
      << format_double(r.reference.lat) << ',' << format_double(r.reference.lon) << ','
      << format_double(r.reference.height) << '\n';
}

void write_cdf_csv(std::ostream& out, const std::vector<RunReport>& reports) {
  using ingest::format_double;
  out << "quantile";
  for (const RunReport& r : reports) out << ',' << r.method;
  out << '\n';
  for (int i = 0; i < kCdfPoints; ++i) {
    out << format_double(static_cast<double>(i + 1) / kCdfPoints);
    for (const RunReport& r : reports) out << ',' << format_double(r.cdf_3d[static_cast<std::size_t>(i)]);
    out << '\n';
  }
}

void write_solutions_csv(std::ostream& out, const std::vector<double>& t, const Solutions& sol,
                         const ErrorSeries& errors) {
  using ingest::format_double;
  out << "t,x,y,z,e,n,u,valid\n";
  for (std::size_t k = 0; k < sol.size(); ++k) {
    out << format_double(t[k]);
    if (sol[k]) {
      out << ',' << format_double(sol[k]->x) << ',' << format_double(sol[k]->y) << ',' << format_double(sol[k]->z);
    } else {
      out << ",,,";
    }
    if (k < errors.size() && errors.valid[k]) {
      out << ',' << format_double(errors.e[k]) << ',' << format_double(errors.n[k]) << ','
          << format_double(errors.u[k]) << ",1\n";
    } else {
      out << ",,,,0\n";
    }
  }
}

std::string summary_table(const std::vector<RunReport>& reports) {
  std::string s = "method      E [m]     N [m]     U [m]    2D [m]    3D [m]   p95 [m]   used  skipped\n";
  char line[160];
  for (const RunReport& r : reports) {
    std::snprintf(line, sizeof line, "%-8s %8.3f  %8.3f  %8.3f  %8.3f  %8.3f  %8.3f  %5zu  %7zu\n", r.method.c_str(),
                  r.rmse_e, r.rmse_n, r.rmse_u, r.rmse_2d, r.rmse_3d, r.p95_3d, r.epochs_used, r.epochs_skipped);
    s += line;
  }
  return s;
}

}  // namespace lfgnss::eval
