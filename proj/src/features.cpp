#include "lfgnss/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "lfgnss/error.hpp"
#include "lfgnss/ingest.hpp"

namespace lfgnss::features {

namespace {
constexpr double kMaxCondition = 1e12;
constexpr double kMinDowndate = 1e-10;
constexpr double kDirectBelow = 0.05;

using Mat4L = Eigen::Matrix<long double, 4, 4>;
using Vec4L = Eigen::Matrix<long double, 4, 1>;

// Extended precision throughout: GDOP differences of poor geometries lose digits otherwise.
struct Cofactor {
  Eigen::Matrix<long double, Eigen::Dynamic, 4> h;
  Mat4L q;
};

Cofactor full_cofactor(std::span<const double> elas, std::span<const double> azas) {
  if (elas.size() != azas.size()) throw Error(Errc::LengthMismatch, "elevation/azimuth count mismatch");
  if (elas.size() < 4) throw Error(Errc::SingularGeometry, "fewer than 4 satellites");
  Cofactor c;
  c.h.resize(static_cast<Eigen::Index>(elas.size()), 4);
  for (std::size_t n = 0; n < elas.size(); ++n) {
    // Rows rounded in double are off by an ulp, which a critical satellite amplifies by the condition number.
    const long double e = elas[n], a = azas[n];
    c.h.row(static_cast<Eigen::Index>(n)) << std::cos(e) * std::sin(a), std::cos(e) * std::cos(a), std::sin(e), 1.0L;
  }
  const Mat4L normal = c.h.transpose() * c.h;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normal.cast<double>(), Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  if (!(lo > 0.0) || eig.eigenvalues().maxCoeff() / lo > kMaxCondition) {
    throw Error(Errc::SingularGeometry, "DOP normal matrix is singular");
  }
  c.q = normal.inverse();
  return c;
}

DpcResult downdate(const Cofactor& c, std::size_t n) {
  const std::size_t count = static_cast<std::size_t>(c.h.rows());
  if (count == 4) return {0.0, DpcStatus::InsufficientRedundancy};
  const long double gdop_full = std::sqrt(c.q.trace());
  const Vec4L row = c.h.row(static_cast<Eigen::Index>(n)).transpose();
  const Vec4L qh = c.q * row;
  const long double keep = 1.0L - row.dot(qh);
  if (keep < kMinDowndate) return {-static_cast<double>(gdop_full), DpcStatus::SingularGeometry};
  long double trace_partial = 0.0L;
  if (keep > kDirectBelow) {
    // trace((A - h h^T)^-1) = trace(Q) + |Q h|^2 / (1 - h^T Q h)
    trace_partial = c.q.trace() + qh.squaredNorm() / keep;
  } else {
    // Nearly critical satellite: the downdate cancels badly and the reduced normal matrix squares the
    // condition number, so factor the reduced design directly. trace((A^T A)^-1) = |R^-1|_F^2.
    Eigen::Matrix<long double, Eigen::Dynamic, 4> rest(c.h.rows() - 1, 4);
    for (Eigen::Index r = 0, k = 0; r < c.h.rows(); ++r) {
      if (r != static_cast<Eigen::Index>(n)) rest.row(k++) = c.h.row(r);
    }
    const Eigen::HouseholderQR<Eigen::Matrix<long double, Eigen::Dynamic, 4>> qr(rest);
    const Mat4L upper = qr.matrixQR().topRows<4>().triangularView<Eigen::Upper>();
    trace_partial = upper.triangularView<Eigen::Upper>().solve(Mat4L::Identity()).squaredNorm();
  }
  return {static_cast<double>(gdop_full - std::sqrt(trace_partial)), DpcStatus::Ok};
}

}  // namespace

Eigen::MatrixXd dop_design_matrix(std::span<const double> elas, std::span<const double> azas) {
  Eigen::MatrixXd h(static_cast<Eigen::Index>(elas.size()), 4);
  for (std::size_t n = 0; n < elas.size(); ++n) {
    const auto r = static_cast<Eigen::Index>(n);
    h(r, 0) = std::cos(elas[n]) * std::sin(azas[n]);
    h(r, 1) = std::cos(elas[n]) * std::cos(azas[n]);
    h(r, 2) = std::sin(elas[n]);
    h(r, 3) = 1.0;
  }
  return h;
}

DopSet compute_dop(std::span<const double> elas, std::span<const double> azas) {
  const Cofactor c = full_cofactor(elas, azas);
  DopSet d;
  d.hdop = static_cast<double>(std::sqrt(c.q(0, 0) + c.q(1, 1)));
  d.vdop = static_cast<double>(std::sqrt(c.q(2, 2)));
  d.pdop = static_cast<double>(std::sqrt(c.q(0, 0) + c.q(1, 1) + c.q(2, 2)));
  d.gdop = static_cast<double>(std::sqrt(c.q(0, 0) + c.q(1, 1) + c.q(2, 2) + c.q(3, 3)));
  return d;
}

DpcResult compute_dpc(std::span<const double> elas, std::span<const double> azas, std::size_t n) {
  if (n >= elas.size()) throw Error(Errc::LengthMismatch, "satellite index out of range");
  if (elas.size() == 4) return {0.0, DpcStatus::InsufficientRedundancy};
  return downdate(full_cofactor(elas, azas), n);
}

std::vector<DpcResult> compute_dpc_all(std::span<const double> elas, std::span<const double> azas) {
  std::vector<DpcResult> out(elas.size());
  if (elas.size() <= 4) {
    for (auto& r : out) r.status = DpcStatus::InsufficientRedundancy;
    return out;
  }
  const Cofactor c = full_cofactor(elas, azas);
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = downdate(c, n);
  return out;
}

std::vector<double> compute_psr(const EpochRecord& epoch, const coarse::CoarseSolution& sol) {
  if (epoch.observations.size() != sol.corrected.size()) {
    throw Error(Errc::LengthMismatch, "epoch does not match coarse solution");
  }
  const coarse::State7 x = sol.state();
  std::vector<double> psr(epoch.observations.size());
  for (std::size_t n = 0; n < psr.size(); ++n) {
    psr[n] = sol.corrected[n] - coarse::modeled_pseudorange(epoch.observations[n], x);
  }
  return psr;
}

std::vector<SatFeatures> extract(const EpochRecord& epoch, const coarse::CoarseSolution& sol) {
  const std::vector<double> psr = compute_psr(epoch, sol);
  const std::size_t n = epoch.observations.size();
  std::vector<double> elas(n), azas(n);
  for (std::size_t i = 0; i < n; ++i) {
    elas[i] = sol.look[i].elevation;
    azas[i] = sol.look[i].azimuth;
  }
  std::vector<DpcResult> dpc;
  try {
    dpc = compute_dpc_all(elas, azas);
  } catch (const Error& e) {
    if (e.code() != Errc::SingularGeometry) throw;
    dpc.assign(n, DpcResult{0.0, DpcStatus::SingularGeometry});
  }

  std::vector<SatFeatures> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SatObservation& o = epoch.observations[i];
    SatFeatures& f = out[i];
    f.snr = o.snr;
    f.ela = elas[i];
    f.aza = azas[i];
    f.psr = psr[i];
    f.dpc = dpc[i].value;
    f.dpc_status = dpc[i].status;
    const int k = isb_index(o.system);
    if (k >= 0) f.system_onehot[static_cast<std::size_t>(k)] = 1.0;
  }
  return out;
}

Eigen::Matrix<double, 1, kFeatureDim> normalize(const SatFeatures& f, const NormalizationSpec& norms) {
  Eigen::Matrix<double, 1, kFeatureDim> v;
  v << f.snr / norms.snr_scale, f.ela / norms.ela_scale, std::sin(f.aza), std::cos(f.aza),
      std::clamp(f.psr / norms.psr_scale, -norms.psr_clip, norms.psr_clip),
      std::clamp(f.dpc / norms.dpc_scale, -norms.dpc_clip, norms.dpc_clip),
      f.system_onehot[0] + f.system_onehot[1], f.system_onehot[2];
  return v;
}

std::size_t FeatureRow::valid_count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

FeatureRow pack_features(const EpochRecord& epoch, const std::vector<SatFeatures>& feats,
                         const NormalizationSpec& norms, std::size_t n_max) {
  if (feats.size() != epoch.observations.size()) throw Error(Errc::LengthMismatch, "feature count mismatch");
  FeatureRow row;
  row.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_max), kFeatureDim);
  row.mask.assign(n_max, false);
  row.slot_sat.assign(n_max, std::nullopt);
  row.source_index.assign(n_max, -1);

  std::vector<int> keep(feats.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (keep.size() > n_max) {
    // Keep the n_max satellites with the largest |DPC|; ties broken by input order.
    std::vector<int> by_importance = keep;
    std::stable_sort(by_importance.begin(), by_importance.end(), [&](int a, int b) {
      return std::abs(feats[static_cast<std::size_t>(a)].dpc) > std::abs(feats[static_cast<std::size_t>(b)].dpc);
    });
    row.dropped.assign(by_importance.begin() + static_cast<std::ptrdiff_t>(n_max), by_importance.end());
    std::sort(row.dropped.begin(), row.dropped.end());
    std::erase_if(keep, [&](int i) { return std::binary_search(row.dropped.begin(), row.dropped.end(), i); });
  }
  for (std::size_t slot = 0; slot < keep.size(); ++slot) {
    const auto src = static_cast<std::size_t>(keep[slot]);
    row.values.row(static_cast<Eigen::Index>(slot)) = normalize(feats[src], norms);
    row.mask[slot] = true;
    row.slot_sat[slot] = std::make_pair(epoch.observations[src].system, epoch.observations[src].sat_id);
    row.source_index[slot] = keep[slot];
  }
  return row;
}

FeatureRow pack_features(const EpochRecord& epoch, const coarse::CoarseSolution& sol, const NormalizationSpec& norms,
                         std::size_t n_max) {
  return pack_features(epoch, extract(epoch, sol), norms, n_max);
}

Eigen::MatrixXd valid_rows(const FeatureRow& row) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(row.valid_count()), kFeatureDim);
  Eigen::Index r = 0;
  for (std::size_t slot = 0; slot < row.mask.size(); ++slot) {
    if (row.mask[slot]) out.row(r++) = row.values.row(static_cast<Eigen::Index>(slot));
  }
  return out;
}

void write_feature_csv_header(std::ostream& out) {
  out << "t,slot,system,sat_id,snr,ela,aza,psr,dpc,dpc_status,f0,f1,f2,f3,f4,f5,f6,f7\n";
}

void write_feature_csv(std::ostream& out, double t, const EpochRecord& epoch, const std::vector<SatFeatures>& raw,
                       const FeatureRow& row) {
  using ingest::format_double;
  for (std::size_t slot = 0; slot < row.mask.size(); ++slot) {
    if (!row.mask[slot]) continue;
    const auto src = static_cast<std::size_t>(row.source_index[slot]);
    const SatFeatures& f = raw[src];
    out << format_double(t) << ',' << slot << ',' << to_string(epoch.observations[src].system) << ','
        << epoch.observations[src].sat_id << ',' << format_double(f.snr) << ',' << format_double(f.ela) << ','
        << format_double(f.aza) << ',' << format_double(f.psr) << ',' << format_double(f.dpc) << ','
        << static_cast<int>(f.dpc_status);
    for (int c = 0; c < kFeatureDim; ++c) out << ',' << format_double(row.values(static_cast<Eigen::Index>(slot), c));
    out << '\n';
  }
}

}  // namespace lfgnss::features
