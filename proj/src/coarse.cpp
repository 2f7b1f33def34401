#include "lfgnss/coarse.hpp"

#include <algorithm>
#include <cmath>

#include "lfgnss/error.hpp"

namespace lfgnss::coarse {

void QcConfig::validate() const {
  if (!(elevation_mask >= 0.0 && elevation_mask <= 30.0 * kPi / 180.0)) {
    throw Error(Errc::ConfigError, "elevation mask must lie in [0, 30] degrees");
  }
  if (!(residual_reject_factor >= 2.0)) throw Error(Errc::ConfigError, "residual reject factor must be >= 2");
  if (min_sats_per_system < 1) throw Error(Errc::ConfigError, "min_sats_per_system must be >= 1");
  if (!(min_residual_scale > 0.0)) throw Error(Errc::ConfigError, "min_residual_scale must be positive");
}

State7 CoarseSolution::state() const {
  State7 x;
  x << rx_pos.x, rx_pos.y, rx_pos.z, clock_bias, isb;
  return x;
}

State7 cold_start_state() {
  State7 x = State7::Zero();
  x(0) = wgs84::kSemiMajorAxis;
  return x;
}

double modeled_pseudorange(const SatObservation& obs, const State7& x) {
  const double range = (obs.sat_pos.vec() - x.head<3>()).norm();
  const int k = isb_index(obs.system);
  return range + x(3) + (k >= 0 ? x(4 + k) : 0.0);
}

Eigen::MatrixXd geometry_matrix(const EcefPos& rx, std::span<const SatObservation> obs) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), 7);
  const Eigen::Vector3d r = rx.vec();
  for (std::size_t n = 0; n < obs.size(); ++n) {
    const Eigen::Vector3d d = obs[n].sat_pos.vec() - r;
    const auto row = static_cast<Eigen::Index>(n);
    h.block<1, 3>(row, 0) = -(d / d.norm()).transpose();
    h(row, 3) = 1.0;
    const int k = isb_index(obs[n].system);
    if (k >= 0) h(row, 4 + k) = 1.0;
  }
  return h;
}

CoarseSolution ils_solve(std::span<const SatObservation> obs, std::span<const double> corrected, const State7& x0,
                         const IlsConfig& cfg) {
  if (obs.size() != corrected.size()) throw Error(Errc::LengthMismatch, "observation/correction count mismatch");

  CoarseSolution sol;
  std::vector<int> active = {0, 1, 2, 3};
  for (const SatObservation& o : obs) {
    const int k = isb_index(o.system);
    if (k >= 0) sol.isb_active[static_cast<std::size_t>(k)] = true;
  }
  for (int k = 0; k < 3; ++k) {
    if (sol.isb_active[static_cast<std::size_t>(k)]) active.push_back(4 + k);
  }
  const auto n_obs = static_cast<Eigen::Index>(obs.size());
  const auto n_state = static_cast<Eigen::Index>(active.size());
  if (n_obs < n_state) {
    throw Error(Errc::TooFewSatellites, std::to_string(obs.size()) + " satellites for " +
                                            std::to_string(active.size()) + " unknowns");
  }

  State7 x = x0;
  Eigen::VectorXd l(n_obs);
  Eigen::MatrixXd ha(n_obs, n_state);
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    const Eigen::MatrixXd h = geometry_matrix(EcefPos::from(x.head<3>()), obs);
    for (Eigen::Index n = 0; n < n_obs; ++n) {
      l(n) = corrected[static_cast<std::size_t>(n)] - modeled_pseudorange(obs[static_cast<std::size_t>(n)], x);
    }
    for (Eigen::Index c = 0; c < n_state; ++c) ha.col(c) = h.col(active[static_cast<std::size_t>(c)]);

    const Eigen::MatrixXd normal = ha.transpose() * ha;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > cfg.max_condition) {
      throw Error(Errc::RankDeficient, "normal matrix condition number exceeds limit");
    }
    const Eigen::VectorXd dx = normal.ldlt().solve(ha.transpose() * l);
    for (Eigen::Index c = 0; c < n_state; ++c) x(active[static_cast<std::size_t>(c)]) += dx(c);
    sol.iterations = iter;
    if (!dx.allFinite()) break;
    if (dx.head<3>().norm() < cfg.position_tolerance) {
      sol.converged = true;
      break;
    }
  }

  sol.rx_pos = EcefPos::from(x.head<3>());
  sol.clock_bias = x(3);
  sol.isb = x.tail<3>();
  sol.corrected.assign(corrected.begin(), corrected.end());
  sol.residuals.resize(obs.size());
  sol.los_unit.resize(obs.size());
  sol.look.resize(obs.size());
  const GeodeticPos geo = ecef_to_geodetic(sol.rx_pos);
  const Eigen::Matrix3d rot = enu_rotation(geo);
  for (std::size_t n = 0; n < obs.size(); ++n) {
    sol.residuals[n] = corrected[n] - modeled_pseudorange(obs[n], x);
    const Eigen::Vector3d d = obs[n].sat_pos.vec() - x.head<3>();
    const Eigen::Vector3d enu = rot * d;
    sol.los_unit[n] = enu / enu.norm();
    LookAngles look;
    look.elevation = std::asin(std::clamp(sol.los_unit[n].z(), -1.0, 1.0));
    if (std::abs(look.elevation - kPi / 2) < 1e-9) {
      look.zenith_degenerate = true;
    } else {
      look.azimuth = std::atan2(enu.x(), enu.y());
    }
    sol.look[n] = look;
  }
  return sol;
}

std::vector<double> correct_all(std::span<const SatObservation> obs, const GeodeticPos& rx, double time_of_day,
                                const models::CorrectionConfig& cfg) {
  std::vector<double> out(obs.size());
  for (std::size_t n = 0; n < obs.size(); ++n) out[n] = models::corrected_pseudorange(obs[n], rx, time_of_day, cfg);
  return out;
}

namespace {

double time_of_day(double t) { return t - std::floor(t / 86400.0) * 86400.0; }

bool near_surface(const Eigen::Vector3d& p) {
  const double r = p.norm();
  return r > 6.3e6 && r < 6.5e6;
}

}  // namespace

CoarseSolution solve_with_corrections(std::span<const SatObservation> obs, double t, const State7& x0,
                                      const models::CorrectionConfig& corr, const IlsConfig& cfg) {
  const double tod = time_of_day(t);
  State7 start = x0;
  std::vector<double> z;
  if (near_surface(x0.head<3>())) {
    z = correct_all(obs, ecef_to_geodetic(EcefPos::from(x0.head<3>())), tod, corr);
  } else {
    // Cold start: geometry-free terms only, atmosphere added once a position exists.
    z.resize(obs.size());
    for (std::size_t n = 0; n < obs.size(); ++n) {
      z[n] = obs[n].pseudorange + kSpeedOfLight * obs[n].sat_clock_bias - kSpeedOfLight * obs[n].tgd -
             obs[n].tropo_delay.value_or(0.0) - obs[n].iono_delay.value_or(0.0);
    }
  }
  CoarseSolution first = ils_solve(obs, z, start, cfg);
  if (!first.converged) first = ils_solve(obs, z, first.state(), cfg);
  z = correct_all(obs, ecef_to_geodetic(first.rx_pos), tod, corr);
  return ils_solve(obs, z, first.state(), cfg);
}

std::size_t minimum_satellites(std::span<const SatObservation> obs) {
  std::array<bool, 4> present{};
  for (const SatObservation& o : obs) present[static_cast<std::size_t>(o.system)] = true;
  return 4 + static_cast<std::size_t>(present[1]) + static_cast<std::size_t>(present[2]) +
         static_cast<std::size_t>(present[3]);
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

void require_count(const std::vector<SatObservation>& obs) {
  if (obs.size() < minimum_satellites(obs)) {
    throw Error(Errc::TooFewSatellites, std::to_string(obs.size()) + " satellites remain, need " +
                                            std::to_string(minimum_satellites(obs)));
  }
}

}  // namespace

QcResult quality_control(const EpochRecord& epoch, const std::optional<EcefPos>& prior, const QcConfig& qc,
                         const models::CorrectionConfig& corr, const std::optional<State7>& warm,
                         const IlsConfig& ils) {
  QcResult out;
  out.filtered.t = epoch.t;
  out.filtered.truth = epoch.truth;
  out.filtered.truth_clock = epoch.truth_clock;

  std::optional<GeodeticPos> prior_geo;
  if (prior) prior_geo = ecef_to_geodetic(*prior);
  for (const SatObservation& o : epoch.observations) {
    if (o.snr < qc.snr_min) {
      out.rejected.push_back({o.system, o.sat_id, "snr", o.snr});
      continue;
    }
    if (prior) {
      const double el = elevation_azimuth(*prior, o.sat_pos).elevation;
      if (el < qc.elevation_mask) {
        out.rejected.push_back({o.system, o.sat_id, "elevation", el});
        continue;
      }
    }
    out.filtered.observations.push_back(o);
  }

  std::array<int, 4> counts{};
  for (const SatObservation& o : out.filtered.observations) ++counts[static_cast<std::size_t>(o.system)];
  std::erase_if(out.filtered.observations, [&](const SatObservation& o) {
    const int c = counts[static_cast<std::size_t>(o.system)];
    if (o.system != System::GPS && c < qc.min_sats_per_system) {
      out.rejected.push_back({o.system, o.sat_id, "system-count", static_cast<double>(c)});
      return true;
    }
    return false;
  });
  require_count(out.filtered.observations);

  State7 x0 = warm ? *warm : cold_start_state();
  if (!warm && prior) x0.head<3>() = prior->vec();
  out.solution = solve_with_corrections(out.filtered.observations, epoch.t, x0, corr, ils);

  // Second pass, one satellite at a time. The candidate is the largest externally studentized
  // residual, which still sees biases on high-leverage satellites. It is removed only if its
  // residual against the solution of the others exceeds factor * max(1.4826 * MAD, floor).
  const double tod = time_of_day(epoch.t);
  for (;;) {
    const std::vector<SatObservation>& obs = out.filtered.observations;
    const std::size_t n = obs.size();
    if (n <= minimum_satellites(obs)) break;
    const Eigen::MatrixXd full = geometry_matrix(out.solution.rx_pos, obs);
    std::vector<int> cols = {0, 1, 2, 3};
    for (int k = 0; k < 3; ++k) {
      if (out.solution.isb_active[static_cast<std::size_t>(k)]) cols.push_back(4 + k);
    }
    Eigen::MatrixXd h(full.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) h.col(static_cast<Eigen::Index>(c)) = full.col(cols[c]);
    const Eigen::MatrixXd cof = (h.transpose() * h).inverse();
    const auto dof = static_cast<double>(n) - static_cast<double>(cols.size()) - 1.0;
    if (dof < 1.0) break;

    double ssr = 0.0;
    for (double r : out.solution.residuals) ssr += r * r;
    std::optional<std::size_t> worst;
    double worst_t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = h.row(static_cast<Eigen::Index>(i));
      const double keep = 1.0 - row.dot(cof * row.transpose());
      if (keep < 1e-9) continue;
      const double r = out.solution.residuals[i];
      const double rest = std::max(ssr - r * r / keep, 0.0) / dof;
      const double t = std::abs(r) / std::sqrt(std::max(rest, 1e-12) * keep);
      if (!worst || t > worst_t) {
        worst = i;
        worst_t = t;
      }
    }
    if (!worst) break;

    std::vector<SatObservation> trial = obs;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(*worst));
    CoarseSolution without;
    try {
      without = solve_with_corrections(trial, epoch.t, out.solution.state(), corr, ils);
    } catch (const Error& e) {
      if (e.code() == Errc::RankDeficient) break;
      throw;
    }
    const SatObservation& cand = obs[*worst];
    const double z = models::corrected_pseudorange(cand, ecef_to_geodetic(without.rx_pos), tod, corr);
    const double excluded = z - modeled_pseudorange(cand, without.state());
    const double med = median(without.residuals);
    std::vector<double> dev(without.residuals.size());
    for (std::size_t i = 0; i < dev.size(); ++i) dev[i] = std::abs(without.residuals[i] - med);
    const double scale = std::max(1.4826 * median(dev), qc.min_residual_scale);
    if (std::abs(excluded) <= qc.residual_reject_factor * scale) break;

    out.rejected.push_back({cand.system, cand.sat_id, "residual", excluded});
    out.filtered.observations = std::move(trial);
    out.solution = std::move(without);
  }
  return out;
}

}  // namespace lfgnss::coarse
