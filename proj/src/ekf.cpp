#include "lfgnss/ekf.hpp"

#include <cmath>

#include "lfgnss/error.hpp"

namespace lfgnss::ekf {

namespace {

constexpr double kMinRcond = 1e-14;

}  // namespace

void ProcessNoiseConfig::validate() const {
  if (!(velocity_density >= 0.0 && clock_drift_density >= 0.0 && isb_density >= 0.0)) {
    throw Error(Errc::ConfigError, "process noise densities must be >= 0");
  }
}

void InitConfig::validate() const {
  if (!(sigma_pos > 0.0 && sigma_vel > 0.0 && sigma_clock > 0.0 && sigma_drift > 0.0 && sigma_isb > 0.0)) {
    throw Error(Errc::ConfigError, "initial sigmas must be positive");
  }
}

FilterState init_filter(const coarse::CoarseSolution& coarse, const InitConfig& cfg, double t) {
  FilterState s;
  s.t = t;
  s.x.segment<3>(kPos) = coarse.rx_pos.vec();
  s.x(kClock) = coarse.clock_bias;
  s.x.segment<3>(kIsb) = coarse.isb;
  StateVec var;
  var << Eigen::Vector3d::Constant(cfg.sigma_pos * cfg.sigma_pos), Eigen::Vector3d::Constant(cfg.sigma_vel * cfg.sigma_vel),
      cfg.sigma_clock * cfg.sigma_clock, cfg.sigma_drift * cfg.sigma_drift,
      Eigen::Vector3d::Constant(cfg.sigma_isb * cfg.sigma_isb);
  s.P = var.asDiagonal();
  return s;
}

StateMat transition(double dt) {
  StateMat f = StateMat::Identity();
  for (int i = 0; i < 3; ++i) f(kPos + i, kVel + i) = dt;
  f(kClock, kDrift) = dt;
  return f;
}

StateMat process_noise(double dt, const ProcessNoiseConfig& q) {
  StateMat out = StateMat::Zero();
  const double dt2 = dt * dt, dt3 = dt2 * dt;
  auto cv_block = [&](int p, int v, double density) {
    out(p, p) = density * dt3 / 3.0;
    out(p, v) = out(v, p) = density * dt2 / 2.0;
    out(v, v) = density * dt;
  };
  for (int i = 0; i < 3; ++i) cv_block(kPos + i, kVel + i, q.velocity_density);
  cv_block(kClock, kDrift, q.clock_drift_density);
  for (int i = 0; i < 3; ++i) out(kIsb + i, kIsb + i) = q.isb_density * dt;
  return out;
}

FilterState time_update(const FilterState& s, double dt, const ProcessNoiseConfig& q) {
  if (dt > kMaxGap) throw Error(Errc::GapTooLarge, "gap of " + std::to_string(dt) + " s");
  if (!(dt > 0.0)) throw Error(Errc::OrderError, "non-positive time step");
  const StateMat f = transition(dt);
  FilterState out;
  out.x = f * s.x;
  out.P = f * s.P * f.transpose() + process_noise(dt, q);
  out.P = 0.5 * (out.P + out.P.transpose());
  out.t = s.t + dt;
  return out;
}

Linearization linearize(const StateVec& x, const Measurements& m) {
  const auto n = static_cast<Eigen::Index>(m.size());
  if (m.z.size() != n || m.sat_pos.size() != m.size()) throw Error(Errc::LengthMismatch, "measurement arrays");
  Linearization lin;
  lin.innovation.resize(n);
  lin.H = Eigen::MatrixXd::Zero(n, kStates);
  const Eigen::Vector3d p = x.segment<3>(kPos);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Eigen::Vector3d d = m.sat_pos[k] - p;
    const double range = d.norm();
    const int isb = isb_index(m.systems[k]);
    // z and the range are both ~2e7 m; difference them in extended precision so the small
    // innovation carries no double-rounding noise from either.
    using L = long double;
    const L dx = static_cast<L>(m.sat_pos[k].x()) - static_cast<L>(p.x());
    const L dy = static_cast<L>(m.sat_pos[k].y()) - static_cast<L>(p.y());
    const L dz = static_cast<L>(m.sat_pos[k].z()) - static_cast<L>(p.z());
    const L predicted = std::sqrt(dx * dx + dy * dy + dz * dz) + static_cast<L>(x(kClock)) +
                        (isb >= 0 ? static_cast<L>(x(kIsb + isb)) : 0.0L);
    lin.innovation(i) = static_cast<double>(static_cast<L>(m.z(i)) - predicted);
    lin.H.block<1, 3>(i, kPos) = -(d / range).transpose();
    lin.H(i, kClock) = 1.0;
    if (isb >= 0) lin.H(i, kIsb + isb) = 1.0;
  }
  return lin;
}

const char* to_string(UpdateStatus s) {
  switch (s) {
    case UpdateStatus::Ok: return "ok";
    case UpdateStatus::SingularS: return "singular-S";
    case UpdateStatus::NotSPD: return "not-spd";
  }
  return "?";
}

StateMat joseph_update(const StateMat& P, const Eigen::MatrixXd& K, const Eigen::MatrixXd& H,
                       const Eigen::VectorXd& r_diag) {
  const StateMat a = StateMat::Identity() - K * H;
  StateMat out = a * P * a.transpose() + K * r_diag.asDiagonal() * K.transpose();
  // Rounding leaves O(ulp) asymmetry; average it away.
  return 0.5 * (out + out.transpose());
}

UpdateResult measurement_update(const FilterState& s, const Measurements& m, const Eigen::VectorXd& r_diag,
                                const Eigen::VectorXd& v_comp) {
  const auto n = static_cast<Eigen::Index>(m.size());
  if (r_diag.size() != n || v_comp.size() != n) throw Error(Errc::LengthMismatch, "r/v_comp length");
  if (n == 0) throw Error(Errc::TooFewSatellites, "no measurements");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(r_diag(i) > 0.0)) throw Error(Errc::ConfigError, "measurement variance must be positive");
  }

  const Linearization lin = linearize(s.x, m);
  UpdateResult res;
  res.state = s;
  res.diag.innovation = lin.innovation;
  res.diag.compensated = lin.innovation + v_comp;

  const Eigen::MatrixXd pht = s.P * lin.H.transpose();
  Eigen::MatrixXd S = lin.H * pht;
  S.diagonal() += r_diag;
  res.diag.s_diag = S.diagonal();
  res.diag.nis = lin.innovation.array().square() / S.diagonal().array();

  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    res.status = UpdateStatus::NotSPD;
    return res;
  }
  if (llt.rcond() < kMinRcond) {
    res.status = UpdateStatus::SingularS;
    return res;
  }
  // K = P H^T S^-1, formed as (S^-1 H P)^T.
  const Eigen::MatrixXd K = llt.solve(pht.transpose()).transpose();
  res.state.x = s.x + K * res.diag.compensated;
  res.state.P = joseph_update(s.P, K, lin.H, r_diag);
  return res;
}

ad::Var taped_correction(ad::Tape& tape, const FilterState& predicted, const Linearization& lin, ad::Var r_diag,
                         ad::Var v_comp, const Eigen::MatrixXd& pos_rows) {
  const Eigen::MatrixXd pht = predicted.P * lin.H.transpose();
  const ad::Var hph = tape.constant(lin.H * pht);
  const ad::Var s = ad::add(hph, ad::diag(r_diag));
  const ad::Var rhs = ad::add(tape.constant(lin.innovation), v_comp);
  const ad::Var y = ad::spd_solve(s, rhs);
  return ad::matmul(tape.constant(pos_rows * pht), y);
}

}  // namespace lfgnss::ekf
