#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfgnss/autodiff.hpp"
#include "lfgnss/coarse.hpp"
#include "lfgnss/observation.hpp"

namespace lfgnss::ekf {

inline constexpr int kStates = 11;
using StateVec = Eigen::Matrix<double, kStates, 1>;
using StateMat = Eigen::Matrix<double, kStates, kStates>;

// State layout.
inline constexpr int kPos = 0;
inline constexpr int kVel = 3;
inline constexpr int kClock = 6;
inline constexpr int kDrift = 7;
inline constexpr int kIsb = 8;

/// Outage longer than this forces re-initialization.
inline constexpr double kMaxGap = 30.0;

struct FilterState {
  StateVec x = StateVec::Zero();
  StateMat P = StateMat::Zero();
  double t = 0.0;

  EcefPos position() const { return EcefPos::from(x.segment<3>(kPos)); }
};

struct ProcessNoiseConfig {
  double velocity_density = 1.0;      // m^2/s^3 per axis
  double clock_drift_density = 0.1;   // m^2/s^3
  double isb_density = 1e-4;          // m^2/s

  void validate() const;
};

struct InitConfig {
  double sigma_pos = 10.0;
  double sigma_vel = 1.0;
  double sigma_clock = 100.0;
  double sigma_drift = 10.0;
  double sigma_isb = 10.0;

  void validate() const;
};

FilterState init_filter(const coarse::CoarseSolution& coarse, const InitConfig& cfg, double t);

StateMat transition(double dt);
StateMat process_noise(double dt, const ProcessNoiseConfig& q);

/// Throws GapTooLarge for dt > 30 s and OrderError for dt <= 0.
FilterState time_update(const FilterState& s, double dt, const ProcessNoiseConfig& q);

/// Corrected pseudoranges and the satellites they refer to.
struct Measurements {
  std::vector<Eigen::Vector3d> sat_pos;
  std::vector<System> systems;
  Eigen::VectorXd z;

  std::size_t size() const { return systems.size(); }
};

/// Innovation z - f(x) and Jacobian H (n x 11) at x.
struct Linearization {
  Eigen::VectorXd innovation;
  Eigen::MatrixXd H;
};

Linearization linearize(const StateVec& x, const Measurements& m);

enum class UpdateStatus { Ok, SingularS, NotSPD };
const char* to_string(UpdateStatus s);

struct Diagnostics {
  Eigen::VectorXd innovation;   // v
  Eigen::VectorXd compensated;  // v + v_comp
  Eigen::VectorXd s_diag;
  Eigen::VectorXd nis;          // per satellite v_i^2 / S_ii
};

struct UpdateResult {
  FilterState state;
  Diagnostics diag;
  UpdateStatus status = UpdateStatus::Ok;
};

/// Nonlinear innovation, SPD solve for the gain, Joseph covariance update. On a singular or
/// indefinite S the state passes through unchanged and `status` says why.
UpdateResult measurement_update(const FilterState& s, const Measurements& m, const Eigen::VectorXd& r_diag,
                                const Eigen::VectorXd& v_comp);

/// Joseph form (I - KH) P (I - KH)^T + K R K^T for an arbitrary gain.
StateMat joseph_update(const StateMat& P, const Eigen::MatrixXd& K, const Eigen::MatrixXd& H,
                       const Eigen::VectorXd& r_diag);

/// Taped posterior-state correction dx = P H^T (H P H^T + diag(r))^-1 (v + v_comp) (11 x 1).
/// `pos_rows` restricts the result to a linear map of dx: out = pos_rows * dx. Only r and v_comp
/// are differentiable inputs.
ad::Var taped_correction(ad::Tape& tape, const FilterState& predicted, const Linearization& lin, ad::Var r_diag,
                         ad::Var v_comp, const Eigen::MatrixXd& pos_rows);

}  // namespace lfgnss::ekf
