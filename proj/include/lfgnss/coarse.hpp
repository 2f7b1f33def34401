#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfgnss/gnss_models.hpp"
#include "lfgnss/observation.hpp"

namespace lfgnss::coarse {

/// [x, y, z, c*dt_r, ISB_BDS, ISB_GAL, ISB_GLO], meters.
using State7 = Eigen::Matrix<double, 7, 1>;

struct QcConfig {
  double elevation_mask = 10.0 * kPi / 180.0;
  double snr_min = 25.0;
  double residual_reject_factor = 4.0;
  int min_sats_per_system = 1;
  /// Floor on the robust residual scale so noiseless epochs are not over-rejected.
  double min_residual_scale = 1.0;

  void validate() const;
};

struct IlsConfig {
  int max_iterations = 10;
  double position_tolerance = 1e-4;
  double max_condition = 1e12;
};

struct CoarseSolution {
  EcefPos rx_pos;
  double clock_bias = 0.0;            // c * dt_r [m]
  Eigen::Vector3d isb = Eigen::Vector3d::Zero();  // BDS, GAL, GLO relative to GPS [m]
  std::array<bool, 3> isb_active{};   // systems present in the solved epoch
  std::vector<double> corrected;      // corrected pseudoranges, one per used satellite
  std::vector<double> residuals;      // corrected - modeled at the solution
  std::vector<Eigen::Vector3d> los_unit;  // ENU unit line of sight
  std::vector<LookAngles> look;
  int iterations = 0;
  bool converged = false;

  State7 state() const;
};

/// Initial state for a cold start: (a, 0, 0) with zero clock and ISB.
State7 cold_start_state();

/// Modeled pseudorange ||sat - rx|| + clock + ISB(system).
double modeled_pseudorange(const SatObservation& obs, const State7& x);

/// N x 7 Jacobian: [-(sat - rx)/D, 1, alpha_C, alpha_E, alpha_R].
Eigen::MatrixXd geometry_matrix(const EcefPos& rx, std::span<const SatObservation> obs);

/// Equal-weight Gauss-Newton on pre-corrected pseudoranges. ISB columns of absent systems are
/// dropped and their values frozen at x0. Throws RankDeficient; NoConvergence is reported via
/// `converged == false`.
CoarseSolution ils_solve(std::span<const SatObservation> obs, std::span<const double> corrected, const State7& x0,
                         const IlsConfig& cfg = {});

/// Applies the configured corrections at `rx` to each observation.
std::vector<double> correct_all(std::span<const SatObservation> obs, const GeodeticPos& rx, double time_of_day,
                                const models::CorrectionConfig& cfg);

/// Corrections at x0, solve, re-correct at the solution, solve again. A cold start (no usable
/// position in x0) skips atmospheric terms on the first pass.
CoarseSolution solve_with_corrections(std::span<const SatObservation> obs, double t, const State7& x0,
                                      const models::CorrectionConfig& corr, const IlsConfig& cfg = {});

struct Rejection {
  System system = System::GPS;
  int sat_id = 0;
  std::string reason;  // "snr", "elevation", "system-count", "residual"
  double value = 0.0;
};

struct QcResult {
  EpochRecord filtered;
  std::vector<Rejection> rejected;
  CoarseSolution solution;
};

/// Minimum usable satellite count: 4 + number of non-GPS systems present.
std::size_t minimum_satellites(std::span<const SatObservation> obs);

/// Screens by SNR, elevation (when `prior` is known), per-system count, then iteratively removes
/// the worst post-fit residual above factor * max(1.4826 * MAD, floor). Throws TooFewSatellites.
QcResult quality_control(const EpochRecord& epoch, const std::optional<EcefPos>& prior, const QcConfig& qc,
                         const models::CorrectionConfig& corr, const std::optional<State7>& warm = std::nullopt,
                         const IlsConfig& ils = {});

}  // namespace lfgnss::coarse
