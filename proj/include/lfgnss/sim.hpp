#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfgnss/frames.hpp"
#include "lfgnss/ingest.hpp"
#include "lfgnss/observation.hpp"

namespace lfgnss::sim {

struct ConstellationSpec {
  std::array<int, 4> counts{6, 4, 3, 3};  // GPS, BDS, GAL, GLO
  double shell_radius = 2.2e7;             // receiver-to-satellite distance [m]
  double min_elevation = 12.0 * kPi / 180.0;
  double max_elevation = 85.0 * kPi / 180.0;
  double drift_sigma = 2e-5;  // angular random-walk acceleration [rad/s^1.5]
};

struct Waypoint {
  double lat = 0.0;  // rad
  double lon = 0.0;  // rad
  double height = 0.0;
  double speed = 10.0;  // m/s on the leg that starts here
};

struct TrajectorySpec {
  std::vector<Waypoint> waypoints;  // one waypoint means static
  bool loop = true;
};

struct ErrorBudget {
  double sigma_base = 0.5;          // [m] at zenith
  bool elevation_dependent = true;  // sigma_base / sin(max(el, 5 deg))
  double clock_bias = 3e4;          // initial c * dt_r [m]
  double clock_drift = 0.5;         // [m/s]
  std::array<double, 3> isb{3.0, -2.0, 5.0};  // BDS, GAL, GLO [m]
  bool troposphere = true;
  bool ionosphere = true;
  double sat_clock_spread = 1e-4;   // |c * dt_sat| bound [s] before scaling by c
  double tgd_spread = 1e-8;         // |tgd| bound [s]
  double nlos_probability = 0.0;    // stationary probability per satellite-epoch
  double nlos_bias_min = 5.0;
  double nlos_bias_max = 30.0;
  double nlos_snr_drop = 10.0;      // dB
  double nlos_low_elevation = 30.0 * kPi / 180.0;
  double nlos_low_elevation_factor = 3.0;  // 1 disables the elevation coupling
  double nlos_dwell = 10.0;         // mean dwell [s]; 0 draws every epoch independently
  double snr_noise = 1.0;           // dB

  /// Every random and deterministic error term off; clock and ISBs stay.
  static ErrorBudget zero();
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double duration = 600.0;  // s
  int rate = 1;             // Hz, 1 or 10
  double start_time = 0.0;  // GPS time of day at the first epoch [s]
  ConstellationSpec constellation;
  TrajectorySpec trajectory;
  ErrorBudget budget;

  /// Urban loop around a fixed reference point.
  static ScenarioConfig urban_default();
  void validate() const;
  std::size_t epoch_count() const;
};

struct SatTruth {
  System system = System::GPS;
  int sat_id = 0;
  double nlos_bias = 0.0;  // 0 when clean
  double noise = 0.0;
  double tropo = 0.0;
  double iono = 0.0;
  double elevation = 0.0;
};

struct EpochTruth {
  double t = 0.0;
  EcefPos position;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double clock_bias = 0.0;
  double clock_drift = 0.0;
  std::array<double, 3> isb{};
  std::vector<SatTruth> sats;
};

using TruthLog = std::vector<EpochTruth>;

struct Scenario {
  ingest::Dataset dataset;
  TruthLog truth;
};

Scenario generate(const ScenarioConfig& cfg);

std::string describe(const ScenarioConfig& cfg);

void write_truth_log(std::ostream& out, const ScenarioConfig& cfg, const TruthLog& truth);

}  // namespace lfgnss::sim
