#pragma once

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lfgnss/frames.hpp"
#include "lfgnss/observation.hpp"

namespace testsupport {

using namespace lfgnss;

inline constexpr double kDeg = kPi / 180.0;

struct SatSpec {
  System system;
  double el;
  double az;
};

/// Satellite at `range` from rx along the given look angles.
inline EcefPos sat_position(const EcefPos& rx, double el, double az, double range = 2.2e7) {
  const GeodeticPos g = ecef_to_geodetic(rx);
  const Eigen::Vector3d los(std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el));
  return EcefPos::from(rx.vec() + range * (enu_rotation(g).transpose() * los));
}

/// Noiseless pseudoranges with receiver clock and inter-system biases; no atmosphere.
inline EpochRecord noiseless_epoch(const EcefPos& rx, double clock, const std::array<double, 3>& isb,
                                   const std::vector<SatSpec>& sats, double t = 0.0) {
  EpochRecord e;
  e.t = t;
  e.truth = rx;
  std::array<int, 4> ids{};
  for (const SatSpec& s : sats) {
    SatObservation o;
    o.system = s.system;
    o.sat_id = ++ids[static_cast<std::size_t>(s.system)];
    o.sat_pos = sat_position(rx, s.el, s.az);
    const int k = isb_index(s.system);
    o.pseudorange = (o.sat_pos.vec() - rx.vec()).norm() + clock + (k >= 0 ? isb[static_cast<std::size_t>(k)] : 0.0);
    o.snr = 45.0;
    o.iono_delay = 0.0;
    o.tropo_delay = 0.0;
    e.observations.push_back(o);
  }
  return e;
}

inline std::vector<SatSpec> random_sats(std::mt19937_64& rng, std::size_t n, bool all_systems = false) {
  std::uniform_real_distribution<double> el(15.0 * kDeg, 85.0 * kDeg);
  std::uniform_real_distribution<double> az(-kPi, kPi);
  std::vector<SatSpec> out;
  for (std::size_t i = 0; i < n; ++i) {
    const System s = all_systems ? kAllSystems[i % 4] : System::GPS;
    out.push_back({s, el(rng), az(rng)});
  }
  return out;
}

inline GeodeticPos random_site(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lat(-70.0 * kDeg, 70.0 * kDeg);
  std::uniform_real_distribution<double> lon(-kPi, kPi);
  std::uniform_real_distribution<double> h(-50.0, 2000.0);
  return {lat(rng), lon(rng), h(rng)};
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n, double ridge = 0.5) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
  return a * a.transpose() + ridge * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Eigen::MatrixXd a(rows, cols);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
  return a;
}

}  // namespace testsupport
