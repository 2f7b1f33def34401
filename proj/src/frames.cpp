#include "lfgnss/frames.hpp"

#include <algorithm>
#include <cmath>

namespace lfgnss {

// Both directions run in long double so a round trip stays well under a nanometre.
EcefPos geodetic_to_ecef(const GeodeticPos& g) {
  using L = long double;
  const L a = wgs84::kSemiMajorAxis;
  const L e2 = wgs84::kEccentricitySq;
  const L lat = g.lat, lon = g.lon, h = g.height;
  const L sin_lat = std::sin(lat);
  const L cos_lat = std::cos(lat);
  const L n = a / std::sqrt(1.0L - e2 * sin_lat * sin_lat);
  return {static_cast<double>((n + h) * cos_lat * std::cos(lon)),
          static_cast<double>((n + h) * cos_lat * std::sin(lon)),
          static_cast<double>((n * (1.0L - e2) + h) * sin_lat)};
}

GeodeticSolve ecef_to_geodetic_detailed(const EcefPos& p) {
  using L = long double;
  const L a = wgs84::kSemiMajorAxis;
  const L e2 = wgs84::kEccentricitySq;
  constexpr L kLatTol = 1e-12L;
  constexpr int kMaxIter = 10;

  GeodeticSolve out;
  const L x = p.x, y = p.y, z = p.z;
  const L rho = std::hypot(x, y);
  if (rho < 1e-6L) {
    out.near_singularity = true;
    out.pos.lon = 0.0;
  } else {
    out.pos.lon = static_cast<double>(std::atan2(y, x));
  }

  // Fixed-point refinement of lat = atan2(z + e2 N sin(lat), rho); contraction ~e2 per step.
  const auto step_lat = [&](L lat) {
    const L s = std::sin(lat);
    return std::atan2(z + e2 * (a / std::sqrt(1.0L - e2 * s * s)) * s, rho);
  };
  L lat = std::atan2(z, rho * (1.0L - e2));
  for (int i = 0; i < kMaxIter; ++i) {
    const L next = step_lat(lat);
    out.iterations = i + 1;
    const L step = std::abs(next - lat);
    lat = next;
    if (step < kLatTol) break;
  }
  // Two more contractions push the residual from ~e2*tol down to rounding level.
  lat = step_lat(step_lat(lat));
  const L s = std::sin(lat);
  const L c = std::cos(lat);
  out.pos.lat = static_cast<double>(lat);
  out.pos.height = static_cast<double>(rho * c + z * s - a * std::sqrt(1.0L - e2 * s * s));
  return out;
}

Eigen::Matrix3d enu_rotation(const GeodeticPos& ref) {
  const double sl = std::sin(ref.lat), cl = std::cos(ref.lat);
  const double so = std::sin(ref.lon), co = std::cos(ref.lon);
  Eigen::Matrix3d r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

EnuVec ecef_delta_to_enu(const Eigen::Vector3d& delta, const GeodeticPos& ref) {
  const Eigen::Vector3d enu = enu_rotation(ref) * delta;
  return {enu.x(), enu.y(), enu.z()};
}

EnuVec ecef_to_enu(const EcefPos& p, const GeodeticPos& ref) {
  return ecef_delta_to_enu(p.vec() - geodetic_to_ecef(ref).vec(), ref);
}

LookAngles elevation_azimuth(const EcefPos& rx, const EcefPos& sat) {
  const Eigen::Vector3d los = sat.vec() - rx.vec();
  const double range = los.norm();
  const EnuVec enu = ecef_delta_to_enu(los, ecef_to_geodetic(rx));
  LookAngles out;
  out.elevation = std::asin(std::clamp(enu.up / range, -1.0, 1.0));
  if (std::abs(out.elevation - kPi / 2) < 1e-9) {
    out.zenith_degenerate = true;
    out.azimuth = 0.0;
  } else {
    out.azimuth = std::atan2(enu.east, enu.north);
  }
  return out;
}

}  // namespace lfgnss
