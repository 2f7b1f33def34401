#pragma once

#include <Eigen/Dense>

namespace lfgnss {

namespace wgs84 {
inline constexpr double kSemiMajorAxis = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kSemiMinorAxis = kSemiMajorAxis * (1.0 - kFlattening);
inline constexpr double kEccentricitySq = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

/// Earth-centered Earth-fixed position [m].
struct EcefPos {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Eigen::Vector3d vec() const { return {x, y, z}; }
  static EcefPos from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  bool operator==(const EcefPos&) const = default;
};

/// Latitude/longitude in radians, height above the WGS-84 ellipsoid in meters.
struct GeodeticPos {
  double lat = 0.0;
  double lon = 0.0;
  double height = 0.0;
};

/// Local East-North-Up vector [m].
struct EnuVec {
  double east = 0.0;
  double north = 0.0;
  double up = 0.0;

  Eigen::Vector3d vec() const { return {east, north, up}; }
  double norm() const { return vec().norm(); }
};

struct GeodeticSolve {
  GeodeticPos pos;
  int iterations = 0;
  bool near_singularity = false;  // |(x,y)| < 1e-6 m, longitude forced to 0
};

struct LookAngles {
  double elevation = 0.0;  // [-pi/2, pi/2]
  double azimuth = 0.0;    // (-pi, pi], clockwise from north
  bool zenith_degenerate = false;
};

EcefPos geodetic_to_ecef(const GeodeticPos& g);

GeodeticSolve ecef_to_geodetic_detailed(const EcefPos& p);
inline GeodeticPos ecef_to_geodetic(const EcefPos& p) { return ecef_to_geodetic_detailed(p).pos; }

/// Rotation taking ECEF difference vectors into the ENU frame at `ref`.
Eigen::Matrix3d enu_rotation(const GeodeticPos& ref);

EnuVec ecef_to_enu(const EcefPos& p, const GeodeticPos& ref);

/// ENU components of a difference vector (no origin subtraction).
EnuVec ecef_delta_to_enu(const Eigen::Vector3d& delta, const GeodeticPos& ref);

/// Elevation and azimuth of `sat` seen from `rx`; azimuth uses atan2(east, north).
LookAngles elevation_azimuth(const EcefPos& rx, const EcefPos& sat);

}  // namespace lfgnss
