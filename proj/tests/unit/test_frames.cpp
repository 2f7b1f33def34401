#include <doctest.h>

#include <random>

#include "lfgnss/frames.hpp"
#include "support.hpp"

using namespace lfgnss;
using testsupport::kDeg;

TEST_CASE("geodetic to ECEF at reference points") {
  const EcefPos eq = geodetic_to_ecef({0.0, 0.0, 0.0});
  CHECK(eq.x == doctest::Approx(wgs84::kSemiMajorAxis).epsilon(1e-15));
  CHECK(std::abs(eq.y) < 1e-9);
  CHECK(std::abs(eq.z) < 1e-9);

  const EcefPos pole = geodetic_to_ecef({kPi / 2, 1.234, 0.0});
  CHECK(std::abs(pole.x) < 1e-6);
  CHECK(std::abs(pole.y) < 1e-6);
  CHECK(pole.z == doctest::Approx(wgs84::kSemiMinorAxis).epsilon(1e-15));

  // Independent scripted evaluation of the closed-form transform.
  const EcefPos p = geodetic_to_ecef({45.0 * kDeg, 30.0 * kDeg, 100.0});
  CHECK(std::abs(p.x - 3912409.7022316125) < 1e-6);
  CHECK(std::abs(p.y - 2258830.7947635246) < 1e-6);
  CHECK(std::abs(p.z - 4487419.1195440385) < 1e-6);
}

TEST_CASE("ECEF to geodetic special points") {
  const GeodeticPos g = ecef_to_geodetic({wgs84::kSemiMajorAxis, 0.0, 0.0});
  CHECK(std::abs(g.lat) < 1e-12);
  CHECK(std::abs(g.lon) < 1e-12);
  CHECK(std::abs(g.height) < 1e-9);

  const GeodeticSolve pole = ecef_to_geodetic_detailed({0.0, 0.0, wgs84::kSemiMinorAxis});
  CHECK(pole.pos.lat == doctest::Approx(kPi / 2).epsilon(1e-14));
  CHECK(pole.pos.lon == 0.0);
  CHECK(std::abs(pole.pos.height) < 1e-9);
  CHECK(pole.near_singularity);
}

TEST_CASE("geodetic round trip over random points") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-89.9 * kDeg, 89.9 * kDeg), lon(-kPi, kPi), h(-500.0, 2e4);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const GeodeticPos g{lat(rng), lon(rng), h(rng)};
    const EcefPos p = geodetic_to_ecef(g);
    const EcefPos back = geodetic_to_ecef(ecef_to_geodetic(p));
    worst = std::max(worst, (back.vec() - p.vec()).norm());
    const GeodeticPos g2 = ecef_to_geodetic(p);
    CHECK(std::abs(g2.height - g.height) < 1e-9);
    CHECK(std::abs(g2.lat - g.lat) * wgs84::kSemiMajorAxis < 1e-9);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("ENU frame axes and isometry") {
  const GeodeticPos ref{37.0 * kDeg, -122.0 * kDeg, 30.0};
  const EnuVec zero = ecef_to_enu(geodetic_to_ecef(ref), ref);
  CHECK(zero.norm() < 1e-9);

  const GeodeticPos above{ref.lat, ref.lon, ref.height + 1.0};
  const EnuVec up = ecef_to_enu(geodetic_to_ecef(above), ref);
  CHECK(std::abs(up.east) < 1e-9);
  CHECK(std::abs(up.north) < 1e-9);
  CHECK(std::abs(up.up - 1.0) < 1e-9);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1e5);
  const EcefPos r = geodetic_to_ecef(ref);
  for (int i = 0; i < 100; ++i) {
    const EcefPos p{r.x + z(rng), r.y + z(rng), r.z + z(rng)};
    const double n = (p.vec() - r.vec()).norm();
    CHECK(std::abs(ecef_to_enu(p, ref).norm() - n) <= 1e-9 * n);
  }
}

TEST_CASE("look angles") {
  const GeodeticPos ref{22.0 * kDeg, 114.0 * kDeg, 10.0};
  const EcefPos rx = geodetic_to_ecef(ref);

  const LookAngles zen = elevation_azimuth(rx, geodetic_to_ecef({ref.lat, ref.lon, 2e7}));
  CHECK(zen.elevation == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(zen.azimuth == 0.0);

  // Due north / east at the same local height, via an ENU offset.
  const Eigen::Matrix3d to_ecef = enu_rotation(ref).transpose();
  const LookAngles north = elevation_azimuth(rx, EcefPos::from(rx.vec() + to_ecef * Eigen::Vector3d(0, 1e5, 0)));
  CHECK(std::abs(north.elevation) < 1e-6);
  CHECK(std::abs(north.azimuth) < 1e-9);
  const LookAngles east = elevation_azimuth(rx, EcefPos::from(rx.vec() + to_ecef * Eigen::Vector3d(1e5, 0, 0)));
  CHECK(std::abs(east.elevation) < 1e-6);
  CHECK(east.azimuth == doctest::Approx(kPi / 2).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 2e7);
  for (int i = 0; i < 200; ++i) {
    const LookAngles la = elevation_azimuth(rx, {rx.x + z(rng), rx.y + z(rng), rx.z + z(rng)});
    CHECK(la.elevation >= -kPi / 2);
    CHECK(la.elevation <= kPi / 2);
    CHECK(la.azimuth > -kPi - 1e-15);
    CHECK(la.azimuth <= kPi);
  }
}
