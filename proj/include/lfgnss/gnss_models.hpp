#pragma once

#include <array>

#include "lfgnss/frames.hpp"
#include "lfgnss/observation.hpp"

namespace lfgnss::models {

struct MetParams {
  double pressure_hpa = 1013.25;
  double temperature_k = 291.15;
  double humidity = 0.5;  // fraction
};

/// Broadcast coefficients from the GPS navigation message (2004/1/1 example set).
inline constexpr std::array<double, 4> kDefaultKlobucharAlpha = {0.1118e-07, -0.7451e-08, -0.5961e-07, 0.1192e-06};
inline constexpr std::array<double, 4> kDefaultKlobucharBeta = {0.1167e+06, -0.2294e+06, -0.1311e+06, 0.1049e+07};

struct CorrectionConfig {
  bool use_saastamoinen = true;
  bool use_klobuchar = true;
  std::array<double, 4> klobuchar_alpha = kDefaultKlobucharAlpha;
  std::array<double, 4> klobuchar_beta = kDefaultKlobucharBeta;
  MetParams met;

  /// Throws ConfigError when pressure/temperature/coefficients are out of range.
  void validate() const;
};

/// Slant tropospheric delay [m]: Saastamoinen zenith hydrostatic + wet delay over sin(elevation).
/// Elevations below 1 degree are evaluated at 1 degree.
double saastamoinen_delay(const GeodeticPos& rx, double elevation, const MetParams& met);

/// Elevations under this are outside the validated range of the mapping.
inline constexpr double kTropoLowElevation = 5.0 * kPi / 180.0;

/// Slant ionospheric delay [m] from the broadcast Klobuchar model.
double klobuchar_delay(const GeodeticPos& rx, double elevation, double azimuth, double gps_tod,
                       const std::array<double, 4>& alpha, const std::array<double, 4>& beta);

/// Individual terms removed by `corrected_pseudorange`, all in meters.
struct CorrectionTerms {
  double sat_clock = 0.0;  // + c * dt_sat
  double tgd = 0.0;        // - c * tgd
  double tropo = 0.0;      // - T
  double iono = 0.0;       // - I
};

CorrectionTerms correction_terms(const SatObservation& obs, const GeodeticPos& rx, double time_of_day,
                                 const CorrectionConfig& cfg);

/// P + c*dt_sat - c*tgd - T - I. Throws MissingCorrection if a delay is neither supplied
/// on the observation nor enabled as a model.
double corrected_pseudorange(const SatObservation& obs, const GeodeticPos& rx, double time_of_day,
                             const CorrectionConfig& cfg);

}  // namespace lfgnss::models
