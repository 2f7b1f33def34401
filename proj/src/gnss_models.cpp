#include "lfgnss/gnss_models.hpp"

#include <algorithm>
#include <cmath>

#include "lfgnss/error.hpp"

namespace lfgnss {

std::string_view to_string(System s) noexcept {
  switch (s) {
    case System::GPS: return "GPS";
    case System::BDS: return "BDS";
    case System::GAL: return "GAL";
    case System::GLO: return "GLO";
  }
  return "?";
}

std::optional<System> parse_system(std::string_view name) noexcept {
  for (System s : kAllSystems) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

}  // namespace lfgnss

namespace lfgnss::models {

void CorrectionConfig::validate() const {
  if (!(met.pressure_hpa > 800.0 && met.pressure_hpa < 1100.0)) {
    throw Error(Errc::ConfigError, "pressure must lie in (800, 1100) hPa");
  }
  if (!(met.temperature_k > 200.0 && met.temperature_k < 330.0)) {
    throw Error(Errc::ConfigError, "temperature must lie in (200, 330) K");
  }
  if (!(met.humidity >= 0.0 && met.humidity <= 1.0)) {
    throw Error(Errc::ConfigError, "humidity must lie in [0, 1]");
  }
  for (double c : klobuchar_alpha) {
    if (!std::isfinite(c)) throw Error(Errc::ConfigError, "klobuchar alpha not finite");
  }
  for (double c : klobuchar_beta) {
    if (!std::isfinite(c)) throw Error(Errc::ConfigError, "klobuchar beta not finite");
  }
}

double saastamoinen_delay(const GeodeticPos& rx, double elevation, const MetParams& met) {
  const double el = std::max(elevation, kPi / 180.0);
  const double h_km = std::max(rx.height, 0.0) / 1000.0;
  const double t = met.temperature_k;
  const double e = 6.108 * met.humidity * std::exp((17.15 * t - 4684.0) / (t - 38.45));
  const double zhd = 0.0022768 * met.pressure_hpa / (1.0 - 0.00266 * std::cos(2.0 * rx.lat) - 0.00028 * h_km);
  const double zwd = 0.002277 * (1255.0 / t + 0.05) * e;
  return (zhd + zwd) / std::sin(el);
}

double klobuchar_delay(const GeodeticPos& rx, double elevation, double azimuth, double gps_tod,
                       const std::array<double, 4>& alpha, const std::array<double, 4>& beta) {
  // Angles in semicircles, as the GPS broadcast model defines them.
  const double el = std::max(elevation, 0.0) / kPi;
  const double psi = 0.0137 / (el + 0.11) - 0.022;
  double phi = rx.lat / kPi + psi * std::cos(azimuth);
  phi = std::clamp(phi, -0.416, 0.416);
  const double lam = rx.lon / kPi + psi * std::sin(azimuth) / std::cos(phi * kPi);
  phi += 0.064 * std::cos((lam - 1.617) * kPi);

  double tt = 43200.0 * lam + gps_tod;
  tt -= std::floor(tt / 86400.0) * 86400.0;

  const double slant = 1.0 + 16.0 * std::pow(0.53 - el, 3.0);
  double amp = alpha[0] + phi * (alpha[1] + phi * (alpha[2] + phi * alpha[3]));
  double per = beta[0] + phi * (beta[1] + phi * (beta[2] + phi * beta[3]));
  amp = std::max(amp, 0.0);
  per = std::max(per, 72000.0);
  const double x = 2.0 * kPi * (tt - 50400.0) / per;
  const double delay = std::abs(x) < 1.57 ? 5e-9 + amp * (1.0 + x * x * (-0.5 + x * x / 24.0)) : 5e-9;
  return kSpeedOfLight * slant * delay;
}

CorrectionTerms correction_terms(const SatObservation& obs, const GeodeticPos& rx, double time_of_day,
                                 const CorrectionConfig& cfg) {
  CorrectionTerms terms;
  terms.sat_clock = kSpeedOfLight * obs.sat_clock_bias;
  terms.tgd = -kSpeedOfLight * obs.tgd;

  const bool need_geometry = (!obs.tropo_delay && cfg.use_saastamoinen) || (!obs.iono_delay && cfg.use_klobuchar);
  LookAngles look;
  if (need_geometry) look = elevation_azimuth(geodetic_to_ecef(rx), obs.sat_pos);

  if (obs.tropo_delay) {
    terms.tropo = -*obs.tropo_delay;
  } else if (cfg.use_saastamoinen) {
    terms.tropo = -saastamoinen_delay(rx, look.elevation, cfg.met);
  } else {
    throw Error(Errc::MissingCorrection, "no tropospheric delay for " + std::string(to_string(obs.system)) +
                                             std::to_string(obs.sat_id) + " and model disabled");
  }

  if (obs.iono_delay) {
    terms.iono = -*obs.iono_delay;
  } else if (cfg.use_klobuchar) {
    terms.iono = -klobuchar_delay(rx, look.elevation, look.azimuth, time_of_day, cfg.klobuchar_alpha,
                                  cfg.klobuchar_beta);
  } else {
    throw Error(Errc::MissingCorrection, "no ionospheric delay for " + std::string(to_string(obs.system)) +
                                             std::to_string(obs.sat_id) + " and model disabled");
  }
  return terms;
}

double corrected_pseudorange(const SatObservation& obs, const GeodeticPos& rx, double time_of_day,
                             const CorrectionConfig& cfg) {
  const CorrectionTerms c = correction_terms(obs, rx, time_of_day, cfg);
  return obs.pseudorange + c.sat_clock + c.tgd + c.tropo + c.iono;
}

}  // namespace lfgnss::models
