#include "lfgnss/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lfgnss/error.hpp"
#include "lfgnss/gnss_models.hpp"

namespace lfgnss::sim {

namespace {

constexpr double kDeg = kPi / 180.0;
constexpr double kNoiseFloorElevation = 5.0 * kDeg;

GeodeticPos offset_geodetic(const GeodeticPos& ref, double east, double north) {
  const Eigen::Vector3d d = enu_rotation(ref).transpose() * Eigen::Vector3d(east, north, 0.0);
  GeodeticPos g = ecef_to_geodetic(EcefPos::from(geodetic_to_ecef(ref).vec() + d));
  g.height = ref.height;
  return g;
}

/// Piecewise constant-velocity path through ECEF waypoints.
class Path {
 public:
  explicit Path(const TrajectorySpec& spec) : loop_(spec.loop) {
    for (const Waypoint& w : spec.waypoints) {
      points_.push_back(geodetic_to_ecef({w.lat, w.lon, w.height}).vec());
      speeds_.push_back(w.speed);
    }
    if (loop_ && points_.size() > 1) {
      points_.push_back(points_.front());
      speeds_.push_back(speeds_.front());
    }
    starts_.push_back(0.0);
    for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
      starts_.push_back(starts_.back() + (points_[i + 1] - points_[i]).norm() / speeds_[i]);
    }
  }

  void at(double tau, Eigen::Vector3d& pos, Eigen::Vector3d& vel) const {
    vel.setZero();
    const double total = starts_.back();
    if (points_.size() == 1 || total <= 0.0) {
      pos = points_.front();
      return;
    }
    if (loop_) {
      tau = std::fmod(tau, total);
    } else if (tau >= total) {
      pos = points_.back();
      return;
    }
    const auto leg = static_cast<std::size_t>(std::upper_bound(starts_.begin(), starts_.end(), tau) - starts_.begin()) - 1;
    const Eigen::Vector3d d = points_[leg + 1] - points_[leg];
    vel = d.normalized() * speeds_[leg];
    pos = points_[leg] + vel * (tau - starts_[leg]);
  }

 private:
  bool loop_;
  std::vector<Eigen::Vector3d> points_;
  std::vector<double> speeds_;
  std::vector<double> starts_;
};

struct SatState {
  System system;
  int id;
  double az, el, az_rate = 0.0, el_rate = 0.0;
  double dts, tgd;
  bool nlos = false;
  double bias = 0.0;
};

}  // namespace

ErrorBudget ErrorBudget::zero() {
  ErrorBudget b;
  b.sigma_base = 0.0;
  b.troposphere = false;
  b.ionosphere = false;
  b.sat_clock_spread = 0.0;
  b.tgd_spread = 0.0;
  b.nlos_probability = 0.0;
  b.snr_noise = 0.0;
  return b;
}

ScenarioConfig ScenarioConfig::urban_default() {
  ScenarioConfig cfg;
  const GeodeticPos ref{22.3193 * kDeg, 114.1694 * kDeg, 10.0};
  const std::array<std::pair<double, double>, 4> corners{{{0.0, 0.0}, {400.0, 0.0}, {400.0, 250.0}, {0.0, 250.0}}};
  for (const auto& [e, n] : corners) {
    const GeodeticPos g = offset_geodetic(ref, e, n);
    cfg.trajectory.waypoints.push_back({g.lat, g.lon, g.height, 10.0});
  }
  cfg.trajectory.loop = true;
  return cfg;
}

void ScenarioConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(Errc::ConfigError, what); };
  if (rate != 1 && rate != 10) bad("rate must be 1 or 10 Hz");
  if (!(duration > 0.0)) bad("duration must be positive");
  if (!(start_time >= 0.0)) bad("start_time must be >= 0");
  if (trajectory.waypoints.empty()) bad("trajectory needs at least one waypoint");
  for (const Waypoint& w : trajectory.waypoints) {
    if (!(w.speed > 0.0)) bad("waypoint speed must be positive");
    if (!(std::abs(w.lat) <= kPi / 2 && std::abs(w.lon) <= kPi)) bad("waypoint outside the geodetic range");
  }
  int total = 0;
  for (int c : constellation.counts) {
    if (c < 0) bad("satellite counts must be >= 0");
    total += c;
  }
  if (constellation.counts[0] < 1) bad("at least one GPS satellite is required");
  if (total < 4) bad("fewer than 4 satellites configured");
  if (!(constellation.shell_radius > 1e6 && constellation.shell_radius < 5e7)) bad("shell radius outside (1e6, 5e7) m");
  if (!(constellation.max_elevation > 0.0 && constellation.max_elevation <= kPi / 2)) {
    bad("all satellites below the horizon");
  }
  if (!(constellation.min_elevation > 0.0 && constellation.min_elevation < constellation.max_elevation)) {
    bad("elevation band is empty");
  }
  if (!(constellation.drift_sigma >= 0.0)) bad("drift_sigma must be >= 0");
  if (!(budget.sigma_base >= 0.0)) bad("sigma_base must be >= 0");
  if (!(budget.nlos_probability >= 0.0 && budget.nlos_probability <= 1.0)) bad("nlos probability outside [0, 1]");
  if (!(budget.nlos_bias_min > 0.0 && budget.nlos_bias_max >= budget.nlos_bias_min)) bad("nlos bias range invalid");
  if (!(budget.nlos_snr_drop >= 0.0 && budget.nlos_dwell >= 0.0 && budget.nlos_low_elevation_factor >= 1.0)) {
    bad("nlos snr drop, dwell must be >= 0 and elevation factor >= 1");
  }
  if (!(budget.sat_clock_spread >= 0.0 && budget.sat_clock_spread < 1e-2 && budget.tgd_spread >= 0.0)) {
    bad("satellite clock / tgd spread invalid");
  }
  if (!(budget.snr_noise >= 0.0)) bad("snr_noise must be >= 0");
}

std::size_t ScenarioConfig::epoch_count() const {
  return static_cast<std::size_t>(std::llround(duration * rate));
}

Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  // Independent streams so switching one error term on leaves the others untouched.
  auto stream = [&](std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
  };
  std::mt19937_64 rng = stream(1);
  std::mt19937_64 nlos_rng = stream(2);
  std::mt19937_64 noise_rng = stream(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::normal_distribution<double> noise_normal(0.0, 1.0);
  const ErrorBudget& b = cfg.budget;
  const ConstellationSpec& con = cfg.constellation;

  const Waypoint& w0 = cfg.trajectory.waypoints.front();
  const GeodeticPos ref{w0.lat, w0.lon, w0.height};
  const Eigen::Vector3d ref_ecef = geodetic_to_ecef(ref).vec();
  const Eigen::Matrix3d enu_to_ecef = enu_rotation(ref).transpose();
  const Path path(cfg.trajectory);

  std::vector<SatState> sats;
  const double sin_lo = std::sin(con.min_elevation), sin_hi = std::sin(con.max_elevation);
  int total = 0;
  for (int c : con.counts) total += c;
  int slot = 0;
  for (System sys : kAllSystems) {
    for (int k = 0; k < con.counts[static_cast<std::size_t>(sys)]; ++k, ++slot) {
      SatState s{};
      s.system = sys;
      s.id = k + 1;
      s.az = (2.0 * kPi * (slot + unit(rng))) / total - kPi;
      s.el = std::asin(sin_lo + (sin_hi - sin_lo) * unit(rng));
      s.dts = b.sat_clock_spread * (2.0 * unit(rng) - 1.0);
      s.tgd = b.tgd_spread * (2.0 * unit(rng) - 1.0);
      sats.push_back(s);
    }
  }

  const std::size_t n_epochs = cfg.epoch_count();
  const double dt = 1.0 / cfg.rate;
  const double leave = b.nlos_dwell > 0.0 ? std::min(1.0, dt / b.nlos_dwell) : 1.0;
  const double walk = con.drift_sigma * std::sqrt(dt);

  Scenario out;
  out.truth.reserve(n_epochs);
  std::vector<EpochRecord> records;
  records.reserve(n_epochs);
  for (std::size_t k = 0; k < n_epochs; ++k) {
    const double tau = static_cast<double>(k) * dt;
    EpochTruth truth;
    truth.t = cfg.start_time + tau;
    Eigen::Vector3d pos, vel;
    path.at(tau, pos, vel);
    truth.position = EcefPos::from(pos);
    truth.velocity = vel;
    truth.clock_bias = b.clock_bias + b.clock_drift * tau;
    truth.clock_drift = b.clock_drift;
    truth.isb = b.isb;
    const GeodeticPos rx_geo = ecef_to_geodetic(truth.position);
    const double tod = std::fmod(truth.t, 86400.0);

    EpochRecord rec;
    rec.t = truth.t;
    rec.truth = truth.position;
    rec.truth_clock = truth.clock_bias;
    for (SatState& s : sats) {
      if (k > 0) {
        // Smooth drift: random-walk rates, elevation reflected inside the band.
        s.az_rate += walk * normal(rng);
        s.el_rate += walk * normal(rng);
        s.az = std::remainder(s.az + s.az_rate * dt, 2.0 * kPi);
        s.el += s.el_rate * dt;
        if (s.el < con.min_elevation) {
          s.el = 2.0 * con.min_elevation - s.el;
          s.el_rate = -s.el_rate;
        } else if (s.el > con.max_elevation) {
          s.el = 2.0 * con.max_elevation - s.el;
          s.el_rate = -s.el_rate;
        }
      }
      const Eigen::Vector3d los(std::cos(s.el) * std::sin(s.az), std::cos(s.el) * std::cos(s.az), std::sin(s.el));
      const Eigen::Vector3d sat_pos = ref_ecef + con.shell_radius * (enu_to_ecef * los);
      const LookAngles look = elevation_azimuth(truth.position, EcefPos::from(sat_pos));

      double p_nlos = b.nlos_probability;
      if (look.elevation < b.nlos_low_elevation) p_nlos = std::min(1.0, p_nlos * b.nlos_low_elevation_factor);
      if (b.nlos_dwell <= 0.0 || p_nlos >= 1.0 || p_nlos <= 0.0) {
        const bool was = s.nlos;
        s.nlos = p_nlos > 0.0 && unit(nlos_rng) < p_nlos;
        if (s.nlos && (!was || b.nlos_dwell <= 0.0)) s.bias = b.nlos_bias_min + (b.nlos_bias_max - b.nlos_bias_min) * unit(nlos_rng);
      } else if (s.nlos) {
        if (unit(nlos_rng) < leave) s.nlos = false;
      } else {
        const double onset = std::min(1.0, leave * p_nlos / (1.0 - p_nlos));
        if (unit(nlos_rng) < onset) {
          s.nlos = true;
          s.bias = b.nlos_bias_min + (b.nlos_bias_max - b.nlos_bias_min) * unit(nlos_rng);
        }
      }

      SatTruth st;
      st.system = s.system;
      st.sat_id = s.id;
      st.elevation = look.elevation;
      st.nlos_bias = s.nlos ? s.bias : 0.0;
      const double sigma = b.elevation_dependent
                               ? b.sigma_base / std::sin(std::max(look.elevation, kNoiseFloorElevation))
                               : b.sigma_base;
      st.noise = sigma * noise_normal(noise_rng);
      if (b.troposphere) st.tropo = models::saastamoinen_delay(rx_geo, look.elevation, models::MetParams{});
      if (b.ionosphere) {
        st.iono = models::klobuchar_delay(rx_geo, look.elevation, look.azimuth, tod, models::kDefaultKlobucharAlpha,
                                          models::kDefaultKlobucharBeta);
      }
      const double snr_noise = b.snr_noise * noise_normal(noise_rng);

      SatObservation o;
      o.system = s.system;
      o.sat_id = s.id;
      o.sat_pos = EcefPos::from(sat_pos);
      o.sat_clock_bias = s.dts;
      o.tgd = s.tgd;
      const int isb = isb_index(s.system);
      o.pseudorange = (sat_pos - pos).norm() + truth.clock_bias + (isb >= 0 ? b.isb[static_cast<std::size_t>(isb)] : 0.0) -
                      kSpeedOfLight * s.dts + kSpeedOfLight * s.tgd + st.tropo + st.iono + st.nlos_bias + st.noise;
      o.snr = std::clamp(50.0 - 20.0 * (1.0 - std::sin(look.elevation)) - (s.nlos ? b.nlos_snr_drop : 0.0) + snr_noise,
                         10.0, 60.0);
      // Delays are supplied as external corrections, exactly as injected.
      o.tropo_delay = st.tropo;
      o.iono_delay = st.iono;
      rec.observations.push_back(o);
      truth.sats.push_back(st);
    }
    records.push_back(std::move(rec));
    out.truth.push_back(std::move(truth));
  }

  out.dataset.manifest = ingest::manifest_for(cfg.name, records, ingest::Source::Simulated, cfg.seed);
  out.dataset.manifest.approx_position = geodetic_to_ecef(ref);
  out.dataset.epochs = std::move(records);
  return out;
}

std::string describe(const ScenarioConfig& cfg) {
  std::ostringstream s;
  s << std::setprecision(6);
  const ConstellationSpec& con = cfg.constellation;
  const ErrorBudget& b = cfg.budget;
  s << "scenario " << cfg.name << " (seed " << cfg.seed << ")\n";
  s << "  epochs: " << cfg.epoch_count() << " at " << cfg.rate << " Hz over " << cfg.duration << " s\n";
  int total = 0;
  for (System sys : kAllSystems) {
    const int c = con.counts[static_cast<std::size_t>(sys)];
    total += c;
    s << "  " << to_string(sys) << ": " << c << " satellites\n";
  }
  s << "  expected visible satellites: " << total << " (elevation band " << con.min_elevation / kPi * 180.0 << " to "
    << con.max_elevation / kPi * 180.0 << " deg)\n";
  s << "  trajectory: " << cfg.trajectory.waypoints.size() << " waypoints" << (cfg.trajectory.loop ? ", looped" : "")
    << "\n";
  s << "  noise: sigma " << b.sigma_base << " m" << (b.elevation_dependent ? " / sin(el)" : "") << ", troposphere "
    << (b.troposphere ? "on" : "off") << ", ionosphere " << (b.ionosphere ? "on" : "off") << "\n";
  if (b.nlos_probability == 0.0) {
    s << "  clean scenario\n";
  } else {
    s << "  expected NLOS fraction: " << b.nlos_probability * 100.0 << "% (bias " << b.nlos_bias_min << " to "
      << b.nlos_bias_max << " m, SNR drop " << b.nlos_snr_drop << " dB, x" << b.nlos_low_elevation_factor
      << " below " << b.nlos_low_elevation / kPi * 180.0 << " deg)\n";
  }
  return s.str();
}

void write_truth_log(std::ostream& out, const ScenarioConfig& cfg, const TruthLog& truth) {
  using ingest::format_double;
  out << "{\"format\":\"lfgnss-truth\",\"version\":1,\"name\":" << nlohmann::json(cfg.name).dump() << ",\"seed\":" << cfg.seed
      << ",\"epoch_count\":" << truth.size() << "}\n";
  auto vec = [&](const Eigen::Vector3d& v) {
    out << '[' << format_double(v.x()) << ',' << format_double(v.y()) << ',' << format_double(v.z()) << ']';
  };
  for (const EpochTruth& e : truth) {
    out << "{\"t\":" << format_double(e.t) << ",\"pos\":";
    vec(e.position.vec());
    out << ",\"vel\":";
    vec(e.velocity);
    out << ",\"clock\":" << format_double(e.clock_bias) << ",\"drift\":" << format_double(e.clock_drift) << ",\"isb\":";
    vec(Eigen::Vector3d(e.isb[0], e.isb[1], e.isb[2]));
    out << ",\"sats\":[";
    for (std::size_t i = 0; i < e.sats.size(); ++i) {
      const SatTruth& s = e.sats[i];
      out << (i ? "," : "") << "{\"sys\":\"" << to_string(s.system) << "\",\"id\":" << s.sat_id
          << ",\"nlos\":" << format_double(s.nlos_bias) << ",\"noise\":" << format_double(s.noise)
          << ",\"tropo\":" << format_double(s.tropo) << ",\"iono\":" << format_double(s.iono)
          << ",\"el\":" << format_double(s.elevation) << '}';
    }
    out << "]}\n";
  }
}

}  // namespace lfgnss::sim
