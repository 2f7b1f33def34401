#include "lfgnss/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lfgnss/error.hpp"

namespace lfgnss::config {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kDeg = kPi / 180.0;

/// Reads fields out of a JSON object, rejecting keys nobody asked for.
class Reader {
 public:
  Reader(const json& node, std::string where) : node_(node), where_(std::move(where)) {
    if (!node_.is_object()) fail(where_, "expected an object");
  }

  static void fail(const std::string& where, const std::string& what) {
    throw Error(Errc::ConfigError, (where.empty() ? std::string("config") : where) + ": " + what);
  }

  void num(const char* key, double& v) {
    if (const json* j = take(key)) {
      if (!j->is_number()) fail(path(key), "expected a number");
      v = j->get<double>();
    }
  }
  void deg(const char* key, double& rad) {
    double d = rad / kDeg;
    num(key, d);
    rad = d * kDeg;
  }
  void integer(const char* key, int& v) {
    if (const json* j = take(key)) {
      if (!j->is_number_integer()) fail(path(key), "expected an integer");
      v = j->get<int>();
    }
  }
  void size(const char* key, std::size_t& v) {
    if (const json* j = take(key)) {
      if (!j->is_number_unsigned()) fail(path(key), "expected a non-negative integer");
      v = j->get<std::size_t>();
    }
  }
  void u64(const char* key, std::uint64_t& v) {
    if (const json* j = take(key)) {
      if (!j->is_number_unsigned()) fail(path(key), "expected a non-negative integer");
      v = j->get<std::uint64_t>();
    }
  }
  void flag(const char* key, bool& v) {
    if (const json* j = take(key)) {
      if (!j->is_boolean()) fail(path(key), "expected true or false");
      v = j->get<bool>();
    }
  }
  void text(const char* key, std::string& v) {
    if (const json* j = take(key)) {
      if (!j->is_string()) fail(path(key), "expected a string");
      v = j->get<std::string>();
    }
  }
  template <std::size_t N>
  void nums(const char* key, std::array<double, N>& v) {
    if (const json* j = take(key)) {
      if (!j->is_array() || j->size() != N) fail(path(key), "expected an array of " + std::to_string(N) + " numbers");
      for (std::size_t i = 0; i < N; ++i) {
        if (!(*j)[i].is_number()) fail(path(key), "expected numbers");
        v[i] = (*j)[i].get<double>();
      }
    }
  }
  void section(const char* key, const std::function<void(Reader&)>& body) {
    if (const json* j = take(key)) {
      Reader sub(*j, path(key));
      body(sub);
      sub.finish();
    }
  }
  void waypoints(const char* key, std::vector<sim::Waypoint>& v) {
    if (const json* j = take(key)) {
      if (!j->is_array()) fail(path(key), "expected an array");
      v.clear();
      for (std::size_t i = 0; i < j->size(); ++i) {
        Reader w((*j)[i], path(key) + "[" + std::to_string(i) + "]");
        sim::Waypoint wp;
        w.deg("lat_deg", wp.lat);
        w.deg("lon_deg", wp.lon);
        w.num("height", wp.height);
        w.num("speed", wp.speed);
        w.finish();
        v.push_back(wp);
      }
    }
  }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) fail(path(item.key().c_str()), "unknown key");
    }
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }
  std::string path(const char* key) const { return where_.empty() ? std::string(key) : where_ + "." + key; }

  const json& node_;
  std::string where_;
  std::set<std::string> seen_;
};

/// Mirror of Reader that serializes.
class Writer {
 public:
  explicit Writer(ordered_json& node) : node_(node) { node_ = ordered_json::object(); }

  void num(const char* key, double& v) { node_[key] = v; }
  void deg(const char* key, double& rad) { node_[key] = rad / kDeg; }
  void integer(const char* key, int& v) { node_[key] = v; }
  void size(const char* key, std::size_t& v) { node_[key] = v; }
  void u64(const char* key, std::uint64_t& v) { node_[key] = v; }
  void flag(const char* key, bool& v) { node_[key] = v; }
  void text(const char* key, std::string& v) { node_[key] = v; }
  template <std::size_t N>
  void nums(const char* key, std::array<double, N>& v) {
    node_[key] = v;
  }
  void section(const char* key, const std::function<void(Writer&)>& body) {
    Writer sub(node_[key]);
    body(sub);
  }
  void waypoints(const char* key, std::vector<sim::Waypoint>& v) {
    ordered_json arr = ordered_json::array();
    for (sim::Waypoint& wp : v) {
      ordered_json w;
      Writer ww(w);
      ww.deg("lat_deg", wp.lat);
      ww.deg("lon_deg", wp.lon);
      ww.num("height", wp.height);
      ww.num("speed", wp.speed);
      arr.push_back(w);
    }
    node_[key] = arr;
  }

 private:
  ordered_json& node_;
};

template <class V>
void visit(V& v, RunConfig& c) {
  v.u64("seed", c.seed);
  v.section("qc", [&](V& s) {
    coarse::QcConfig& q = c.prep.qc;
    s.deg("elevation_mask_deg", q.elevation_mask);
    s.num("snr_min", q.snr_min);
    s.num("residual_reject_factor", q.residual_reject_factor);
    s.integer("min_sats_per_system", q.min_sats_per_system);
    s.num("min_residual_scale", q.min_residual_scale);
  });
  v.section("ils", [&](V& s) {
    s.integer("max_iterations", c.prep.ils.max_iterations);
    s.num("position_tolerance", c.prep.ils.position_tolerance);
    s.num("max_condition", c.prep.ils.max_condition);
  });
  v.section("corrections", [&](V& s) {
    models::CorrectionConfig& m = c.prep.corrections;
    s.flag("use_saastamoinen", m.use_saastamoinen);
    s.flag("use_klobuchar", m.use_klobuchar);
    s.nums("klobuchar_alpha", m.klobuchar_alpha);
    s.nums("klobuchar_beta", m.klobuchar_beta);
    s.num("pressure_hpa", m.met.pressure_hpa);
    s.num("temperature_k", m.met.temperature_k);
    s.num("humidity", m.met.humidity);
  });
  v.section("features", [&](V& s) {
    features::NormalizationSpec& n = c.prep.norms;
    s.size("n_max", c.prep.n_max);
    s.num("snr_scale", n.snr_scale);
    s.num("ela_scale", n.ela_scale);
    s.num("psr_scale", n.psr_scale);
    s.num("psr_clip", n.psr_clip);
    s.num("dpc_scale", n.dpc_scale);
    s.num("dpc_clip", n.dpc_clip);
  });
  v.section("init", [&](V& s) {
    ekf::InitConfig& i = c.filter.init;
    s.num("sigma_pos", i.sigma_pos);
    s.num("sigma_vel", i.sigma_vel);
    s.num("sigma_clock", i.sigma_clock);
    s.num("sigma_drift", i.sigma_drift);
    s.num("sigma_isb", i.sigma_isb);
  });
  v.section("process_noise", [&](V& s) {
    ekf::ProcessNoiseConfig& q = c.filter.process_noise;
    s.num("velocity_density", q.velocity_density);
    s.num("clock_drift_density", q.clock_drift_density);
    s.num("isb_density", q.isb_density);
  });
  v.section("baseline", [&](V& s) {
    s.num("a", c.baseline.a);
    s.num("b", c.baseline.b);
  });
  v.section("train", [&](V& s) {
    train::TrainConfig& t = c.train;
    s.integer("epochs", t.epochs);
    s.integer("batch_size", t.batch_size);
    s.num("lr0", t.lr0);
    s.integer("t_max", t.t_max);
    s.num("eta_min", t.eta_min);
    s.num("beta1", t.beta1);
    s.num("beta2", t.beta2);
    s.num("adam_eps", t.adam_eps);
    s.num("validation_fraction", t.validation_fraction);
  });
  v.section("dhem", [&](V& s) {
    s.num("alpha", c.dhem.alpha);
    s.num("gamma", c.dhem.gamma);
    s.num("lambda", c.dhem.lambda);
    s.flag("dynamic_gamma", c.dhem.dynamic_gamma);
    s.num("eps_max", c.dhem.eps_max);
  });
  v.section("scenario", [&](V& s) {
    sim::ScenarioConfig& sc = c.scenario;
    s.text("name", sc.name);
    s.num("duration", sc.duration);
    s.integer("rate", sc.rate);
    s.num("start_time", sc.start_time);
    s.section("constellation", [&](V& k) {
      k.integer("gps", sc.constellation.counts[0]);
      k.integer("bds", sc.constellation.counts[1]);
      k.integer("gal", sc.constellation.counts[2]);
      k.integer("glo", sc.constellation.counts[3]);
      k.num("shell_radius", sc.constellation.shell_radius);
      k.deg("min_elevation_deg", sc.constellation.min_elevation);
      k.deg("max_elevation_deg", sc.constellation.max_elevation);
      k.num("drift_sigma", sc.constellation.drift_sigma);
    });
    s.section("trajectory", [&](V& k) {
      k.flag("loop", sc.trajectory.loop);
      k.waypoints("waypoints", sc.trajectory.waypoints);
    });
    s.section("budget", [&](V& k) {
      sim::ErrorBudget& b = sc.budget;
      k.num("sigma_base", b.sigma_base);
      k.flag("elevation_dependent", b.elevation_dependent);
      k.num("clock_bias", b.clock_bias);
      k.num("clock_drift", b.clock_drift);
      k.nums("isb", b.isb);
      k.flag("troposphere", b.troposphere);
      k.flag("ionosphere", b.ionosphere);
      k.num("sat_clock_spread", b.sat_clock_spread);
      k.num("tgd_spread", b.tgd_spread);
      k.num("nlos_probability", b.nlos_probability);
      k.num("nlos_bias_min", b.nlos_bias_min);
      k.num("nlos_bias_max", b.nlos_bias_max);
      k.num("nlos_snr_drop", b.nlos_snr_drop);
      k.deg("nlos_low_elevation_deg", b.nlos_low_elevation);
      k.num("nlos_low_elevation_factor", b.nlos_low_elevation_factor);
      k.num("nlos_dwell", b.nlos_dwell);
      k.num("snr_noise", b.snr_noise);
    });
  });
  v.section("paths", [&](V& s) {
    s.text("data", c.paths.data);
    s.text("model", c.paths.model);
    s.text("output", c.paths.output);
  });
}

}  // namespace

void RunConfig::validate() const {
  prep.qc.validate();
  prep.corrections.validate();
  if (prep.n_max < 4) throw Error(Errc::ConfigError, "features.n_max must be >= 4");
  if (prep.ils.max_iterations < 1 || !(prep.ils.position_tolerance > 0.0) || !(prep.ils.max_condition > 1.0)) {
    throw Error(Errc::ConfigError, "ils settings out of range");
  }
  const features::NormalizationSpec& n = prep.norms;
  if (!(n.snr_scale > 0 && n.ela_scale > 0 && n.psr_scale > 0 && n.psr_clip > 0 && n.dpc_scale > 0 && n.dpc_clip > 0)) {
    throw Error(Errc::ConfigError, "feature scales and clips must be positive");
  }
  filter.init.validate();
  filter.process_noise.validate();
  if (!(baseline.a >= 0.0 && baseline.b >= 0.0 && baseline.a + baseline.b > 0.0)) {
    throw Error(Errc::ConfigError, "baseline weights must be >= 0 and not both zero");
  }
  train.validate();
  dhem.validate();
  scenario.validate();
}

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  scenario.seed = s;
  train.seed = s;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  Reader r(doc, "");
  visit(r, cfg);
  r.finish();
  cfg.apply_seed(cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  ordered_json doc;
  Writer w(doc);
  visit(w, copy);
  return doc.dump(2) + "\n";
}

}  // namespace lfgnss::config
