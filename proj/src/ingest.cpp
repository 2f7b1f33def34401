#include "lfgnss/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lfgnss/error.hpp"

namespace lfgnss::ingest {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string_view to_string(Source s) { return s == Source::Simulated ? "simulated" : "imported"; }

// ---- emission -------------------------------------------------------------

void put_vec(std::ostream& out, const EcefPos& p) {
  out << '[' << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z) << ']';
}

void emit_manifest(const DatasetManifest& m, std::ostream& out) {
  out << "{\"format\":\"" << kDatasetFormat << "\",\"version\":" << kFormatVersion << ",\"manifest\":{";
  out << "\"name\":" << json(m.name).dump() << ",\"epoch_count\":" << m.epoch_count << ",\"systems\":[";
  for (std::size_t i = 0; i < m.systems.size(); ++i) {
    out << (i ? "," : "") << '"' << lfgnss::to_string(m.systems[i]) << '"';
  }
  out << "],\"has_truth\":" << (m.has_truth ? "true" : "false") << ",\"source\":\"" << to_string(m.source) << '"';
  if (m.seed) out << ",\"seed\":" << *m.seed;
  if (m.approx_position) {
    out << ",\"approx_position\":";
    put_vec(out, *m.approx_position);
  }
  out << "}}\n";
}

void emit_epoch(const EpochRecord& e, std::ostream& out) {
  out << "{\"t\":" << format_double(e.t) << ",\"obs\":[";
  for (std::size_t i = 0; i < e.observations.size(); ++i) {
    const SatObservation& o = e.observations[i];
    out << (i ? "," : "") << "{\"sys\":\"" << lfgnss::to_string(o.system) << "\",\"id\":" << o.sat_id
        << ",\"P\":" << format_double(o.pseudorange) << ",\"snr\":" << format_double(o.snr) << ",\"pos\":";
    put_vec(out, o.sat_pos);
    out << ",\"dts\":" << format_double(o.sat_clock_bias) << ",\"tgd\":" << format_double(o.tgd);
    if (o.iono_delay) out << ",\"iono\":" << format_double(*o.iono_delay);
    if (o.tropo_delay) out << ",\"tropo\":" << format_double(*o.tropo_delay);
    out << '}';
  }
  out << ']';
  if (e.truth) {
    out << ",\"truth\":";
    put_vec(out, *e.truth);
  }
  if (e.truth_clock) out << ",\"truth_clock\":" << format_double(*e.truth_clock);
  out << "}\n";
}

// ---- strict parsing helpers -------------------------------------------------

struct LineContext {
  std::size_t line;

  [[noreturn]] void fail(const std::string& reason) const { throw ParseError(Errc::FormatError, line, reason); }

  void require_keys(const json& obj, std::initializer_list<const char*> required,
                    std::initializer_list<const char*> optional, const char* what) const {
    if (!obj.is_object()) fail(std::string(what) + " must be an object");
    for (const char* k : required) {
      if (!obj.contains(k)) fail(std::string(what) + " missing field '" + k + "'");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const bool known = std::any_of(required.begin(), required.end(), [&](const char* k) { return it.key() == k; }) ||
                         std::any_of(optional.begin(), optional.end(), [&](const char* k) { return it.key() == k; });
      if (!known) fail(std::string(what) + " has unknown field '" + it.key() + "'");
    }
  }

  double number(const json& v, const char* field) const {
    if (!v.is_number()) fail(std::string("field '") + field + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(std::string("field '") + field + "' is not finite");
    return d;
  }

  long long integer(const json& v, const char* field) const {
    if (!v.is_number_integer()) fail(std::string("field '") + field + "' must be an integer");
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<long long>::max())) {
        fail(std::string("field '") + field + "' out of range");
      }
      return static_cast<long long>(u);
    }
    return v.get<long long>();
  }

  EcefPos vec3(const json& v, const char* field) const {
    if (!v.is_array() || v.size() != 3) fail(std::string("field '") + field + "' must be a 3-element array");
    return {number(v[0], field), number(v[1], field), number(v[2], field)};
  }

  System system(const json& v) const {
    if (!v.is_string()) fail("field 'sys' must be a string");
    const auto s = parse_system(v.get_ref<const std::string&>());
    if (!s) fail("unknown constellation '" + v.get<std::string>() + "'");
    return *s;
  }
};

DatasetManifest parse_header(const std::string& text) {
  const LineContext ctx{1};
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    ctx.fail(std::string("malformed header: ") + e.what());
  }
  if (!j.is_object()) ctx.fail("header must be an object");
  if (!j.contains("format") || !j["format"].is_string() || j["format"].get<std::string>() != kDatasetFormat) {
    throw ParseError(Errc::VersionError, 1, "not an lfgnss-dataset header");
  }
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<long long>() != kFormatVersion) {
    throw ParseError(Errc::VersionError, 1, "unsupported format version");
  }
  ctx.require_keys(j, {"format", "version", "manifest"}, {}, "header");
  const json& m = j["manifest"];
  ctx.require_keys(m, {"name", "epoch_count", "systems", "has_truth", "source"}, {"seed", "approx_position"},
                   "manifest");

  DatasetManifest out;
  if (!m["name"].is_string()) ctx.fail("field 'name' must be a string");
  out.name = m["name"].get<std::string>();
  const long long count = ctx.integer(m["epoch_count"], "epoch_count");
  if (count < 0) ctx.fail("field 'epoch_count' must be non-negative");
  out.epoch_count = static_cast<std::size_t>(count);
  if (!m["systems"].is_array()) ctx.fail("field 'systems' must be an array");
  for (const json& s : m["systems"]) out.systems.push_back(ctx.system(s));
  if (!std::is_sorted(out.systems.begin(), out.systems.end()) ||
      std::adjacent_find(out.systems.begin(), out.systems.end()) != out.systems.end()) {
    ctx.fail("field 'systems' must be ascending and unique");
  }
  if (!m["has_truth"].is_boolean()) ctx.fail("field 'has_truth' must be a boolean");
  out.has_truth = m["has_truth"].get<bool>();
  if (!m["source"].is_string()) ctx.fail("field 'source' must be a string");
  const std::string source = m["source"].get<std::string>();
  if (source == "simulated") {
    out.source = Source::Simulated;
  } else if (source == "imported") {
    out.source = Source::Imported;
  } else {
    ctx.fail("field 'source' must be 'simulated' or 'imported'");
  }
  if (m.contains("seed")) {
    if (!m["seed"].is_number_unsigned()) ctx.fail("field 'seed' must be a non-negative integer");
    out.seed = m["seed"].get<std::uint64_t>();
  }
  if (m.contains("approx_position")) out.approx_position = ctx.vec3(m["approx_position"], "approx_position");
  return out;
}

EpochRecord parse_epoch(const std::string& text, std::size_t line) {
  const LineContext ctx{line};
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    ctx.fail(std::string("malformed record: ") + e.what());
  }
  ctx.require_keys(j, {"t", "obs"}, {"truth", "truth_clock"}, "epoch");
  EpochRecord rec;
  rec.t = ctx.number(j["t"], "t");
  if (!j["obs"].is_array()) ctx.fail("field 'obs' must be an array");
  for (const json& o : j["obs"]) {
    ctx.require_keys(o, {"sys", "id", "P", "snr", "pos", "dts", "tgd"}, {"iono", "tropo"}, "observation");
    SatObservation obs;
    obs.system = ctx.system(o["sys"]);
    const long long id = ctx.integer(o["id"], "id");
    if (id < 0 || id > 1000) ctx.fail("field 'id' out of range");
    obs.sat_id = static_cast<int>(id);
    obs.pseudorange = ctx.number(o["P"], "P");
    obs.snr = ctx.number(o["snr"], "snr");
    obs.sat_pos = ctx.vec3(o["pos"], "pos");
    obs.sat_clock_bias = ctx.number(o["dts"], "dts");
    obs.tgd = ctx.number(o["tgd"], "tgd");
    if (o.contains("iono")) obs.iono_delay = ctx.number(o["iono"], "iono");
    if (o.contains("tropo")) obs.tropo_delay = ctx.number(o["tropo"], "tropo");
    try {
      validate_observation(obs);
    } catch (const Error& e) {
      ctx.fail(e.what());
    }
    rec.observations.push_back(obs);
  }
  if (j.contains("truth")) rec.truth = ctx.vec3(j["truth"], "truth");
  if (j.contains("truth_clock")) rec.truth_clock = ctx.number(j["truth_clock"], "truth_clock");

  std::set<std::pair<System, int>> seen;
  for (const SatObservation& o : rec.observations) {
    if (!seen.emplace(o.system, o.sat_id).second) ctx.fail("duplicate satellite in epoch");
  }
  return rec;
}

}  // namespace

void validate_observation(const SatObservation& obs) {
  auto bad = [](const std::string& what) { throw Error(Errc::FormatError, what); };
  if (!(obs.pseudorange > 1e6 && obs.pseudorange < 1e8)) bad("pseudorange outside (1e6, 1e8) m");
  if (!(obs.snr >= 0.0 && obs.snr <= 70.0)) bad("snr outside [0, 70] dB-Hz");
  if (!(std::abs(obs.sat_clock_bias) < 1e-2)) bad("satellite clock bias magnitude >= 1e-2 s");
  if (!std::isfinite(obs.tgd)) bad("tgd not finite");
  if (!obs.sat_pos.vec().allFinite()) bad("satellite position not finite");
  if (obs.iono_delay && !std::isfinite(*obs.iono_delay)) bad("iono delay not finite");
  if (obs.tropo_delay && !std::isfinite(*obs.tropo_delay)) bad("tropo delay not finite");
}

void validate_records(const std::vector<EpochRecord>& records) {
  for (std::size_t k = 0; k < records.size(); ++k) {
    const EpochRecord& r = records[k];
    if (!std::isfinite(r.t)) throw Error(Errc::FormatError, "epoch time not finite");
    if (k > 0 && !(r.t > records[k - 1].t)) throw Error(Errc::OrderError, "epoch times not strictly increasing");
    std::set<std::pair<System, int>> seen;
    for (const SatObservation& o : r.observations) {
      validate_observation(o);
      if (!seen.emplace(o.system, o.sat_id).second) throw Error(Errc::FormatError, "duplicate satellite in epoch");
    }
    if (r.truth && !r.truth->vec().allFinite()) throw Error(Errc::FormatError, "truth not finite");
  }
}

DatasetManifest manifest_for(const std::string& name, const std::vector<EpochRecord>& records, Source source,
                             std::optional<std::uint64_t> seed) {
  DatasetManifest m;
  m.name = name;
  m.epoch_count = records.size();
  std::set<System> systems;
  bool truth = !records.empty();
  for (const EpochRecord& r : records) {
    for (const SatObservation& o : r.observations) systems.insert(o.system);
    truth = truth && r.truth.has_value();
  }
  m.systems.assign(systems.begin(), systems.end());
  m.has_truth = truth;
  m.source = source;
  m.seed = seed;
  return m;
}

Dataset parse_dataset(std::istream& in) {
  std::string text;
  if (!std::getline(in, text)) throw ParseError(Errc::VersionError, 1, "missing header line");
  Dataset ds;
  ds.manifest = parse_header(text);

  std::size_t line = 1;
  while (std::getline(in, text)) {
    ++line;
    EpochRecord rec = parse_epoch(text, line);
    if (!ds.epochs.empty() && !(rec.t > ds.epochs.back().t)) {
      throw ParseError(Errc::OrderError, line, "timestamp not strictly increasing");
    }
    for (const SatObservation& o : rec.observations) {
      if (!std::binary_search(ds.manifest.systems.begin(), ds.manifest.systems.end(), o.system)) {
        throw ParseError(Errc::FormatError, line, "constellation not declared in manifest");
      }
    }
    if (ds.manifest.has_truth && !rec.truth) throw ParseError(Errc::FormatError, line, "manifest promises truth");
    ds.epochs.push_back(std::move(rec));
  }
  if (ds.epochs.size() != ds.manifest.epoch_count) {
    throw ParseError(Errc::FormatError, line, "epoch_count does not match record count");
  }
  return ds;
}

Dataset parse_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return parse_dataset(in);
}

void emit_dataset(const DatasetManifest& manifest, const std::vector<EpochRecord>& records, std::ostream& out) {
  if (manifest.epoch_count != records.size()) {
    throw Error(Errc::FormatError, "manifest epoch_count does not match record count");
  }
  if (!std::is_sorted(manifest.systems.begin(), manifest.systems.end()) ||
      std::adjacent_find(manifest.systems.begin(), manifest.systems.end()) != manifest.systems.end()) {
    throw Error(Errc::FormatError, "manifest systems must be ascending and unique");
  }
  validate_records(records);
  for (const EpochRecord& r : records) {
    if (manifest.has_truth && !r.truth) throw Error(Errc::FormatError, "manifest promises truth on every epoch");
    for (const SatObservation& o : r.observations) {
      if (std::find(manifest.systems.begin(), manifest.systems.end(), o.system) == manifest.systems.end()) {
        throw Error(Errc::FormatError, "constellation not declared in manifest");
      }
    }
  }
  emit_manifest(manifest, out);
  for (const EpochRecord& r : records) emit_epoch(r, out);
}

void emit_dataset(const DatasetManifest& manifest, const std::vector<EpochRecord>& records,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  emit_dataset(manifest, records, out);
  out.flush();
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

std::vector<Split> split_dataset(const std::vector<EpochRecord>& records, const std::vector<double>& fractions,
                                 const std::vector<std::string>& names) {
  if (fractions.empty()) throw Error(Errc::ConfigError, "no split fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw Error(Errc::ConfigError, "split fractions must be positive");
    total += f;
  }
  if (total > 1.0 + 1e-12) throw Error(Errc::ConfigError, "split fractions sum above 1");
  if (!names.empty() && names.size() != fractions.size()) throw Error(Errc::ConfigError, "split name count mismatch");

  const auto n = static_cast<double>(records.size());
  std::vector<Split> out;
  double cumulative = 0.0;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    cumulative += fractions[i];
    const auto end = std::min(records.size(), static_cast<std::size_t>(std::llround(cumulative * n)));
    if (end <= begin) throw Error(Errc::EmptySplit, "split " + std::to_string(i) + " receives no epochs");
    Split s;
    s.name = names.empty() ? "part" + std::to_string(i) : names[i];
    s.first = begin;
    s.epochs.assign(records.begin() + static_cast<std::ptrdiff_t>(begin),
                    records.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(s));
    begin = end;
  }
  return out;
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(Errc::ConfigError, "bad split fraction '" + item + "'");
    }
  }
  return out;
}

}  // namespace lfgnss::ingest
