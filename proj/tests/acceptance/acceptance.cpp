// Acceptance suite: one PASS/FAIL line per criterion. Arguments select criteria by number;
// without arguments all run. The CLI binary path (argv via --cli) is needed for criterion 9.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lfgnss/coarse.hpp"
#include "lfgnss/ekf.hpp"
#include "lfgnss/error.hpp"
#include "lfgnss/eval.hpp"
#include "lfgnss/features.hpp"
#include "lfgnss/ingest.hpp"
#include "lfgnss/pipeline.hpp"
#include "lfgnss/sim.hpp"
#include "lfgnss/train.hpp"
#include "oracles/naive_dop.hpp"
#include "oracles/reference_ekf.hpp"
#include "oracles/scalar_dhem.hpp"
#include "support.hpp"

using namespace lfgnss;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- 1 ----------------------------------------------------------------------

Verdict gradient_integrity() {
  const auto t0 = Clock::now();
  const train::GradcheckReport r = train::gradcheck(train::GradcheckConfig{});
  const double secs = seconds_since(t0);
  return {r.passed && secs < 30.0, std::to_string(r.parameters) + " parameters, max rel error " +
                                        fmt("%.3e", r.max_rel_error) + " at " + r.worst_param + ", " +
                                        fmt("%.1f", secs) + " s"};
}

// ---- 2 ----------------------------------------------------------------------

Verdict ils_exactness() {
  double worst_pos = 0.0, worst_clock = 0.0, worst_isb = 0.0;
  int solved = 0;
  for (std::uint64_t g = 0; g < 100; ++g) {
    std::mt19937_64 rng(1000 + g);
    std::uniform_int_distribution<int> gps(3, 6), other(2, 3);
    std::uniform_real_distribution<double> lat(-70.0, 70.0), lon(-180.0, 180.0), h(-100.0, 2000.0);
    sim::ScenarioConfig cfg;
    cfg.seed = 1 + g;
    cfg.duration = 1.0;
    cfg.trajectory.waypoints = {{lat(rng) * testsupport::kDeg, lon(rng) * testsupport::kDeg, h(rng), 1.0}};
    cfg.constellation.counts = {gps(rng), other(rng), other(rng), other(rng)};
    cfg.budget = sim::ErrorBudget::zero();
    cfg.budget.clock_bias = kSpeedOfLight * 1e-3;
    cfg.budget.isb = {3.0, -2.0, 5.0};
    const sim::Scenario s = sim::generate(cfg);
    const EpochRecord& e = s.dataset.epochs.front();
    if (e.observations.size() < 8) return {false, "geometry " + std::to_string(g) + " has too few satellites"};
    const coarse::CoarseSolution sol =
        coarse::solve_with_corrections(e.observations, e.t, coarse::cold_start_state(), models::CorrectionConfig{});
    const sim::EpochTruth& t = s.truth.front();
    worst_pos = std::max(worst_pos, (sol.rx_pos.vec() - t.position.vec()).norm());
    worst_clock = std::max(worst_clock, std::abs(sol.clock_bias - t.clock_bias));
    for (int k = 0; k < 3; ++k) worst_isb = std::max(worst_isb, std::abs(sol.isb(k) - t.isb[static_cast<std::size_t>(k)]));
    ++solved;
  }
  return {solved == 100 && worst_pos < 1e-6 && worst_clock < 1e-6 && worst_isb < 1e-6,
          std::to_string(solved) + " geometries, worst position " + fmt("%.2e", worst_pos) + " m, clock " +
              fmt("%.2e", worst_clock) + " m, ISB " + fmt("%.2e", worst_isb) + " m"};
}

// ---- 3 ----------------------------------------------------------------------

Verdict dpc_equivalence() {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<int> count(5, 20);
  std::uniform_real_distribution<double> el(5.0 * testsupport::kDeg, 89.0 * testsupport::kDeg), az(-kPi, kPi);
  double worst = 0.0;
  int geometries = 0, compared = 0, flagged = 0;
  while (geometries < 500) {
    const int n = count(rng);
    std::vector<double> e(static_cast<std::size_t>(n)), a(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      e[static_cast<std::size_t>(i)] = el(rng);
      a[static_cast<std::size_t>(i)] = az(rng);
    }
    std::vector<features::DpcResult> dpc;
    try {
      dpc = features::compute_dpc_all(e, a);
    } catch (const Error&) {
      continue;  // singular full geometry; draw another
    }
    ++geometries;
    for (std::size_t i = 0; i < dpc.size(); ++i) {
      if (dpc[i].status != features::DpcStatus::Ok) {
        ++flagged;
        continue;
      }
      worst = std::max(worst, std::abs(dpc[i].value - oracle::naive_dpc(e, a, i)));
      ++compared;
    }
  }
  return {worst < 1e-9, std::to_string(geometries) + " geometries, " + std::to_string(compared) +
                            " deltas compared (" + std::to_string(flagged) + " flagged singular), worst |diff| " +
                            fmt("%.2e", worst)};
}

// ---- 4 ----------------------------------------------------------------------

Verdict filter_equivalence() {
  sim::ScenarioConfig sc = sim::ScenarioConfig::urban_default();
  sc.seed = 404;
  sc.duration = 200.0;
  sc.budget.nlos_probability = 0.2;
  const sim::Scenario scen = sim::generate(sc);
  const pipeline::PreparedDataset data = pipeline::prepare(scen.dataset.epochs, pipeline::PrepConfig{});
  const pipeline::FilterRun run = pipeline::run_filter(data, pipeline::ElevationModel(0.3, 0.3), pipeline::FilterConfig{});

  std::vector<oracle::RefEpoch> ref_in;
  for (const auto& ep : data.epochs) {
    oracle::RefEpoch r;
    r.t = ep.t;
    r.ok = ep.ok;
    if (ep.ok) {
      r.coarse_pos = ep.coarse.rx_pos.vec();
      r.coarse_clock = ep.coarse.clock_bias;
      r.coarse_isb = ep.coarse.isb;
      for (std::size_t i = 0; i < ep.meas.size(); ++i) {
        oracle::RefSat s;
        s.pos = ep.meas.sat_pos[i];
        s.isb_slot = isb_index(ep.meas.systems[i]);
        s.z = ep.meas.z(static_cast<Eigen::Index>(i));
        const double k = 0.3 + 0.3 / std::sin(ep.elevations[i]);
        s.r = k * k;
        r.sats.push_back(s);
      }
    }
    ref_in.push_back(r);
  }
  const auto ref = oracle::reference_ekf(ref_in, oracle::RefConfig{});
  if (ref.size() != run.epochs.size()) return {false, "epoch count differs"};
  double worst_rel = 0.0, worst_abs = 0.0;
  int compared = 0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    if (ref[k].has_value() != run.epochs[k].state.has_value()) return {false, "state presence differs at epoch " + std::to_string(k)};
    if (!ref[k]) continue;
    for (int i = 0; i < ekf::kStates; ++i) {
      const long double r = ref[k]->x(i);
      const long double d = std::abs(static_cast<long double>(run.epochs[k].state->x(i)) - r);
      worst_abs = std::max(worst_abs, static_cast<double>(d));
      worst_rel = std::max(worst_rel, static_cast<double>(d / std::max<long double>(1.0L, std::abs(r))));
    }
    ++compared;
  }

  // Joseph-form soak: 10000 propagate/update cycles.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> el(15 * testsupport::kDeg, 85 * testsupport::kDeg), az(-kPi, kPi);
  std::normal_distribution<double> noise(0.0, 2.0);
  coarse::CoarseSolution c;
  c.rx_pos = geodetic_to_ecef({48.1 * testsupport::kDeg, 11.6 * testsupport::kDeg, 520.0});
  c.clock_bias = 1234.5;
  c.isb = Eigen::Vector3d(1.0, -2.0, 3.0);
  ekf::FilterState s = ekf::init_filter(c, ekf::InitConfig{}, 0.0);
  const ekf::StateVec truth = s.x;
  double asym = 0.0, min_eig = 1e300;
  for (int cycle = 0; cycle < 10000; ++cycle) {
    s = ekf::time_update(s, 1.0, ekf::ProcessNoiseConfig{});
    ekf::Measurements m;
    const int n = 8;
    m.z.resize(n);
    for (int i = 0; i < n; ++i) {
      const System sys = kAllSystems[static_cast<std::size_t>(i % 4)];
      const Eigen::Vector3d sat = testsupport::sat_position(c.rx_pos, el(rng), az(rng)).vec();
      m.sat_pos.push_back(sat);
      m.systems.push_back(sys);
      const int k = isb_index(sys);
      m.z(i) = (sat - c.rx_pos.vec()).norm() + truth(ekf::kClock) + (k >= 0 ? truth(ekf::kIsb + k) : 0.0) + noise(rng);
    }
    s = ekf::measurement_update(s, m, Eigen::VectorXd::Constant(n, 4.0), Eigen::VectorXd::Zero(n)).state;
    if (cycle % 100 == 99 || cycle == 9999) {
      asym = std::max(asym, (s.P - s.P.transpose()).cwiseAbs().maxCoeff());
      min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<ekf::StateMat>(0.5 * (s.P + s.P.transpose()))
                                      .eigenvalues()
                                      .minCoeff());
    }
  }
  const bool pass = compared >= 190 && worst_rel < 1e-9 && asym < 1e-9 && min_eig > -1e-9;
  return {pass, std::to_string(compared) + " epochs, worst state diff " + fmt("%.2e", worst_rel) +
                    " relative to max(1,|x|) (" + fmt("%.2e", worst_abs) + " absolute); 10000 cycles: asymmetry " +
                    fmt("%.2e", asym) + ", min eigenvalue " + fmt("%.3e", min_eig)};
}

// ---- 5 ----------------------------------------------------------------------

Verdict dhem_fidelity() {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> mag(0.0, 30.0), unit(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_plain = 0.0, worst_taped = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t b = 1 + static_cast<std::size_t>(trial % 32);
    std::vector<Eigen::Vector3d> errs;
    std::vector<double> base;
    for (std::size_t i = 0; i < b; ++i) {
      errs.push_back(mag(rng) * Eigen::Vector3d(z(rng), z(rng), z(rng)).normalized());
      const Eigen::Vector3d& e = errs.back();
      base.push_back(std::sqrt(e.x() * e.x() + e.y() * e.y() + e.z() * e.z()));
    }
    train::DhemConfig cfg;
    cfg.alpha = 0.1 + 2.0 * unit(rng);
    cfg.gamma = 3.0 * unit(rng);
    cfg.lambda = 0.1 * unit(rng);
    cfg.dynamic_gamma = trial % 4 != 0;
    const oracle::ScalarDhem o = oracle::scalar_dhem(base, cfg.alpha, cfg.gamma, cfg.lambda, cfg.dynamic_gamma, cfg.eps_max);
    const double scale = std::max(1.0, std::abs(o.loss));
    worst_plain = std::max(worst_plain, std::abs(train::dhem_loss(errs, cfg).loss - o.loss) / scale);
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& e : errs) vars.push_back(tape.leaf(e));
    worst_taped = std::max(worst_taped, std::abs(train::dhem_loss(tape, vars, cfg).value()(0, 0) - o.loss) / scale);
  }

  // lambda = 0: weights invariant and loss linear under uniform scaling.
  bool scaling = true;
  train::DhemConfig cfg;
  cfg.lambda = 0.0;
  cfg.eps_max = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Eigen::Vector3d> errs;
    for (int i = 0; i < 1 + trial % 20; ++i) errs.push_back(mag(rng) * Eigen::Vector3d(z(rng), z(rng), z(rng)).normalized());
    const train::DhemResult a = train::dhem_loss(errs, cfg);
    for (double c : {0.125, 0.5, 2.0, 64.0}) {
      std::vector<Eigen::Vector3d> scaled;
      for (const auto& e : errs) scaled.push_back(c * e);
      const train::DhemResult r = train::dhem_loss(scaled, cfg);
      scaling = scaling && r.weight == a.weight && r.loss == c * a.loss;
    }
  }
  return {worst_plain < 1e-12 && worst_taped < 1e-12 && scaling,
          "500 batches: worst |diff| plain " + fmt("%.2e", worst_plain) + ", taped " + fmt("%.2e", worst_taped) +
              "; lambda=0 scaling " + (scaling ? "exact" : "BROKEN")};
}

// ---- 6 ----------------------------------------------------------------------

Verdict learning_effect() {
  const auto t0 = Clock::now();
  std::vector<double> lf, ekf_rmse, ls_rmse;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    sim::ScenarioConfig sc = sim::ScenarioConfig::urban_default();
    sc.budget.nlos_probability = 0.2;
    sc.budget.nlos_bias_min = 5.0;
    sc.budget.nlos_bias_max = 30.0;
    sc.seed = seed;
    sc.duration = 3000.0;
    const sim::Scenario train_scen = sim::generate(sc);
    sc.seed = seed + 1000;
    sc.duration = 1000.0;
    const sim::Scenario test_scen = sim::generate(sc);

    const pipeline::PrepConfig prep;
    const pipeline::FilterConfig filter;
    const pipeline::PreparedDataset train_data = pipeline::prepare(train_scen.dataset.epochs, prep);
    const pipeline::PreparedDataset test_data = pipeline::prepare(test_scen.dataset.epochs, prep);
    train::TrainConfig tc;
    tc.epochs = 200;
    tc.seed = seed;
    const train::TrainResult res =
        train::train(train_data, net::NetParams::init(seed), filter, tc, train::DhemConfig{});

    const auto truth = eval::truth_of(test_data);
    const double e = eval::summarize(eval::enu_errors(eval::run_baseline_ekf(test_data, filter), truth)).rmse_3d;
    const double l = eval::summarize(eval::enu_errors(eval::run_lf(test_data, res.best, filter), truth)).rmse_3d;
    const double s = eval::summarize(eval::enu_errors(eval::run_baseline_ls(test_data), truth)).rmse_3d;
    ekf_rmse.push_back(e);
    lf.push_back(l);
    ls_rmse.push_back(s);
    per_seed += " [seed " + std::to_string(seed) + ": ls " + fmt("%.2f", s) + " ekf " + fmt("%.2f", e) + " lf " +
                fmt("%.2f", l) + "]";
    std::cout << "  seed " << seed << ": ls " << fmt("%.3f", s) << " m, ekf " << fmt("%.3f", e) << " m, lf "
              << fmt("%.3f", l) << " m (best epoch " << res.report.best_epoch << ", " << fmt("%.0f", seconds_since(t0))
              << " s elapsed)" << std::endl;
  }
  const double gain = 1.0 - median(lf) / median(ekf_rmse);
  const double secs = seconds_since(t0);
  return {gain >= 0.15 && secs < 1800.0, "median 3D RMSE lf " + fmt("%.3f", median(lf)) + " m vs ekf " +
                                             fmt("%.3f", median(ekf_rmse)) + " m: " + fmt("%.1f", 100.0 * gain) +
                                             "% lower; " + fmt("%.0f", secs) + " s;" + per_seed};
}

// ---- 7 ----------------------------------------------------------------------

Verdict schedule_and_optimizer() {
  const train::TrainConfig cfg;
  const double expect25 = cfg.eta_min + 0.5 * (cfg.lr0 - cfg.eta_min) * (1.0 + std::cos(kPi * 0.5));
  const bool sched = train::cosine_lr(0, cfg) == 0.001 && train::cosine_lr(50, cfg) == 0.001 &&
                     train::cosine_lr(25, cfg) == expect25 && std::abs(train::cosine_lr(25, cfg) - 0.00055) < 1e-15;

  // Convex oracle: f(x) = 0.5 (x - c)^T A (x - c), A SPD.
  Eigen::Matrix2d a;
  a << 3.0, 1.0, 1.0, 2.0;
  const Eigen::Vector2d target(3.0, -1.0);
  train::Matrix p = train::Matrix::Zero(2, 1);
  train::AdamState st;
  int steps = 0;
  double dist = 1.0;
  for (; steps < 1000 && dist >= 1e-6; ++steps) {
    const train::Matrix g = a * (p - target);
    train::adam_step({&p}, {g}, st, 0.1, cfg);
    dist = (p - target).norm();
  }
  return {sched && dist < 1e-6, "cosine_lr(0,25,50) = " + fmt("%.17g", train::cosine_lr(0, cfg)) + ", " +
                                    fmt("%.17g", train::cosine_lr(25, cfg)) + ", " +
                                    fmt("%.17g", train::cosine_lr(50, cfg)) + "; Adam reaches " + fmt("%.2e", dist) +
                                    " after " + std::to_string(steps) + " steps (lr 0.1)"};
}

// ---- 8 ----------------------------------------------------------------------

Verdict ingest_robustness() {
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int identical = 0;
  std::string corpus_text;
  for (int d = 0; d < 100; ++d) {
    sim::ScenarioConfig sc = sim::ScenarioConfig::urban_default();
    sc.seed = 500 + static_cast<std::uint64_t>(d);
    sc.duration = 5.0 + 20.0 * unit(rng);
    sc.rate = d % 5 == 0 ? 10 : 1;
    sc.duration = sc.rate == 10 ? 2.0 : sc.duration;
    sc.constellation.counts = {3 + d % 6, d % 4, 1 + d % 3, d % 2};
    sc.budget.nlos_probability = unit(rng) * 0.5;
    sim::Scenario s = sim::generate(sc);
    // Vary the optional fields too.
    const bool keep_truth = d % 3 != 0;
    for (EpochRecord& e : s.dataset.epochs) {
      if (!keep_truth) {
        e.truth.reset();
        e.truth_clock.reset();
      } else if (unit(rng) < 0.5) {
        e.truth_clock.reset();
      }
      for (SatObservation& o : e.observations) {
        if (unit(rng) < 0.3) o.iono_delay.reset();
        if (unit(rng) < 0.3) o.tropo_delay.reset();
      }
    }
    s.dataset.manifest = ingest::manifest_for("random-" + std::to_string(d), s.dataset.epochs,
                                              d % 2 ? ingest::Source::Imported : ingest::Source::Simulated,
                                              d % 4 ? std::optional<std::uint64_t>(sc.seed) : std::nullopt);
    std::stringstream buf;
    ingest::emit_dataset(s.dataset.manifest, s.dataset.epochs, buf);
    const std::string text = buf.str();
    const ingest::Dataset back = ingest::parse_dataset(buf);
    std::stringstream again;
    ingest::emit_dataset(back.manifest, back.epochs, again);
    if (back.manifest == s.dataset.manifest && back.epochs == s.dataset.epochs && again.str() == text) ++identical;
    if (d == 7) corpus_text = text;
  }

  // Single-byte mutations of one dataset.
  std::uniform_int_distribution<std::size_t> where(0, corpus_text.size() - 1);
  std::uniform_int_distribution<int> byte(0, 255);
  int structured = 0, accepted = 0, crashes = 0;
  for (int m = 0; m < 10000; ++m) {
    std::string mutated = corpus_text;
    const std::size_t at = where(rng);
    switch (m % 3) {
      case 0: mutated[at] = static_cast<char>(byte(rng)); break;
      case 1: mutated.erase(at, 1); break;
      default: mutated.insert(at, 1, static_cast<char>(byte(rng))); break;
    }
    std::istringstream in(mutated);
    try {
      ingest::parse_dataset(in);
      ++accepted;
    } catch (const Error&) {
      ++structured;
    } catch (...) {
      ++crashes;
    }
  }
  return {identical == 100 && crashes == 0,
          std::to_string(identical) + "/100 round trips identical; 10000 mutations: " + std::to_string(structured) +
              " structured errors, " + std::to_string(accepted) + " still valid, " + std::to_string(crashes) +
              " unstructured failures"};
}

// ---- 9 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no --cli binary given"};
  const fs::path root = fs::temp_directory_path() / "lfgnss_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> files = {"data.jsonl", "truth.jsonl", "model.json", "train.csv",
                                          "eval/report.csv", "eval/cdf.csv", "eval/summary.txt"};
  std::vector<std::string> runs[2];
  for (int r = 0; r < 2; ++r) {
    const fs::path dir = root / ("run" + std::to_string(r));
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << R"({"seed": 17, "scenario": {"duration": 300, "budget": {"nlos_probability": 0.2}},
                                          "train": {"epochs": 3}})";
    const std::string d = dir.string() + "/";
    const std::string quiet = "LFGNSS_LOG=quiet ";
    const std::string cmds[] = {
        quiet + cli + " simulate -c " + d + "cfg.json -o " + d + "data.jsonl --truth " + d + "truth.jsonl",
        quiet + cli + " train -c " + d + "cfg.json -d " + d + "data.jsonl --split 0.7,0.3 --part 0 -o " + d +
            "model.json --report " + d + "train.csv",
        quiet + cli + " eval -c " + d + "cfg.json -d " + d + "data.jsonl --split 0.7,0.3 --part 1 -m " + d +
            "model.json -o " + d + "eval",
    };
    for (const std::string& c : cmds) {
      if (std::system(c.c_str()) != 0) return {false, "command failed: " + c};
    }
    for (const std::string& f : files) runs[r].push_back(slurp(dir / f));
  }
  std::string diff;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (runs[0][i].empty()) diff += " " + files[i] + "(empty)";
    else if (runs[0][i] != runs[1][i]) diff += " " + files[i];
  }
  return {diff.empty(), diff.empty() ? std::to_string(files.size()) + " artifacts byte-identical across two runs"
                                     : "differing:" + diff};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else {
      selected.insert(std::atoi(a.c_str()));
    }
  }
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"ILS exactness", ils_exactness},
      {"DPC oracle equivalence", dpc_equivalence},
      {"filter equivalence", filter_equivalence},
      {"DHEM formula fidelity", dhem_fidelity},
      {"learning effect", learning_effect},
      {"schedule and optimizer", schedule_and_optimizer},
      {"ingest robustness", ingest_robustness},
      {"determinism", [&cli] { return determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
