#include "lfgnss/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "lfgnss/config.hpp"
#include "lfgnss/error.hpp"
#include "lfgnss/eval.hpp"
#include "lfgnss/ingest.hpp"
#include "lfgnss/network.hpp"
#include "lfgnss/pipeline.hpp"
#include "lfgnss/sim.hpp"
#include "lfgnss/train.hpp"

namespace lfgnss::cli {

namespace fs = std::filesystem;

namespace {

enum class Verbosity { Quiet, Info, Debug };

Verbosity verbosity() {
  const char* v = std::getenv("LFGNSS_LOG");
  if (v == nullptr) return Verbosity::Info;
  const std::string s(v);
  if (s == "quiet") return Verbosity::Quiet;
  if (s == "debug") return Verbosity::Debug;
  return Verbosity::Info;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  return out;
}

const std::map<std::string, ad::Op>& op_names() {
  static const std::map<std::string, ad::Op> m = {
      {"add", ad::Op::Add},         {"sub", ad::Op::Sub},           {"mul", ad::Op::Mul},         {"div_scalar", ad::Op::DivScalarVar},
      {"matmul", ad::Op::MatMul},   {"transpose", ad::Op::Transpose}, {"concat", ad::Op::ConcatCols},
      {"slice", ad::Op::SliceCols}, {"softmax", ad::Op::Softmax},   {"relu", ad::Op::Relu},
      {"softplus", ad::Op::Softplus}, {"layer_norm", ad::Op::LayerNorm}, {"spd_solve", ad::Op::SpdSolve},
      {"reciprocal", ad::Op::Reciprocal}, {"sqrt", ad::Op::Sqrt},   {"exp", ad::Op::Exp},
      {"pow", ad::Op::Pow},         {"sum", ad::Op::Sum},           {"mean", ad::Op::Mean},
      {"max", ad::Op::Max},         {"diag", ad::Op::Diag},         {"scale", ad::Op::Scale},
      {"add_row", ad::Op::AddRowBroadcast}};
  return m;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string split;
  std::size_t part = 0;
};

config::RunConfig load(const Common& c) {
  config::RunConfig cfg;
  if (!c.config.empty()) cfg = config::load_config(c.config);
  if (c.seed) cfg.apply_seed(*c.seed);
  return cfg;
}

std::string pick(const std::string& flag, const std::string& fallback, const char* what) {
  const std::string v = flag.empty() ? fallback : flag;
  if (v.empty()) throw CLI::ValidationError(std::string("--") + what, "required (flag or paths section)");
  return v;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "JSON config file");
  sub->add_option("--seed", c.seed, "overrides the config seed");
}

void add_split(CLI::App* sub, Common& c) {
  sub->add_option("--split", c.split, "contiguous fractions, e.g. 0.8,0.2");
  sub->add_option("--part", c.part, "which split subset to use (0-based)");
}

/// Parses the dataset and applies --split/--part.
ingest::Dataset load_data(const Common& c, const std::string& path) {
  ingest::Dataset ds = ingest::parse_dataset(fs::path(path));
  if (c.split.empty()) {
    if (c.part != 0) throw CLI::ValidationError("--part", "needs --split");
    return ds;
  }
  auto parts = ingest::split_dataset(ds.epochs, ingest::parse_fractions(c.split));
  if (c.part >= parts.size()) throw CLI::ValidationError("--part", "index beyond the split count");
  ds.epochs = std::move(parts[c.part].epochs);
  return ds;
}

// ---- subcommands ------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string out, truth;
  std::optional<double> duration, nlos;
  bool describe = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  config::RunConfig cfg = load(a.common);
  if (a.duration) cfg.scenario.duration = *a.duration;
  if (a.nlos) cfg.scenario.budget.nlos_probability = *a.nlos;
  cfg.scenario.validate();
  if (a.describe) {
    out << sim::describe(cfg.scenario);
    if (a.out.empty()) return kExitOk;
  }
  const std::string path = pick(a.out, cfg.paths.data, "out");
  const sim::Scenario s = sim::generate(cfg.scenario);
  std::ofstream data = open_out(path);
  ingest::emit_dataset(s.dataset.manifest, s.dataset.epochs, data);
  if (!a.truth.empty()) {
    std::ofstream truth = open_out(a.truth);
    sim::write_truth_log(truth, cfg.scenario, s.truth);
  }
  if (verbosity() != Verbosity::Quiet) out << "wrote " << s.dataset.epochs.size() << " epochs to " << path << "\n";
  return kExitOk;
}

struct TrainArgs {
  Common common;
  std::string data, model, report, init;
  std::optional<int> epochs;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  config::RunConfig cfg = load(a.common);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  cfg.validate();
  const ingest::Dataset ds = load_data(a.common, pick(a.data, cfg.paths.data, "data"));
  if (!ds.manifest.has_truth) throw Error(Errc::NoGroundTruth, "training data carries no truth");
  const pipeline::PreparedDataset prepared = pipeline::prepare(ds.epochs, cfg.prep);
  const net::NetParams init = a.init.empty() ? net::NetParams::init(cfg.train.seed) : net::load_params(a.init);
  const Verbosity v = verbosity();
  train::Progress progress;
  if (v == Verbosity::Debug) {
    progress = [&err](int epoch, double loss, double val, double lr) {
      err << "epoch " << epoch << " lr " << lr << " loss " << loss << " val_rmse_3d " << val << "\n";
    };
  }
  const train::TrainResult result = train::train(prepared, init, cfg.filter, cfg.train, cfg.dhem, progress);
  const std::string model_path = pick(a.model, cfg.paths.model, "model");
  net::save_params(result.best, model_path);
  if (!a.report.empty()) {
    std::ofstream rep = open_out(a.report);
    result.report.write_csv(rep);
  }
  if (v != Verbosity::Quiet) {
    out << "best epoch " << result.report.best_epoch << ", validation 3D RMSE "
        << ingest::format_double(result.report.best_val_rmse) << " m; model written to " << model_path << "\n";
  }
  return kExitOk;
}

struct RunArgs {
  Common common;
  std::string data, model, method = "lf", out, diagnostics, features;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  config::RunConfig cfg = load(a.common);
  cfg.validate();
  const ingest::Dataset ds = load_data(a.common, pick(a.data, cfg.paths.data, "data"));
  const pipeline::PreparedDataset prepared = pipeline::prepare(ds.epochs, cfg.prep);

  std::optional<net::NetParams> params;
  std::optional<pipeline::FilterRun> run;
  eval::Solutions sol;
  if (a.method == "ls") {
    sol = eval::run_baseline_ls(prepared);
  } else if (a.method == "ekf") {
    run = pipeline::run_filter(prepared, pipeline::ElevationModel(cfg.baseline.a, cfg.baseline.b), cfg.filter);
  } else {
    params = net::load_params(pick(a.model, cfg.paths.model, "model"));
    run = pipeline::run_filter(prepared, pipeline::NetworkModel(*params), cfg.filter);
  }
  if (run) sol = pipeline::positions(*run);

  std::vector<double> t;
  for (const EpochRecord& e : ds.epochs) t.push_back(e.t);
  eval::ErrorSeries errors;
  if (ds.manifest.has_truth) errors = eval::enu_errors(sol, eval::truth_of(ds.epochs));
  const std::string path = pick(a.out, cfg.paths.output, "out");
  std::ofstream sol_out = open_out(path);
  eval::write_solutions_csv(sol_out, t, sol, errors);
  if (!a.diagnostics.empty()) {
    if (!run) throw Error(Errc::ConfigError, "diagnostics need a filter method (ekf or lf)");
    std::ofstream diag = open_out(a.diagnostics);
    pipeline::write_diagnostics_csv(diag, *run);
  }
  if (!a.features.empty()) {
    std::ofstream f = open_out(a.features);
    features::write_feature_csv_header(f);
    // Re-derive the packed rows; preparation keeps only the compact block.
    std::optional<coarse::State7> previous;
    for (const EpochRecord& rec : ds.epochs) {
      try {
        std::optional<EcefPos> prior;
        if (previous) prior = EcefPos::from(previous->head<3>());
        const coarse::QcResult qc =
            coarse::quality_control(rec, prior, cfg.prep.qc, cfg.prep.corrections, previous, cfg.prep.ils);
        const auto raw = features::extract(qc.filtered, qc.solution);
        const auto row = features::pack_features(qc.filtered, raw, cfg.prep.norms, cfg.prep.n_max);
        features::write_feature_csv(f, rec.t, qc.filtered, raw, row);
        previous = qc.solution.state();
      } catch (const Error&) {
        previous.reset();
      }
    }
  }
  if (verbosity() != Verbosity::Quiet && ds.manifest.has_truth) {
    out << eval::summary_table({eval::summarize(errors, a.method)});
  }
  return kExitOk;
}

struct EvalArgs {
  Common common;
  std::string data, model, out_dir;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  config::RunConfig cfg = load(a.common);
  cfg.validate();
  const ingest::Dataset ds = load_data(a.common, pick(a.data, cfg.paths.data, "data"));
  if (!ds.manifest.has_truth) throw Error(Errc::NoGroundTruth, "evaluation data carries no truth");
  const pipeline::PreparedDataset prepared = pipeline::prepare(ds.epochs, cfg.prep);
  const auto truth = eval::truth_of(ds.epochs);

  std::vector<eval::RunReport> reports;
  reports.push_back(eval::summarize(eval::enu_errors(eval::run_baseline_ls(prepared), truth), "ls"));
  reports.push_back(eval::summarize(
      eval::enu_errors(eval::run_baseline_ekf(prepared, cfg.filter, cfg.baseline.a, cfg.baseline.b), truth), "ekf"));
  const std::string model = a.model.empty() ? cfg.paths.model : a.model;
  if (!model.empty()) {
    const net::NetParams params = net::load_params(model);
    reports.push_back(eval::summarize(eval::enu_errors(eval::run_lf(prepared, params, cfg.filter), truth), "lf"));
  }

  const fs::path dir = pick(a.out_dir, cfg.paths.output, "out-dir");
  fs::create_directories(dir);
  {
    std::ofstream rep = open_out(dir / "report.csv");
    eval::write_report_header(rep);
    for (const eval::RunReport& r : reports) eval::write_report_row(rep, r);
  }
  {
    std::ofstream cdf = open_out(dir / "cdf.csv");
    eval::write_cdf_csv(cdf, reports);
  }
  const std::string table = eval::summary_table(reports);
  {
    std::ofstream txt = open_out(dir / "summary.txt");
    txt << table;
  }
  if (verbosity() != Verbosity::Quiet) out << table;
  return kExitOk;
}

struct GradcheckArgs {
  Common common;
  std::string corrupt;
  double corrupt_scale = 1.5;
  std::optional<double> tolerance;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  config::RunConfig cfg = load(a.common);
  cfg.dhem.validate();
  train::GradcheckConfig gc;
  gc.seed = cfg.seed;
  if (a.tolerance) gc.tolerance = *a.tolerance;
  if (!a.corrupt.empty()) gc.corrupt = std::make_pair(op_names().at(a.corrupt), a.corrupt_scale);
  const train::GradcheckReport r = train::gradcheck(gc, cfg.dhem);
  out << "parameters " << r.parameters << "\n"
      << "loss " << ingest::format_double(r.loss) << "\n"
      << "max relative error " << ingest::format_double(r.max_rel_error) << " at " << r.worst_param << "\n"
      << (r.passed ? "PASS" : "FAIL") << " (tolerance " << ingest::format_double(gc.tolerance) << ")\n";
  return r.passed ? kExitOk : kExitDomain;
}

struct InspectArgs {
  Common common;
  std::string data, model;
  bool config = false;
};

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const config::RunConfig cfg = load(a.common);
  if (a.config) out << config::dump_config(cfg);
  if (!a.data.empty()) {
    const ingest::Dataset ds = ingest::parse_dataset(fs::path(a.data));
    const auto& m = ds.manifest;
    out << "dataset " << m.name << "\n  epochs: " << m.epoch_count << "\n  systems:";
    for (System s : m.systems) out << ' ' << to_string(s);
    out << "\n  truth: " << (m.has_truth ? "yes" : "no") << "\n";
    if (m.seed) out << "  seed: " << *m.seed << "\n";
    if (!ds.epochs.empty()) {
      std::size_t sats = 0;
      for (const EpochRecord& e : ds.epochs) sats += e.observations.size();
      out << "  time span: " << ingest::format_double(ds.epochs.front().t) << " to "
          << ingest::format_double(ds.epochs.back().t) << " s\n  mean satellites per epoch: "
          << ingest::format_double(static_cast<double>(sats) / static_cast<double>(ds.epochs.size())) << "\n";
    }
  }
  if (!a.model.empty()) {
    const net::NetParams p = net::load_params(a.model);
    out << "model " << a.model << "\n  parameters: " << p.parameter_count() << "\n";
    const auto arrays = p.arrays();
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      out << "  " << net::NetParams::names()[i] << ' ' << arrays[i]->rows() << 'x' << arrays[i]->cols() << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned-filter GNSS positioning: simulate, train, run, evaluate"};
  app.name("lfgnss");
  app.require_subcommand(1);

  SimulateArgs sa;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_common(sim_cmd, sa.common);
  sim_cmd->add_option("-o,--out", sa.out, "dataset output path");
  sim_cmd->add_option("--truth", sa.truth, "truth log output path");
  sim_cmd->add_option("--duration", sa.duration, "scenario length [s]");
  sim_cmd->add_option("--nlos", sa.nlos, "NLOS probability per satellite-epoch");
  sim_cmd->add_flag("--describe", sa.describe, "print a scenario summary");

  TrainArgs ta;
  CLI::App* train_cmd = app.add_subcommand("train", "train the network through the filter");
  add_common(train_cmd, ta.common);
  add_split(train_cmd, ta.common);
  train_cmd->add_option("-d,--data,--input", ta.data, "training dataset");
  train_cmd->add_option("-o,--out,--model", ta.model, "model output path");
  train_cmd->add_option("--report", ta.report, "training report CSV");
  train_cmd->add_option("--init", ta.init, "start from an existing model");
  train_cmd->add_option("--epochs", ta.epochs, "training epochs");

  RunArgs ra;
  CLI::App* run_cmd = app.add_subcommand("run", "run one positioning method over a dataset");
  add_common(run_cmd, ra.common);
  add_split(run_cmd, ra.common);
  run_cmd->add_option("-d,--data,--input", ra.data, "dataset");
  run_cmd->add_option("-m,--model", ra.model, "model file (method lf)");
  run_cmd->add_option("--method", ra.method, "ls, ekf or lf")->check(CLI::IsMember({"ls", "ekf", "lf"}));
  run_cmd->add_option("-o,--out", ra.out, "solutions CSV");
  run_cmd->add_option("--diagnostics", ra.diagnostics, "per-epoch filter diagnostics CSV");
  run_cmd->add_option("--features,--dump-features", ra.features, "per-satellite feature CSV");

  EvalArgs ea;
  CLI::App* eval_cmd = app.add_subcommand("eval", "compare all methods against truth");
  add_common(eval_cmd, ea.common);
  add_split(eval_cmd, ea.common);
  eval_cmd->add_option("-d,--data,--input", ea.data, "dataset with truth");
  eval_cmd->add_option("-m,--model", ea.model, "model file; without it only the baselines run");
  eval_cmd->add_option("-o,--out-dir", ea.out_dir, "report directory");

  GradcheckArgs ga;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the training gradients");
  add_common(gc_cmd, ga.common);
  std::vector<std::string> ops;
  for (const auto& [name, op] : op_names()) ops.push_back(name);
  gc_cmd->add_option("--corrupt-adjoint", ga.corrupt, "scale one primitive's adjoint (test hook)")
      ->check(CLI::IsMember(ops));
  gc_cmd->add_option("--corrupt-scale", ga.corrupt_scale, "factor applied by --corrupt-adjoint");
  gc_cmd->add_option("--tolerance", ga.tolerance, "maximum relative error");

  InspectArgs ia;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "print dataset, model or effective config details");
  add_common(inspect_cmd, ia.common);
  inspect_cmd->add_option("-d,--data,--input", ia.data, "dataset");
  inspect_cmd->add_option("-m,--model", ia.model, "model file");
  inspect_cmd->add_flag("--show-config", ia.config, "print the effective config");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sa, out);
    if (train_cmd->parsed()) return cmd_train(ta, out, err);
    if (run_cmd->parsed()) return cmd_run(ra, out);
    if (eval_cmd->parsed()) return cmd_eval(ea, out);
    if (gc_cmd->parsed()) return cmd_gradcheck(ga, out);
    if (inspect_cmd->parsed()) return cmd_inspect(ia, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: IoError: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace lfgnss::cli
