#include "lfgnss/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <limits>
#include <random>

#include "lfgnss/error.hpp"
#include "lfgnss/ingest.hpp"

namespace lfgnss::train {

void DhemConfig::validate() const {
  if (!(alpha > 0.0)) throw Error(Errc::ConfigError, "dhem alpha must be positive");
  if (!(gamma >= 0.0)) throw Error(Errc::ConfigError, "dhem gamma must be >= 0");
  if (!(lambda >= 0.0)) throw Error(Errc::ConfigError, "dhem lambda must be >= 0");
  if (!(eps_max > 0.0)) throw Error(Errc::ConfigError, "dhem eps_max must be positive");
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || t_max < 1) throw Error(Errc::ConfigError, "epochs, batch_size, t_max must be >= 1");
  if (!(lr0 >= 0.0 && eta_min >= 0.0)) throw Error(Errc::ConfigError, "learning rates must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0)) {
    throw Error(Errc::ConfigError, "adam moments must lie in [0, 1) and eps > 0");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error(Errc::ConfigError, "validation_fraction must lie in [0, 1)");
  }
}

// ---- loss -----------------------------------------------------------------

DhemResult dhem_loss(const std::vector<Eigen::Vector3d>& errors, const DhemConfig& cfg) {
  DhemResult out;
  if (errors.empty()) throw Error(Errc::EmptySplit, "empty loss batch");
  for (const Eigen::Vector3d& e : errors) out.base.push_back(e.norm());
  const double denom = *std::max_element(out.base.begin(), out.base.end()) + cfg.eps_max;
  double sq = 0.0;
  for (double l : out.base) {
    const double g = cfg.dynamic_gamma ? cfg.gamma * std::exp(-cfg.lambda * l) : cfg.gamma;
    const double w = std::pow(1.0 - std::sqrt(l / denom), g);
    out.gamma_dyn.push_back(g);
    out.weight.push_back(w);
    out.dhem.push_back(cfg.alpha * w * l);
    sq += out.dhem.back() * out.dhem.back();
  }
  out.loss = std::sqrt(sq / static_cast<double>(errors.size()));
  return out;
}

ad::Var dhem_loss(ad::Tape& tape, const std::vector<ad::Var>& errors, const DhemConfig& cfg) {
  if (errors.empty()) throw Error(Errc::EmptySplit, "empty loss batch");
  std::vector<ad::Var> norms;
  norms.reserve(errors.size());
  for (ad::Var e : errors) norms.push_back(ad::sqrt(ad::sum(ad::mul(e, e))));
  const ad::Var base = ad::concat_cols(norms);  // 1 x B
  const ad::Var denom = ad::add_scalar(ad::max(base), cfg.eps_max);
  const ad::Var ratio = ad::div_scalar_var(base, denom);
  const ad::Var one_minus = ad::add_scalar(ad::scale(ad::sqrt(ratio), -1.0), 1.0);
  const ad::Var gamma = cfg.dynamic_gamma
                            ? ad::scale(ad::exp(ad::scale(base, -cfg.lambda)), cfg.gamma)
                            : tape.constant(Matrix::Constant(1, base.cols(), cfg.gamma));
  const ad::Var weighted = ad::scale(ad::mul(ad::pow(one_minus, gamma), base), cfg.alpha);
  return ad::sqrt(ad::mean(ad::mul(weighted, weighted)));
}

// ---- optimizer ------------------------------------------------------------

double cosine_lr(int epoch, const TrainConfig& cfg) {
  const double phase = static_cast<double>(epoch % cfg.t_max) / static_cast<double>(cfg.t_max);
  return cfg.eta_min + 0.5 * (cfg.lr0 - cfg.eta_min) * (1.0 + std::cos(kPi * phase));
}

void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, AdamState& state, double lr,
               const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw Error(Errc::ShapeMismatch, "parameter/gradient count");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols()) {
      throw Error(Errc::ShapeMismatch, "gradient shape");
    }
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i].cwiseAbs2();
    const Matrix step = (state.m[i] / c1).array() / ((state.v[i] / c2).array().sqrt() + cfg.adam_eps);
    *params[i] -= lr * step;
  }
}

// ---- taped batch ------------------------------------------------------------

namespace {

struct Recorded {
  Eigen::VectorXd r_diag;
  Eigen::VectorXd v_comp;
  ad::Var r_var;
  ad::Var vc_var;
};

Recorded record_network(ad::Tape& tape, const net::TapeParams& tp, const pipeline::PreparedEpoch& ep) {
  const net::TapeOutput out = net::forward(tape, tape.constant(ep.features), tp);
  return {out.r_diag.value().col(0), out.v_comp.value().col(0), out.r_diag, out.v_comp};
}

/// ENU error of the posterior position, built so large ECEF coordinates never meet on the tape.
ad::Var record_error(ad::Tape& tape, const ekf::FilterState& predicted, const pipeline::PreparedEpoch& ep,
                     const EcefPos& truth, const Recorded& rec) {
  const Eigen::Matrix3d rot = enu_rotation(ecef_to_geodetic(truth));
  Eigen::MatrixXd pos_rows = Eigen::MatrixXd::Zero(3, ekf::kStates);
  pos_rows.leftCols<3>() = rot;
  const ekf::Linearization lin = ekf::linearize(predicted.x, ep.meas);
  const ad::Var dx = ekf::taped_correction(tape, predicted, lin, rec.r_var, rec.vc_var, pos_rows);
  const Eigen::Vector3d offset = rot * (predicted.x.segment<3>(ekf::kPos) - truth.vec());
  return ad::add(tape.constant(offset), dx);
}

std::vector<Matrix> collect_grads(const ad::Tape& tape, const net::TapeParams& tp) {
  std::vector<Matrix> g;
  g.reserve(tp.vars.size());
  for (ad::Var v : tp.vars) g.push_back(tape.grad(v));
  return g;
}

}  // namespace

BatchLoss batch_loss(const std::vector<BatchItem>& items, const net::NetParams& params, const DhemConfig& dhem,
                     bool with_grad, std::optional<std::pair<ad::Op, double>> corrupt) {
  ad::Tape tape;
  if (corrupt) tape.set_adjoint_scale(corrupt->first, corrupt->second);
  const net::TapeParams tp = net::register_params(tape, params, with_grad);
  std::vector<ad::Var> errors;
  BatchLoss out;
  for (const BatchItem& item : items) {
    const Recorded rec = record_network(tape, tp, *item.epoch);
    errors.push_back(record_error(tape, item.predicted, *item.epoch, item.truth, rec));
    out.errors.push_back(errors.back().value().col(0));
  }
  const ad::Var loss = dhem_loss(tape, errors, dhem);
  out.loss = loss.value()(0, 0);
  if (with_grad) {
    tape.backward(loss);
    out.grads = collect_grads(tape, tp);
  }
  return out;
}

// ---- training loop ----------------------------------------------------------

EpochStats train_epoch(const pipeline::PreparedDataset& data, std::size_t begin, std::size_t end,
                       net::NetParams& params, AdamState& adam, const pipeline::FilterConfig& filter,
                       const TrainConfig& cfg, const DhemConfig& dhem, double lr) {
  EpochStats stats;
  double loss_sum = 0.0;
  ad::Tape tape;
  net::TapeParams tp = net::register_params(tape, params);
  std::vector<ad::Var> errors;

  auto flush = [&] {
    if (errors.empty()) return;
    const ad::Var loss = dhem_loss(tape, errors, dhem);
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      throw Error(Errc::DivergedLoss, "non-finite batch loss after " + std::to_string(stats.batches) + " batches");
    }
    tape.backward(loss);
    adam_step(params.arrays(), collect_grads(tape, tp), adam, lr, cfg);
    loss_sum += value;
    ++stats.batches;
    errors.clear();
    tape.clear();
    tp = net::register_params(tape, params);
  };

  std::optional<ekf::FilterState> state;
  for (std::size_t i = begin; i < end; ++i) {
    const pipeline::PreparedEpoch& ep = data.epochs[i];
    if (!ep.truth) throw Error(Errc::NoGroundTruth, "training epoch without truth at t=" + std::to_string(ep.t));
    if (state && ep.t - state->t > ekf::kMaxGap) state.reset();
    if (!state) {
      if (ep.ok) state = ekf::init_filter(ep.coarse, filter.init, ep.t);
      ++stats.skipped;
      continue;
    }
    const ekf::FilterState pred = ekf::time_update(*state, ep.t - state->t, filter.process_noise);
    if (!ep.ok) {
      state = pred;
      ++stats.skipped;
      continue;
    }
    const Recorded rec = record_network(tape, tp, ep);
    const ekf::UpdateResult upd = ekf::measurement_update(pred, ep.meas, rec.r_diag, rec.v_comp);
    state = upd.state;
    if (upd.status != ekf::UpdateStatus::Ok) {
      ++stats.skipped;
      continue;
    }
    errors.push_back(record_error(tape, pred, ep, *ep.truth, rec));
    if (static_cast<int>(errors.size()) == cfg.batch_size) flush();
  }
  flush();
  stats.mean_loss = stats.batches > 0 ? loss_sum / stats.batches : 0.0;
  return stats;
}

double filter_rmse_3d(const pipeline::PreparedDataset& data, const pipeline::MeasurementModel& model,
                      const pipeline::FilterConfig& filter) {
  const pipeline::FilterRun run = pipeline::run_filter(data, model, filter);
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < run.epochs.size(); ++i) {
    const auto& st = run.epochs[i].state;
    const auto& truth = data.epochs[i].truth;
    if (!st || !truth) continue;
    sq += (st->x.segment<3>(ekf::kPos) - truth->vec()).squaredNorm();
    ++n;
  }
  if (n == 0) throw Error(Errc::NoValidEpochs, "no epochs with both a solution and truth");
  return std::sqrt(sq / static_cast<double>(n));
}

TrainResult train(const pipeline::PreparedDataset& data, const net::NetParams& init,
                  const pipeline::FilterConfig& filter, const TrainConfig& cfg, const DhemConfig& dhem,
                  const Progress& progress) {
  cfg.validate();
  dhem.validate();
  const std::size_t total = data.epochs.size();
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(total)));
  const std::size_t n_train = total - n_val;
  if (n_train == 0) throw Error(Errc::EmptySplit, "no training epochs");

  pipeline::PreparedDataset val;
  val.epochs.assign(data.epochs.begin() + static_cast<std::ptrdiff_t>(n_train), data.epochs.end());

  TrainResult result{init, init, {}};
  result.report.cfg = cfg;
  result.report.dhem = dhem;
  net::NetParams params = init;
  AdamState adam;
  const pipeline::NetworkModel model(params);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg);
    const EpochStats stats = train_epoch(data, 0, n_train, params, adam, filter, cfg, dhem, lr);
    // Without a validation split, the training part doubles as the selection set.
    double val_rmse = 0.0;
    if (n_val > 0) {
      val_rmse = filter_rmse_3d(val, model, filter);
    } else {
      pipeline::PreparedDataset head;
      head.epochs.assign(data.epochs.begin(), data.epochs.begin() + static_cast<std::ptrdiff_t>(n_train));
      val_rmse = filter_rmse_3d(head, model, filter);
    }
    result.report.mean_loss.push_back(stats.mean_loss);
    result.report.val_rmse_3d.push_back(val_rmse);
    result.report.lr.push_back(lr);
    result.report.batches.push_back(stats.batches);
    result.report.skipped.push_back(stats.skipped);
    if (result.report.best_epoch < 0 || val_rmse < result.report.best_val_rmse) {
      result.report.best_epoch = epoch;
      result.report.best_val_rmse = val_rmse;
      result.best = params;
    }
    if (progress) progress(epoch, stats.mean_loss, val_rmse, lr);
  }
  result.last = params;
  return result;
}

void TrainReport::write_csv(std::ostream& out) const {
  using ingest::format_double;
  out << "# dhem alpha=" << format_double(dhem.alpha) << " gamma=" << format_double(dhem.gamma)
      << " lambda=" << format_double(dhem.lambda) << " dynamic_gamma=" << (dhem.dynamic_gamma ? 1 : 0)
      << " eps_max=" << format_double(dhem.eps_max) << "\n";
  out << "# train epochs=" << cfg.epochs << " batch_size=" << cfg.batch_size << " lr0=" << format_double(cfg.lr0)
      << " t_max=" << cfg.t_max << " eta_min=" << format_double(cfg.eta_min) << " seed=" << cfg.seed
      << " best_epoch=" << best_epoch << " best_val_rmse_3d=" << format_double(best_val_rmse) << "\n";
  out << "epoch,lr,mean_loss,val_rmse_3d,batches,skipped\n";
  for (std::size_t i = 0; i < mean_loss.size(); ++i) {
    out << i << ',' << format_double(lr[i]) << ',' << format_double(mean_loss[i]) << ','
        << format_double(val_rmse_3d[i]) << ',' << batches[i] << ',' << skipped[i] << '\n';
  }
}

// ---- gradient check -----------------------------------------------------------

namespace {

struct MicroScenario {
  std::vector<pipeline::PreparedEpoch> epochs;
  std::vector<BatchItem> items;
};

MicroScenario micro_scenario(const GradcheckConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const GeodeticPos ref{22.3 * kPi / 180.0, 114.2 * kPi / 180.0, 20.0};
  const EcefPos truth = geodetic_to_ecef(ref);
  const Eigen::Matrix3d rot = enu_rotation(ref);

  MicroScenario s;
  s.epochs.resize(static_cast<std::size_t>(cfg.epochs));
  for (int k = 0; k < cfg.epochs; ++k) {
    pipeline::PreparedEpoch& ep = s.epochs[static_cast<std::size_t>(k)];
    ep.ok = true;
    ep.t = k;
    ep.truth = truth;
    ekf::FilterState pred;
    pred.t = k;
    pred.x.segment<3>(ekf::kPos) = truth.vec() + 3.0 * Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
    pred.x(ekf::kClock) = 100.0;
    pred.P = ekf::StateMat::Identity() * 4.0;
    pred.P(ekf::kClock, ekf::kClock) = 25.0;
    ep.features.resize(cfg.satellites, features::kFeatureDim);
    ep.meas.z.resize(cfg.satellites);
    for (int n = 0; n < cfg.satellites; ++n) {
      const double el = (15.0 + 70.0 * unit(rng)) * kPi / 180.0;
      const double az = (2.0 * unit(rng) - 1.0) * kPi;
      const Eigen::Vector3d los_enu(std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el));
      const Eigen::Vector3d sat = truth.vec() + 2.2e7 * (rot.transpose() * los_enu);
      const bool nlos = n == 0;
      const double bias = nlos ? 12.0 : 0.0;
      const double range = (sat - truth.vec()).norm();
      ep.meas.sat_pos.push_back(sat);
      ep.meas.systems.push_back(System::GPS);
      ep.meas.z(n) = range + 100.0 + bias + 0.5 * normal(rng);
      ep.elevations.push_back(el);
      const double snr = 50.0 - 20.0 * (1.0 - std::sin(el)) - (nlos ? 10.0 : 0.0);
      ep.features.row(n) << snr / 60.0, el / (kPi / 2), std::sin(az), std::cos(az),
          std::clamp((bias + normal(rng)) / 30.0, -3.0, 3.0), 0.3 * normal(rng), 0.0, 0.0;
    }
    s.items.push_back({nullptr, pred, truth});
  }
  for (std::size_t k = 0; k < s.items.size(); ++k) s.items[k].epoch = &s.epochs[k];
  return s;
}

}  // namespace

GradcheckReport gradcheck(const GradcheckConfig& cfg, const DhemConfig& dhem) {
  const MicroScenario scenario = micro_scenario(cfg);
  net::NetParams params = net::NetParams::init(cfg.seed);
  const BatchLoss analytic = batch_loss(scenario.items, params, dhem, true, cfg.corrupt);

  GradcheckReport report;
  report.loss = analytic.loss;
  double largest = 0.0;
  for (const Matrix& g : analytic.grads) largest = std::max(largest, g.cwiseAbs().maxCoeff());
  // Loss roundoff over the difference span swamps entries far below the largest gradient.
  const double floor = std::max(cfg.abs_floor, cfg.floor_fraction * largest);
  auto arrays = params.arrays();
  for (std::size_t a = 0; a < arrays.size(); ++a) {
    Matrix& m = *arrays[a];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + cfg.step;
      const double up = batch_loss(scenario.items, params, dhem, false).loss;
      m.data()[i] = saved - cfg.step;
      const double down = batch_loss(scenario.items, params, dhem, false).loss;
      m.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * cfg.step);
      const double exact = analytic.grads[a].data()[i];
      const double denom = std::max({std::abs(numeric), std::abs(exact), floor});
      const double rel = std::abs(numeric - exact) / denom;
      ++report.parameters;
      if (rel > report.max_rel_error || !std::isfinite(rel)) {
        report.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        report.worst_param = net::NetParams::names()[a] + "[" + std::to_string(i) + "]";
      }
    }
  }
  report.passed = report.max_rel_error < cfg.tolerance;
  return report;
}

}  // namespace lfgnss::train
