#include "lfgnss/pipeline.hpp"

#include <cmath>
#include <ostream>

#include "lfgnss/error.hpp"
#include "lfgnss/ingest.hpp"

namespace lfgnss::pipeline {

std::size_t PreparedDataset::usable() const {
  std::size_t n = 0;
  for (const PreparedEpoch& e : epochs) n += e.ok ? 1 : 0;
  return n;
}

PreparedDataset prepare(const std::vector<EpochRecord>& epochs, const PrepConfig& cfg) {
  PreparedDataset out;
  out.epochs.reserve(epochs.size());
  std::optional<coarse::State7> previous;
  for (const EpochRecord& rec : epochs) {
    PreparedEpoch ep;
    ep.t = rec.t;
    ep.truth = rec.truth;
    try {
      std::optional<EcefPos> prior;
      if (previous) prior = EcefPos::from(previous->head<3>());
      coarse::QcResult qc = coarse::quality_control(rec, prior, cfg.qc, cfg.corrections, previous, cfg.ils);
      if (!qc.solution.converged) throw Error(Errc::RankDeficient, "coarse solution did not converge");
      const features::FeatureRow row = features::pack_features(qc.filtered, qc.solution, cfg.norms, cfg.n_max);
      const std::size_t n = row.valid_count();
      ep.features = features::valid_rows(row);
      ep.meas.z.resize(static_cast<Eigen::Index>(n));
      std::size_t k = 0;
      for (std::size_t slot = 0; slot < row.mask.size(); ++slot) {
        if (!row.mask[slot]) continue;
        const auto src = static_cast<std::size_t>(row.source_index[slot]);
        const SatObservation& o = qc.filtered.observations[src];
        ep.meas.sat_pos.push_back(o.sat_pos.vec());
        ep.meas.systems.push_back(o.system);
        ep.meas.z(static_cast<Eigen::Index>(k++)) = qc.solution.corrected[src];
        ep.elevations.push_back(qc.solution.look[src].elevation);
      }
      ep.rejected = qc.rejected.size() + row.dropped.size();
      ep.coarse = std::move(qc.solution);
      ep.ok = true;
      previous = ep.coarse.state();
    } catch (const Error& e) {
      ep.ok = false;
      ep.error = e.what();
      previous.reset();
    }
    out.epochs.push_back(std::move(ep));
  }
  return out;
}

double ElevationModel::variance(double elevation) const {
  const double sigma = a_ + b_ / std::sin(elevation);
  return sigma * sigma;
}

void ElevationModel::evaluate(const PreparedEpoch& epoch, Eigen::VectorXd& r_diag, Eigen::VectorXd& v_comp) const {
  const auto n = static_cast<Eigen::Index>(epoch.elevations.size());
  r_diag.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) r_diag(i) = variance(epoch.elevations[static_cast<std::size_t>(i)]);
  v_comp = Eigen::VectorXd::Zero(n);
}

void NetworkModel::evaluate(const PreparedEpoch& epoch, Eigen::VectorXd& r_diag, Eigen::VectorXd& v_comp) const {
  net::NetOutput out = net::forward(epoch.features, params_);
  r_diag = std::move(out.r_diag);
  v_comp = std::move(out.v_comp);
}

const char* to_string(EpochStatus s) {
  switch (s) {
    case EpochStatus::Initialized: return "init";
    case EpochStatus::Updated: return "updated";
    case EpochStatus::Predicted: return "predicted";
    case EpochStatus::UpdateFailed: return "update-failed";
    case EpochStatus::NoSolution: return "none";
  }
  return "?";
}

FilterRun run_filter(const PreparedDataset& data, const MeasurementModel& model, const FilterConfig& cfg) {
  FilterRun run;
  run.epochs.reserve(data.epochs.size());
  std::optional<ekf::FilterState> state;
  Eigen::VectorXd r, vc;
  for (const PreparedEpoch& ep : data.epochs) {
    EpochOutput out;
    out.t = ep.t;
    if (state && ep.t - state->t > ekf::kMaxGap) {
      state.reset();
      out.note = "gap";
    }
    if (!state) {
      if (ep.ok) {
        state = ekf::init_filter(ep.coarse, cfg.init, ep.t);
        out.status = EpochStatus::Initialized;
      } else {
        out.note = ep.error;
      }
    } else {
      ekf::FilterState pred = ekf::time_update(*state, ep.t - state->t, cfg.process_noise);
      if (!ep.ok) {
        state = pred;
        out.status = EpochStatus::Predicted;
        out.note = ep.error;
      } else {
        model.evaluate(ep, r, vc);
        ekf::UpdateResult upd = ekf::measurement_update(pred, ep.meas, r, vc);
        state = upd.state;
        out.diag = std::move(upd.diag);
        if (upd.status == ekf::UpdateStatus::Ok) {
          out.status = EpochStatus::Updated;
        } else {
          out.status = EpochStatus::UpdateFailed;
          out.note = ekf::to_string(upd.status);
        }
      }
    }
    out.state = state;
    run.epochs.push_back(std::move(out));
  }
  return run;
}

std::vector<std::optional<EcefPos>> positions(const FilterRun& run) {
  std::vector<std::optional<EcefPos>> out;
  out.reserve(run.epochs.size());
  for (const EpochOutput& e : run.epochs) {
    if (e.state) {
      out.push_back(e.state->position());
    } else {
      out.push_back(std::nullopt);
    }
  }
  return out;
}

void write_diagnostics_csv(std::ostream& out, const FilterRun& run) {
  using ingest::format_double;
  out << "t,status";
  for (int i = 0; i < ekf::kStates; ++i) out << ",x" << i;
  for (int i = 0; i < ekf::kStates; ++i) out << ",p" << i;
  out << ",n_sat,innovation_rms,nis_mean\n";
  for (const EpochOutput& e : run.epochs) {
    out << format_double(e.t) << ',' << to_string(e.status);
    for (int i = 0; i < ekf::kStates; ++i) out << ',' << (e.state ? format_double(e.state->x(i)) : "");
    for (int i = 0; i < ekf::kStates; ++i) out << ',' << (e.state ? format_double(e.state->P(i, i)) : "");
    if (e.diag && e.diag->innovation.size() > 0) {
      const auto n = static_cast<double>(e.diag->innovation.size());
      out << ',' << e.diag->innovation.size() << ',' << format_double(std::sqrt(e.diag->innovation.squaredNorm() / n))
          << ',' << format_double(e.diag->nis.mean());
    } else {
      out << ",0,,";
    }
    out << '\n';
  }
}

}  // namespace lfgnss::pipeline
