#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfgnss/coarse.hpp"
#include "lfgnss/ekf.hpp"
#include "lfgnss/features.hpp"
#include "lfgnss/gnss_models.hpp"
#include "lfgnss/network.hpp"

namespace lfgnss::pipeline {

/// Everything needed to turn raw epochs into filter inputs.
struct PrepConfig {
  coarse::QcConfig qc;
  coarse::IlsConfig ils;
  models::CorrectionConfig corrections;
  features::NormalizationSpec norms;
  std::size_t n_max = 40;
};

struct FilterConfig {
  ekf::InitConfig init;
  ekf::ProcessNoiseConfig process_noise;
};

/// One epoch after QC, coarse positioning and feature packing. None of it depends on network
/// parameters, so it is computed once per dataset.
struct PreparedEpoch {
  double t = 0.0;
  bool ok = false;
  std::string error;  // why the epoch is unusable when !ok
  coarse::CoarseSolution coarse;
  std::size_t rejected = 0;
  ekf::Measurements meas;           // packed satellites, slot order
  Eigen::MatrixXd features;         // meas.size() x 8, normalized
  std::vector<double> elevations;   // per packed satellite [rad]
  std::optional<EcefPos> truth;
};

struct PreparedDataset {
  std::vector<PreparedEpoch> epochs;

  std::size_t usable() const;
};

PreparedDataset prepare(const std::vector<EpochRecord>& epochs, const PrepConfig& cfg);

/// Produces per-satellite measurement variance and innovation compensation for one epoch.
class MeasurementModel {
 public:
  virtual ~MeasurementModel() = default;
  virtual void evaluate(const PreparedEpoch& epoch, Eigen::VectorXd& r_diag, Eigen::VectorXd& v_comp) const = 0;
  virtual std::string name() const = 0;
};

/// r = (a + b / sin(el))^2, no compensation.
class ElevationModel final : public MeasurementModel {
 public:
  explicit ElevationModel(double a = 0.3, double b = 0.3) : a_(a), b_(b) {}
  void evaluate(const PreparedEpoch& epoch, Eigen::VectorXd& r_diag, Eigen::VectorXd& v_comp) const override;
  std::string name() const override { return "ekf"; }
  double variance(double elevation) const;

 private:
  double a_, b_;
};

class NetworkModel final : public MeasurementModel {
 public:
  explicit NetworkModel(const net::NetParams& params) : params_(params) {}
  void evaluate(const PreparedEpoch& epoch, Eigen::VectorXd& r_diag, Eigen::VectorXd& v_comp) const override;
  std::string name() const override { return "lf"; }

 private:
  const net::NetParams& params_;
};

enum class EpochStatus { Initialized, Updated, Predicted, UpdateFailed, NoSolution };
const char* to_string(EpochStatus s);

struct EpochOutput {
  double t = 0.0;
  EpochStatus status = EpochStatus::NoSolution;
  std::optional<ekf::FilterState> state;
  std::optional<ekf::Diagnostics> diag;
  std::string note;
};

struct FilterRun {
  std::vector<EpochOutput> epochs;
};

/// Chronological filter sweep. The first usable epoch (and any epoch after a gap over 30 s)
/// initializes from the coarse solution; epochs without a usable measurement set are predicted only.
FilterRun run_filter(const PreparedDataset& data, const MeasurementModel& model, const FilterConfig& cfg);

/// Filter positions; nullopt where no solution exists.
std::vector<std::optional<EcefPos>> positions(const FilterRun& run);

void write_diagnostics_csv(std::ostream& out, const FilterRun& run);

}  // namespace lfgnss::pipeline
