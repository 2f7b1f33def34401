#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lfgnss/autodiff.hpp"
#include "lfgnss/ekf.hpp"
#include "lfgnss/network.hpp"
#include "lfgnss/pipeline.hpp"

namespace lfgnss::train {

using ad::Matrix;

struct DhemConfig {
  double alpha = 1.0;
  double gamma = 2.0;
  double lambda = 0.1;
  bool dynamic_gamma = true;
  double eps_max = 1e-9;

  void validate() const;
};

struct DhemResult {
  double loss = 0.0;  // sqrt(mean(L_dhem^2))
  std::vector<double> base;
  std::vector<double> weight;
  std::vector<double> gamma_dyn;
  std::vector<double> dhem;
};

/// Plain evaluation on a batch of ENU error vectors.
DhemResult dhem_loss(const std::vector<Eigen::Vector3d>& errors, const DhemConfig& cfg);
/// Taped version on per-sample 3 x 1 error vectors; returns the 1 x 1 loss.
ad::Var dhem_loss(ad::Tape& tape, const std::vector<ad::Var>& errors, const DhemConfig& cfg);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double lr0 = 1e-3;
  int t_max = 50;
  double eta_min = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  double validation_fraction = 0.2;

  void validate() const;
};

/// Cosine annealing with warm restarts every t_max epochs.
double cosine_lr(int epoch, const TrainConfig& cfg);

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

/// One bias-corrected Adam step in place.
void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, AdamState& state, double lr,
               const TrainConfig& cfg);

/// One supervised filter step: the predicted state going into a measurement update.
struct BatchItem {
  const pipeline::PreparedEpoch* epoch = nullptr;
  ekf::FilterState predicted;
  EcefPos truth;
};

struct BatchLoss {
  double loss = 0.0;
  std::vector<Matrix> grads;  // NetParams::arrays() order; empty when not requested
  std::vector<Eigen::Vector3d> errors;
};

/// DHEM loss of the posterior positions of `items` with the network supplying R and v_comp.
/// The predicted states are constants.
BatchLoss batch_loss(const std::vector<BatchItem>& items, const net::NetParams& params, const DhemConfig& dhem,
                     bool with_grad, std::optional<std::pair<ad::Op, double>> corrupt = std::nullopt);

struct EpochStats {
  double mean_loss = 0.0;
  int batches = 0;
  int skipped = 0;  // epochs without a usable update
};

/// One chronological sweep over [begin, end) of `data`, stepping Adam after every batch.
EpochStats train_epoch(const pipeline::PreparedDataset& data, std::size_t begin, std::size_t end,
                       net::NetParams& params, AdamState& adam, const pipeline::FilterConfig& filter,
                       const TrainConfig& cfg, const DhemConfig& dhem, double lr);

struct TrainReport {
  std::vector<double> mean_loss;
  std::vector<double> val_rmse_3d;
  std::vector<double> lr;
  std::vector<int> batches;
  std::vector<int> skipped;
  int best_epoch = -1;
  double best_val_rmse = 0.0;
  DhemConfig dhem;
  TrainConfig cfg;

  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  net::NetParams best;
  net::NetParams last;
  TrainReport report;
};

/// 3D RMSE of the filter against truth over `data` (NoValidEpochs when nothing to compare).
double filter_rmse_3d(const pipeline::PreparedDataset& data, const pipeline::MeasurementModel& model,
                      const pipeline::FilterConfig& filter);

using Progress = std::function<void(int epoch, double loss, double val_rmse, double lr)>;

/// Trains on the leading part of `data`, validates on the trailing `validation_fraction`.
TrainResult train(const pipeline::PreparedDataset& data, const net::NetParams& init,
                  const pipeline::FilterConfig& filter, const TrainConfig& cfg, const DhemConfig& dhem,
                  const Progress& progress = {});

struct GradcheckConfig {
  std::uint64_t seed = 7;
  int epochs = 2;
  int satellites = 3;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Gradients smaller than this are compared on an absolute scale.
  double abs_floor = 1e-7;
  /// The floor also scales with the largest analytic gradient magnitude.
  double floor_fraction = 1e-4;
  std::optional<std::pair<ad::Op, double>> corrupt;
};

struct GradcheckReport {
  std::size_t parameters = 0;
  double max_rel_error = 0.0;
  std::string worst_param;
  double loss = 0.0;
  bool passed = false;
};

/// Finite-difference check of every parameter on a small synthetic batch.
GradcheckReport gradcheck(const GradcheckConfig& cfg, const DhemConfig& dhem = {});

}  // namespace lfgnss::train
