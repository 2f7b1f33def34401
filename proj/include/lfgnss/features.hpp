#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lfgnss/coarse.hpp"
#include "lfgnss/observation.hpp"

namespace lfgnss::features {

inline constexpr int kFeatureDim = 8;

struct DopSet {
  double hdop = 0.0;
  double vdop = 0.0;
  double pdop = 0.0;
  double gdop = 0.0;
};

enum class DpcStatus { Ok, InsufficientRedundancy, SingularGeometry };

struct DpcResult {
  double value = 0.0;  // gdop(all) - gdop(all but n)
  DpcStatus status = DpcStatus::Ok;
};

struct SatFeatures {
  double snr = 0.0;
  double ela = 0.0;
  double aza = 0.0;
  double psr = 0.0;
  double dpc = 0.0;
  std::array<double, 3> system_onehot{};  // BDS, GAL, GLO
  DpcStatus dpc_status = DpcStatus::Ok;
};

/// Fixed affine scaling applied when packing.
struct NormalizationSpec {
  double snr_scale = 60.0;
  double ela_scale = kPi / 2;
  double psr_scale = 30.0;
  double psr_clip = 3.0;
  double dpc_scale = 1.0;
  double dpc_clip = 3.0;
};

/// Rows [cos(el) sin(az), cos(el) cos(az), sin(el), 1].
Eigen::MatrixXd dop_design_matrix(std::span<const double> elas, std::span<const double> azas);

/// Throws SingularGeometry for fewer than 4 rows or condition number above 1e12.
DopSet compute_dop(std::span<const double> elas, std::span<const double> azas);

/// Leave-one-out GDOP change for satellite `n`, via a rank-one downdate of the full cofactor matrix.
DpcResult compute_dpc(std::span<const double> elas, std::span<const double> azas, std::size_t n);
std::vector<DpcResult> compute_dpc_all(std::span<const double> elas, std::span<const double> azas);

/// Corrected pseudorange minus modeled range, clock and ISB at the coarse solution.
std::vector<double> compute_psr(const EpochRecord& epoch, const coarse::CoarseSolution& sol);

/// Raw per-satellite features; `epoch` must be the QC-filtered epoch `sol` was solved on.
std::vector<SatFeatures> extract(const EpochRecord& epoch, const coarse::CoarseSolution& sol);

Eigen::Matrix<double, 1, kFeatureDim> normalize(const SatFeatures& f, const NormalizationSpec& norms);

/// One epoch packed into fixed-width slots.
struct FeatureRow {
  Eigen::MatrixXd values;  // n_max x 8, masked-off rows exactly zero
  std::vector<bool> mask;  // n_max
  std::vector<std::optional<std::pair<System, int>>> slot_sat;
  std::vector<int> source_index;  // index into the epoch observations, -1 when empty
  std::vector<int> dropped;       // observations discarded for exceeding n_max

  std::size_t valid_count() const;
};

/// batch x n_max x 8 block with validity mask.
struct FeatureTensor {
  std::vector<FeatureRow> rows;
};

FeatureRow pack_features(const EpochRecord& epoch, const std::vector<SatFeatures>& feats,
                         const NormalizationSpec& norms, std::size_t n_max);
FeatureRow pack_features(const EpochRecord& epoch, const coarse::CoarseSolution& sol, const NormalizationSpec& norms,
                         std::size_t n_max);

/// Compact matrix of the valid rows only, in slot order.
Eigen::MatrixXd valid_rows(const FeatureRow& row);

void write_feature_csv_header(std::ostream& out);
void write_feature_csv(std::ostream& out, double t, const EpochRecord& epoch, const std::vector<SatFeatures>& raw,
                       const FeatureRow& row);

}  // namespace lfgnss::features
