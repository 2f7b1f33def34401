#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfgnss/autodiff.hpp"
#include "lfgnss/features.hpp"

namespace lfgnss::net {

using ad::Matrix;

inline constexpr int kHeads = 4;
inline constexpr int kHeadWidth = features::kFeatureDim / kHeads;
inline constexpr double kMaskBias = -1e30;
inline constexpr double kNormEps = 1e-5;
/// Initial variance output (m^2), i.e. a 5 m pseudorange sigma.
inline constexpr double kInitialVariance = 25.0;

/// All trainable arrays. Linear maps act on row vectors: y = x W + b, with W stored fan_in x fan_out.
struct NetParams {
  Matrix wq, wk, wv, wo;  // 8 x 8
  Matrix gamma, beta;     // 1 x 8
  Matrix w1, b1;          // 8 x 64
  Matrix w2, b2;          // 64 x 128
  Matrix w3, b3;          // 128 x 64
  Matrix w_out, b_out;    // 64 x 2

  static NetParams init(std::uint64_t seed);

  /// Fixed order used by the tape, the optimizer and the model file.
  std::vector<Matrix*> arrays();
  std::vector<const Matrix*> arrays() const;
  static const std::vector<std::string>& names();

  std::size_t parameter_count() const;
  /// Throws ShapeMismatch / ConfigError on wrong shapes or non-finite entries.
  void validate() const;
  bool operator==(const NetParams& other) const;
};

/// Parameters as tape leaves, in `NetParams::arrays()` order.
struct TapeParams {
  std::vector<ad::Var> vars;

  ad::Var wq() const { return vars[0]; }
  ad::Var wk() const { return vars[1]; }
  ad::Var wv() const { return vars[2]; }
  ad::Var wo() const { return vars[3]; }
  ad::Var gamma() const { return vars[4]; }
  ad::Var beta() const { return vars[5]; }
};

TapeParams register_params(ad::Tape& tape, const NetParams& params, bool requires_grad = true);

struct TapeOutput {
  ad::Var r_diag;  // n x 1, softplus of the first output column
  ad::Var v_comp;  // n x 1
};

/// Multi-head self-attention plus residual. `mask` may be empty (all rows valid).
ad::Var attention_forward(ad::Tape& tape, ad::Var x, const TapeParams& p, const std::vector<bool>& mask = {});
/// Whole network on an n x 8 feature block.
TapeOutput forward(ad::Tape& tape, ad::Var x, const TapeParams& p, const std::vector<bool>& mask = {});

// Value-level wrappers, evaluated through the same taped code.
Matrix attention_forward(const Matrix& x, const NetParams& params, const std::vector<bool>& mask = {});
Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta);

struct NetOutput {
  Eigen::VectorXd r_diag;
  Eigen::VectorXd v_comp;
  std::vector<bool> mask;
};

NetOutput forward(const Matrix& x, const NetParams& params, const std::vector<bool>& mask = {});
NetOutput forward(const features::FeatureRow& row, const NetParams& params);

inline constexpr const char* kModelFormat = "lfgnss-model";
inline constexpr int kModelVersion = 1;

std::uint64_t checksum(const NetParams& params);
void save_params(const NetParams& params, const std::filesystem::path& path);
/// Throws ModelFormatError, VersionError, ShapeMismatch, ChecksumMismatch.
NetParams load_params(const std::filesystem::path& path);
std::string params_to_text(const NetParams& params);
NetParams params_from_text(const std::string& text);

}  // namespace lfgnss::net
