#include "lfgnss/network.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lfgnss/error.hpp"

namespace lfgnss::net {

namespace {

constexpr int kDim = features::kFeatureDim;

Matrix uniform(std::mt19937_64& rng, int rows, int cols, double limit) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = dist(rng);
  }
  return m;
}

Matrix he_uniform(std::mt19937_64& rng, int fan_in, int fan_out) {
  return uniform(rng, fan_in, fan_out, std::sqrt(6.0 / fan_in));
}

Matrix lecun_uniform(std::mt19937_64& rng, int fan_in, int fan_out) {
  return uniform(rng, fan_in, fan_out, std::sqrt(3.0 / fan_in));
}

struct Shape {
  int rows, cols;
};

const std::vector<Shape>& shapes() {
  static const std::vector<Shape> s = {{kDim, kDim}, {kDim, kDim}, {kDim, kDim}, {kDim, kDim}, {1, kDim},
                                       {1, kDim},    {kDim, 64},   {1, 64},      {64, 128},    {1, 128},
                                       {128, 64},    {1, 64},      {64, 2},      {1, 2}};
  return s;
}

}  // namespace

NetParams NetParams::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetParams p;
  p.wq = lecun_uniform(rng, kDim, kDim);
  p.wk = lecun_uniform(rng, kDim, kDim);
  p.wv = lecun_uniform(rng, kDim, kDim);
  p.wo = lecun_uniform(rng, kDim, kDim);
  p.gamma = Matrix::Ones(1, kDim);
  p.beta = Matrix::Zero(1, kDim);
  p.w1 = he_uniform(rng, kDim, 64);
  p.b1 = Matrix::Zero(1, 64);
  p.w2 = he_uniform(rng, 64, 128);
  p.b2 = Matrix::Zero(1, 128);
  p.w3 = he_uniform(rng, 128, 64);
  p.b3 = Matrix::Zero(1, 64);
  // Small output weights so the initial R sits near the bias value.
  p.w_out = 0.1 * lecun_uniform(rng, 64, 2);
  p.b_out = Matrix::Zero(1, 2);
  p.b_out(0, 0) = ad::inverse_softplus(kInitialVariance);
  return p;
}

std::vector<Matrix*> NetParams::arrays() {
  return {&wq, &wk, &wv, &wo, &gamma, &beta, &w1, &b1, &w2, &b2, &w3, &b3, &w_out, &b_out};
}

std::vector<const Matrix*> NetParams::arrays() const {
  return {&wq, &wk, &wv, &wo, &gamma, &beta, &w1, &b1, &w2, &b2, &w3, &b3, &w_out, &b_out};
}

const std::vector<std::string>& NetParams::names() {
  static const std::vector<std::string> n = {"attn.wq", "attn.wk", "attn.wv", "attn.wo", "norm.gamma",
                                             "norm.beta", "mlp.w1",  "mlp.b1",  "mlp.w2",  "mlp.b2",
                                             "mlp.w3",    "mlp.b3",  "out.w",   "out.b"};
  return n;
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* m : arrays()) n += static_cast<std::size_t>(m->size());
  return n;
}

void NetParams::validate() const {
  const auto a = arrays();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->rows() != shapes()[i].rows || a[i]->cols() != shapes()[i].cols) {
      throw Error(Errc::ShapeMismatch, names()[i] + " has shape " + std::to_string(a[i]->rows()) + "x" +
                                           std::to_string(a[i]->cols()));
    }
    if (!a[i]->allFinite()) throw Error(Errc::ConfigError, names()[i] + " has non-finite entries");
  }
}

bool NetParams::operator==(const NetParams& other) const {
  const auto a = arrays();
  const auto b = other.arrays();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols()) return false;
    if (a[i]->size() > 0 && std::memcmp(a[i]->data(), b[i]->data(), sizeof(double) * a[i]->size()) != 0) {
      return false;
    }
  }
  return true;
}

TapeParams register_params(ad::Tape& tape, const NetParams& params, bool requires_grad) {
  TapeParams p;
  for (const Matrix* m : params.arrays()) p.vars.push_back(tape.leaf(*m, requires_grad));
  return p;
}

ad::Var attention_forward(ad::Tape& tape, ad::Var x, const TapeParams& p, const std::vector<bool>& mask) {
  const Eigen::Index n = x.rows();
  const ad::Var q = ad::matmul(x, p.wq());
  const ad::Var k = ad::matmul(x, p.wk());
  const ad::Var v = ad::matmul(x, p.wv());

  std::optional<ad::Var> key_bias;
  if (!mask.empty()) {
    if (static_cast<Eigen::Index>(mask.size()) != n) throw Error(Errc::ShapeMismatch, "mask length");
    Matrix bias = Matrix::Zero(n, n);
    bool any = false;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!mask[static_cast<std::size_t>(j)]) {
        bias.col(j).setConstant(kMaskBias);
        any = true;
      }
    }
    if (any) key_bias = tape.constant(std::move(bias));
  }

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(kHeadWidth));
  std::vector<ad::Var> heads;
  heads.reserve(kHeads);
  for (int h = 0; h < kHeads; ++h) {
    const ad::Var qh = ad::slice_cols(q, h * kHeadWidth, kHeadWidth);
    const ad::Var kh = ad::slice_cols(k, h * kHeadWidth, kHeadWidth);
    const ad::Var vh = ad::slice_cols(v, h * kHeadWidth, kHeadWidth);
    ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    if (key_bias) scores = ad::add(scores, *key_bias);
    heads.push_back(ad::matmul(ad::softmax_rows(scores), vh));
  }
  return ad::add(x, ad::matmul(ad::concat_cols(heads), p.wo()));
}

TapeOutput forward(ad::Tape& tape, ad::Var x, const TapeParams& p, const std::vector<bool>& mask) {
  if (x.cols() != kDim) throw Error(Errc::ShapeMismatch, "feature width must be 8");
  ad::Var h = attention_forward(tape, x, p, mask);
  h = ad::layer_norm_rows(h, p.gamma(), p.beta(), kNormEps);
  for (int layer = 0; layer < 3; ++layer) {
    h = ad::relu(ad::add_row_broadcast(ad::matmul(h, p.vars[6 + 2 * layer]), p.vars[7 + 2 * layer]));
  }
  const ad::Var o = ad::add_row_broadcast(ad::matmul(h, p.vars[12]), p.vars[13]);
  return {ad::softplus(ad::slice_cols(o, 0, 1)), ad::slice_cols(o, 1, 1)};
}

Matrix attention_forward(const Matrix& x, const NetParams& params, const std::vector<bool>& mask) {
  ad::Tape tape;
  const TapeParams p = register_params(tape, params, false);
  return attention_forward(tape, tape.constant(x), p, mask).value();
}

Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta) {
  ad::Tape tape;
  return ad::layer_norm_rows(tape.constant(x), tape.constant(gamma), tape.constant(beta), kNormEps).value();
}

NetOutput forward(const Matrix& x, const NetParams& params, const std::vector<bool>& mask) {
  ad::Tape tape;
  const TapeParams p = register_params(tape, params, false);
  const TapeOutput out = forward(tape, tape.constant(x), p, mask);
  NetOutput result;
  result.r_diag = out.r_diag.value().col(0);
  result.v_comp = out.v_comp.value().col(0);
  result.mask = mask.empty() ? std::vector<bool>(static_cast<std::size_t>(x.rows()), true) : mask;
  return result;
}

NetOutput forward(const features::FeatureRow& row, const NetParams& params) {
  return forward(row.values, params, row.mask);
}

// ---- model file -----------------------------------------------------------

std::uint64_t checksum(const NetParams& params) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const Matrix* m : params.arrays()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m->data());
    for (std::size_t i = 0; i < sizeof(double) * static_cast<std::size_t>(m->size()); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string params_to_text(const NetParams& params) {
  params.validate();
  nlohmann::ordered_json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  nlohmann::ordered_json arrays = nlohmann::ordered_json::array();
  const auto a = params.arrays();
  for (std::size_t i = 0; i < a.size(); ++i) {
    nlohmann::ordered_json entry;
    entry["name"] = NetParams::names()[i];
    entry["rows"] = a[i]->rows();
    entry["cols"] = a[i]->cols();
    std::vector<double> data(a[i]->data(), a[i]->data() + a[i]->size());
    entry["data"] = data;  // column-major
    arrays.push_back(std::move(entry));
  }
  doc["arrays"] = std::move(arrays);
  doc["checksum"] = hex64(checksum(params));
  return doc.dump() + "\n";
}

NetParams params_from_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ModelFormatError, e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kModelFormat) {
      throw Error(Errc::ModelFormatError, "not a model file");
    }
    if (!doc.at("version").is_number_integer() || doc.at("version").get<int>() != kModelVersion) {
      throw Error(Errc::VersionError, "unsupported model version");
    }
    const auto& arrays = doc.at("arrays");
    NetParams p;
    auto dst = p.arrays();
    if (!arrays.is_array() || arrays.size() != dst.size()) {
      throw Error(Errc::ShapeMismatch, "expected " + std::to_string(dst.size()) + " arrays");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const auto& entry = arrays[i];
      if (entry.at("name").get<std::string>() != NetParams::names()[i]) {
        throw Error(Errc::ModelFormatError, "unexpected array " + entry.at("name").get<std::string>());
      }
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      const auto data = entry.at("data").get<std::vector<double>>();
      if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw Error(Errc::ShapeMismatch, NetParams::names()[i] + " data length");
      }
      *dst[i] = Eigen::Map<const Matrix>(data.data(), rows, cols);
    }
    p.validate();
    if (doc.at("checksum").get<std::string>() != hex64(checksum(p))) {
      throw Error(Errc::ChecksumMismatch, "model checksum does not match contents");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ModelFormatError, e.what());
  }
}

void save_params(const NetParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << params_to_text(params);
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

NetParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return params_from_text(buf.str());
}

}  // namespace lfgnss::net
