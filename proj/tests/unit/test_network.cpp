#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "lfgnss/error.hpp"
#include "lfgnss/network.hpp"
#include "oracles/loop_network.hpp"
#include "support.hpp"

using namespace lfgnss;
using namespace lfgnss::net;
using testsupport::random_matrix;

namespace {

double max_diff(const oracle::Grid& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      worst = std::max(worst, std::abs(a[i][j] - b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
  return worst;
}

// Untrained output weights are small; widen them so the checks exercise non-trivial outputs.
NetParams lively(std::uint64_t seed) {
  NetParams p = NetParams::init(seed);
  std::mt19937_64 rng(seed + 100);
  p.w_out = random_matrix(rng, 64, 2, 0.3);
  p.gamma = random_matrix(rng, 1, 8).array().abs() + 0.5;
  p.beta = random_matrix(rng, 1, 8, 0.2);
  return p;
}

Errc load_error(const std::string& text) {
  try {
    params_from_text(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("load unexpectedly succeeded");
  return Errc::ModelFormatError;
}

}  // namespace

TEST_CASE("shapes and initialization") {
  const NetParams p = NetParams::init(1);
  CHECK_NOTHROW(p.validate());
  CHECK(p.wq.rows() == 8);
  CHECK(p.wq.cols() == 8);
  CHECK(p.w1.cols() == 64);
  CHECK(p.w2.cols() == 128);
  CHECK(p.w3.cols() == 64);
  CHECK(p.w_out.rows() == 64);
  CHECK(p.w_out.cols() == 2);
  CHECK(p.gamma.isOnes());
  CHECK(p.beta.isZero());
  CHECK(ad::softplus_value(p.b_out(0, 0)) == doctest::Approx(kInitialVariance).epsilon(1e-12));
  CHECK(p.parameter_count() == 4 * 64 + 2 * 8 + (8 * 64 + 64) + (64 * 128 + 128) + (128 * 64 + 64) + (64 * 2 + 2));
  CHECK(NetParams::init(1) == p);
  CHECK(!(NetParams::init(2) == p));
  NetParams bad = p;
  bad.w2 = Matrix::Zero(64, 127);
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("attention matches the loop oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const NetParams p = lively(static_cast<std::uint64_t>(trial));
    const Matrix x = random_matrix(rng, 5, 8);
    CHECK(max_diff(oracle::loop_attention(oracle::to_grid(x), p, {}), attention_forward(x, p)) < 1e-12);
    const std::vector<bool> mask = {true, false, true, true, false};
    CHECK(max_diff(oracle::loop_attention(oracle::to_grid(x), p, mask), attention_forward(x, p, mask)) < 1e-12);
  }
}

TEST_CASE("single valid satellite and identical rows") {
  const NetParams p = lively(3);
  std::mt19937_64 rng(6);
  const Matrix x = random_matrix(rng, 1, 8);
  const Matrix expected = x + x * p.wv * p.wo;
  CHECK((attention_forward(x, p) - expected).cwiseAbs().maxCoeff() < 1e-12);

  Matrix twins(2, 8);
  twins.row(0) = x;
  twins.row(1) = x;
  const Matrix out = attention_forward(twins, p);
  CHECK((out.row(0) - out.row(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("layer norm") {
  const Matrix ones = Matrix::Ones(1, 8), zeros = Matrix::Zero(1, 8);
  std::mt19937_64 rng(7);
  const Matrix beta = random_matrix(rng, 1, 8);
  CHECK((layer_norm(Matrix::Constant(3, 8, 4.2), ones, beta).rowwise() - beta.row(0)).cwiseAbs().maxCoeff() == 0.0);

  Matrix tiled(2, 8);
  tiled << -1, 1, -1, 1, -1, 1, -1, 1, 1, -1, 1, -1, 1, -1, 1, -1;
  const Matrix y = layer_norm(tiled, ones, zeros);
  for (Eigen::Index r = 0; r < 2; ++r) {
    CHECK(std::abs(y.row(r).mean()) < 1e-12);
    const double sd = std::sqrt(y.row(r).squaredNorm() / 8.0);
    // The epsilon guard shrinks unit-variance rows by exactly 1/(1 + eps).
    CHECK(sd == doctest::Approx(1.0 / (1.0 + kNormEps)).epsilon(1e-12));
    CHECK(std::abs(sd - 1.0) < 1.1e-5);
  }

  const Matrix x = random_matrix(rng, 6, 8, 3.0);
  const Matrix g = random_matrix(rng, 1, 8);
  CHECK(max_diff(oracle::loop_layer_norm(oracle::to_grid(x), g, beta), layer_norm(x, g, beta)) < 1e-12);
}

TEST_CASE("full forward matches the loop oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const NetParams p = lively(static_cast<std::uint64_t>(10 + trial));
    const Matrix x = random_matrix(rng, 7, 8);
    std::vector<bool> mask(7, true);
    mask[static_cast<std::size_t>(trial % 7)] = false;
    const NetOutput out = forward(x, p, mask);
    const oracle::LoopOutput ref = oracle::loop_forward(oracle::to_grid(x), p, mask);
    for (std::size_t i = 0; i < 7; ++i) {
      if (!mask[i]) continue;
      CHECK(std::abs(out.r_diag(static_cast<Eigen::Index>(i)) - ref.r[i]) < 1e-10);
      CHECK(std::abs(out.v_comp(static_cast<Eigen::Index>(i)) - ref.v[i]) < 1e-10);
    }
  }
}

TEST_CASE("variance output is strictly positive") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    NetParams p = lively(static_cast<std::uint64_t>(trial));
    p.b_out(0, 0) = -30.0 + trial;
    const NetOutput out = forward(random_matrix(rng, 12, 8, 5.0), p);
    CHECK((out.r_diag.array() > 0.0).all());
  }
}

TEST_CASE("permutation equivariance and masked-slot independence") {
  std::mt19937_64 rng(10);
  const NetParams p = lively(4);
  const Matrix x = random_matrix(rng, 9, 8);
  std::vector<bool> mask = {true, true, false, true, true, true, false, true, true};
  const NetOutput base = forward(x, p, mask);

  std::vector<int> perm = {3, 0, 8, 2, 5, 1, 7, 6, 4};
  Matrix xp(9, 8);
  std::vector<bool> mp(9);
  for (int i = 0; i < 9; ++i) {
    xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    mp[static_cast<std::size_t>(i)] = mask[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  const NetOutput permuted = forward(xp, p, mp);
  for (int i = 0; i < 9; ++i) {
    if (!mp[static_cast<std::size_t>(i)]) continue;
    CHECK(std::abs(permuted.r_diag(i) - base.r_diag(perm[static_cast<std::size_t>(i)])) < 1e-12);
    CHECK(std::abs(permuted.v_comp(i) - base.v_comp(perm[static_cast<std::size_t>(i)])) < 1e-12);
  }

  Matrix junk = x;
  junk.row(2) = random_matrix(rng, 1, 8, 100.0);
  junk.row(6).setConstant(1e6);
  const NetOutput changed = forward(junk, p, mask);
  for (int i = 0; i < 9; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    CHECK(changed.r_diag(i) == base.r_diag(i));
    CHECK(changed.v_comp(i) == base.v_comp(i));
  }
}

TEST_CASE("taped network gradient matches finite differences") {
  std::mt19937_64 rng(11);
  const NetParams p = lively(6);
  const Matrix x = random_matrix(rng, 4, 8);
  const std::vector<bool> mask = {true, true, false, true};
  const auto loss_of = [&](const NetParams& q) {
    ad::Tape tape;
    const TapeParams tp = register_params(tape, q, false);
    const TapeOutput o = forward(tape, tape.constant(x), tp, mask);
    return ad::sum(ad::add(o.r_diag, ad::mul(o.v_comp, o.v_comp))).value()(0, 0);
  };
  ad::Tape tape;
  const TapeParams tp = register_params(tape, p);
  const TapeOutput o = forward(tape, tape.constant(x), tp, mask);
  tape.backward(ad::sum(ad::add(o.r_diag, ad::mul(o.v_comp, o.v_comp))));

  // Sample a few entries from every array.
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t a = 0; a < tp.vars.size(); ++a) {
    const Matrix g = tape.grad(tp.vars[a]);
    for (int s = 0; s < 4; ++s) {
      const Eigen::Index i = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(g.size()));
      NetParams plus = p, minus = p;
      plus.arrays()[a]->data()[i] += h;
      minus.arrays()[a]->data()[i] -= h;
      const double numeric = (loss_of(plus) - loss_of(minus)) / (2 * h);
      const double exact = g.data()[i];
      worst = std::max(worst, std::abs(numeric - exact) / std::max({std::abs(numeric), std::abs(exact), 1e-6}));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("model file round trip is bit exact") {
  const NetParams p = lively(12);
  const auto path = std::filesystem::temp_directory_path() / "lfgnss_test_model.json";
  save_params(p, path);
  const NetParams back = load_params(path);
  CHECK(back == p);
  CHECK(checksum(back) == checksum(p));
  std::filesystem::remove(path);
  CHECK(params_to_text(back) == params_to_text(p));
}

TEST_CASE("model file corruption is detected") {
  const std::string text = params_to_text(NetParams::init(13));
  CHECK(load_error("not json") == Errc::ModelFormatError);

  std::string version = text;
  version.replace(version.find("\"version\":1"), 11, "\"version\":9");
  CHECK(load_error(version) == Errc::VersionError);

  auto doc = nlohmann::json::parse(text);
  doc["arrays"][0]["data"][0] = doc["arrays"][0]["data"][0].get<double>() + 1e-3;
  CHECK(load_error(doc.dump()) == Errc::ChecksumMismatch);

  auto shape = nlohmann::json::parse(text);
  shape["arrays"][6]["rows"] = 7;
  CHECK(load_error(shape.dump()) == Errc::ShapeMismatch);
}
