#pragma once

// Straight-line loop evaluation of the attention network. Reads parameters element by element
// and shares no code with the library forward pass.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lfgnss/network.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const Eigen::MatrixXd& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return g;
}

inline Grid affine(const Grid& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd* b) {
  Grid y(x.size(), std::vector<double>(static_cast<std::size_t>(w.cols()), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double acc = b ? (*b)(0, j) : 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) acc += x[i][k] * w(static_cast<Eigen::Index>(k), j);
      y[i][static_cast<std::size_t>(j)] = acc;
    }
  }
  return y;
}

inline Grid loop_attention(const Grid& x, const lfgnss::net::NetParams& p, const std::vector<bool>& mask) {
  const std::size_t n = x.size();
  const int heads = 4, width = 2;
  const Grid q = affine(x, p.wq, nullptr), k = affine(x, p.wk, nullptr), v = affine(x, p.wv, nullptr);
  Grid cat(n, std::vector<double>(8, 0.0));
  for (int h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(n);
      double top = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        if (!mask.empty() && !mask[j]) continue;
        double dot = 0.0;
        for (int c = 0; c < width; ++c) dot += q[i][h * width + c] * k[j][h * width + c];
        s[j] = dot / std::sqrt(2.0);
        top = std::max(top, s[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!mask.empty() && !mask[j]) {
          s[j] = 0.0;
          continue;
        }
        s[j] = std::exp(s[j] - top);
        z += s[j];
      }
      for (std::size_t j = 0; j < n; ++j)
        for (int c = 0; c < width; ++c) cat[i][h * width + c] += s[j] / z * v[j][h * width + c];
    }
  }
  Grid out = affine(cat, p.wo, nullptr);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 8; ++c) out[i][c] += x[i][c];
  return out;
}

inline Grid loop_layer_norm(const Grid& x, const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& beta) {
  Grid y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i].size());
    double mu = 0.0;
    for (double a : x[i]) mu += a;
    mu /= d;
    double var = 0.0;
    for (double a : x[i]) var += (a - mu) * (a - mu);
    const double sd = std::sqrt(var / d);
    for (std::size_t c = 0; c < x[i].size(); ++c) {
      y[i][c] = gamma(0, static_cast<Eigen::Index>(c)) * (x[i][c] - mu) / (sd + 1e-5) +
                beta(0, static_cast<Eigen::Index>(c));
    }
  }
  return y;
}

struct LoopOutput {
  std::vector<double> r, v;
};

inline LoopOutput loop_forward(const Grid& x, const lfgnss::net::NetParams& p, const std::vector<bool>& mask) {
  Grid h = loop_layer_norm(loop_attention(x, p, mask), p.gamma, p.beta);
  const Eigen::MatrixXd* ws[3] = {&p.w1, &p.w2, &p.w3};
  const Eigen::MatrixXd* bs[3] = {&p.b1, &p.b2, &p.b3};
  for (int l = 0; l < 3; ++l) {
    h = affine(h, *ws[l], bs[l]);
    for (auto& row : h)
      for (double& a : row) a = a > 0.0 ? a : 0.0;
  }
  const Grid o = affine(h, p.w_out, &p.b_out);
  LoopOutput out;
  for (const auto& row : o) {
    const double a = row[0];
    out.r.push_back(a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)));
    out.v.push_back(row[1]);
  }
  return out;
}

}  // namespace oracle
