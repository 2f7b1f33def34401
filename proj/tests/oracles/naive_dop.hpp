#pragma once

// Plain-array DOP reference: builds the design matrix row by row and inverts the 4x4 normal
// matrix with Gauss-Jordan elimination. No Eigen, no downdating.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

// Quad precision so the reference stays accurate on nearly singular leave-one-out sets, where
// the normal matrix condition number reaches ~1e9.
using Quad = __float128;
using Mat4 = std::array<std::array<Quad, 4>, 4>;

inline Quad qabs(Quad x) { return x < 0 ? -x : x; }

inline Quad qsqrt(Quad x) {
  if (x <= 0) return 0;
  Quad r = std::sqrt(static_cast<long double>(x));
  for (int i = 0; i < 3; ++i) r = 0.5 * (r + x / r);
  return r;
}

inline Mat4 invert4(Mat4 m) {
  Mat4 inv{};
  for (int i = 0; i < 4; ++i) inv[i][i] = 1.0;
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r) {
      if (qabs(m[r][col]) > qabs(m[pivot][col])) pivot = r;
    }
    if (qabs(m[pivot][col]) < 1e-300L) throw std::runtime_error("singular");
    std::swap(m[col], m[pivot]);
    std::swap(inv[col], inv[pivot]);
    const Quad d = m[col][col];
    for (int c = 0; c < 4; ++c) {
      m[col][c] /= d;
      inv[col][c] /= d;
    }
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const Quad f = m[r][col];
      for (int c = 0; c < 4; ++c) {
        m[r][c] -= f * m[col][c];
        inv[r][c] -= f * inv[col][c];
      }
    }
  }
  return inv;
}

inline Mat4 naive_cofactor(const std::vector<double>& el, const std::vector<double>& az, std::size_t skip) {
  Mat4 n{};
  for (std::size_t k = 0; k < el.size(); ++k) {
    if (k == skip) continue;
    const long double e = el[k], a = az[k];
    const Quad row[4] = {std::cos(e) * std::sin(a), std::cos(e) * std::cos(a), std::sin(e), 1.0L};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) n[i][j] += row[i] * row[j];
  }
  return invert4(n);
}

struct Dops {
  double h, v, p, g;
};

inline Dops naive_dop(const std::vector<double>& el, const std::vector<double>& az, std::size_t skip = SIZE_MAX) {
  const Mat4 q = naive_cofactor(el, az, skip);
  Dops d;
  d.h = static_cast<double>(qsqrt(q[0][0] + q[1][1]));
  d.v = static_cast<double>(qsqrt(q[2][2]));
  d.p = static_cast<double>(qsqrt(q[0][0] + q[1][1] + q[2][2]));
  d.g = static_cast<double>(qsqrt(q[0][0] + q[1][1] + q[2][2] + q[3][3]));
  return d;
}

/// GDOP with all satellites minus GDOP without satellite n, differenced before rounding.
inline double naive_dpc(const std::vector<double>& el, const std::vector<double>& az, std::size_t n) {
  const auto gdop = [&](std::size_t skip) {
    const Mat4 q = naive_cofactor(el, az, skip);
    return qsqrt(q[0][0] + q[1][1] + q[2][2] + q[3][3]);
  };
  return static_cast<double>(gdop(SIZE_MAX) - gdop(n));
}

}  // namespace oracle
