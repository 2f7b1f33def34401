#pragma once

// Scalar loop evaluation of the hard-example-mining loss chain.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

struct ScalarDhem {
  double loss = 0.0;
  std::vector<double> w, gamma_dyn, value;
};

inline ScalarDhem scalar_dhem(const std::vector<double>& base, double alpha, double gamma, double lambda,
                              bool dynamic, double eps) {
  ScalarDhem out;
  double top = 0.0;
  for (double b : base) top = std::max(top, b);
  double sq = 0.0;
  for (double b : base) {
    const double g = dynamic ? gamma * std::exp(-lambda * b) : gamma;
    const double w = std::pow(1.0 - std::sqrt(b / (top + eps)), g);
    const double v = alpha * w * b;
    out.gamma_dyn.push_back(g);
    out.w.push_back(w);
    out.value.push_back(v);
    sq += v * v;
  }
  out.loss = std::sqrt(sq / static_cast<double>(base.size()));
  return out;
}

/// Textbook Adam on a flat parameter vector.
struct ScalarAdam {
  std::vector<double> m, v;
  long t = 0;
  void step(std::vector<double>& x, const std::vector<double>& g, double lr, double b1 = 0.9, double b2 = 0.999,
            double eps = 1e-8) {
    if (m.empty()) {
      m.assign(x.size(), 0.0);
      v.assign(x.size(), 0.0);
    }
    ++t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, static_cast<double>(t)));
      const double vh = v[i] / (1 - std::pow(b2, static_cast<double>(t)));
      x[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

}  // namespace oracle
