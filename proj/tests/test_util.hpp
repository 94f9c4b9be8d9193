#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "d4am/matrix.hpp"
#include "d4am/network.hpp"
#include "d4am/param_vector.hpp"

namespace testutil {

inline d4am::ParamVector gaussian(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  d4am::ParamVector v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

inline d4am::Matrix gaussian_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng,
                                    double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  d4am::Matrix m(r, c);
  for (double& x : m.data) x = normal(rng);
  return m;
}

/// Central difference of f at every coordinate of x.
inline std::vector<double> central_diff(const std::function<double(const d4am::ParamVector&)>& f,
                                        d4am::ParamVector x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// |a - b| <= rel * max(|a|, |b|, floor)
inline bool close_rel(double a, double b, double rel, double floor) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), floor});
}

/// Straight-line evaluation of an MLP from the documented parameter layout,
/// written independently of the library's forward pass.
inline std::vector<double> naive_forward(const d4am::NetworkSpec& spec,
                                         const d4am::ParamVector& p, std::vector<double> x) {
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
    const std::size_t in = spec.layer_dims[l], out = spec.layer_dims[l + 1];
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = p[off + in * out + o];
      for (std::size_t i = 0; i < in; ++i) s += p[off + o * in + i] * x[i];
      y[o] = s;
    }
    off += in * out + out;
    const bool last = l + 2 == spec.layer_dims.size();
    if (!last) {
      for (double& v : y) {
        switch (spec.hidden_activations[l]) {
          case d4am::Activation::Tanh: v = std::tanh(v); break;
          case d4am::Activation::Relu: v = v > 0 ? v : 0; break;
          case d4am::Activation::Identity: break;
        }
      }
    } else if (spec.output_activation == d4am::OutputActivation::Softmax) {
      double m = y[0];
      for (double v : y) m = std::max(m, v);
      double z = 0;
      for (double& v : y) z += (v = std::exp(v - m));
      for (double& v : y) v /= z;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace testutil
