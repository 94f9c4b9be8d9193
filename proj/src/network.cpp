#include "d4am/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "d4am/errors.hpp"

namespace d4am {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

std::string to_string(OutputActivation a) {
  return a == OutputActivation::Softmax ? "softmax" : "identity";
}

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

OutputActivation parse_output_activation(const std::string& s) {
  if (s == "identity") return OutputActivation::Identity;
  if (s == "softmax") return OutputActivation::Softmax;
  throw ConfigError("unknown output activation '" + s + "'");
}

NetworkSpec NetworkSpec::mlp(std::vector<std::size_t> dims, Activation hidden,
                             OutputActivation output) {
  NetworkSpec spec;
  const std::size_t hidden_count = dims.size() >= 2 ? dims.size() - 2 : 0;
  spec.layer_dims = std::move(dims);
  spec.hidden_activations.assign(hidden_count, hidden);
  spec.output_activation = output;
  return spec;
}

std::size_t NetworkSpec::param_count() const {
  std::size_t p = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    p += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  }
  return p;
}

std::size_t NetworkSpec::weight_offset(std::size_t l) const {
  std::size_t p = 0;
  for (std::size_t k = 0; k < l; ++k) p += layer_dims[k] * layer_dims[k + 1] + layer_dims[k + 1];
  return p;
}

void NetworkSpec::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("network needs at least one layer");
  for (std::size_t d : layer_dims) {
    if (d == 0) throw ConfigError("network layer dims must be positive");
  }
  if (hidden_activations.size() != layer_dims.size() - 2) {
    throw ConfigError("network has " + std::to_string(layer_dims.size() - 2) +
                      " hidden layers but " + std::to_string(hidden_activations.size()) +
                      " activations");
  }
  if (output_activation == OutputActivation::Softmax && output_dim() < 2) {
    throw ConfigError("softmax head needs at least two outputs");
  }
}

std::string NetworkSpec::describe() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < layer_dims.size(); ++i) {
    if (i) os << ',';
    os << layer_dims[i];
  }
  os << ']';
  if (!hidden_activations.empty()) os << ' ' << to_string(hidden_activations.front());
  os << ' ' << to_string(output_activation);
  return os.str();
}

ParamVector init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector params(spec.param_count(), 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_dims[l];
    const std::size_t out = spec.layer_dims[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    const std::size_t off = spec.weight_offset(l);
    for (std::size_t i = 0; i < in * out; ++i) params[off + i] = scale * normal(rng);
  }
  return params;
}

namespace detail {

namespace {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Identity: return z;
  }
  return z;
}

// Derivative expressed through the post-activation value.
inline double activate_grad(Activation a, double y) {
  switch (a) {
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

void forward_tape(const NetworkSpec& spec, const double* params,
                  std::span<const double> input, Tape& tape) {
  const std::size_t L = spec.num_layers();
  tape.acts.resize(L + 1);
  tape.acts[0].assign(input.begin(), input.end());
  const double* p = params;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = spec.layer_dims[l];
    const std::size_t out = spec.layer_dims[l + 1];
    const double* w = p;
    const double* b = p + in * out;
    const std::vector<double>& a = tape.acts[l];
    std::vector<double>& z = tape.acts[l + 1];
    z.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = s;
    }
    if (l + 1 < L) {
      const Activation act = spec.hidden_activations[l];
      if (act != Activation::Identity) {
        for (double& v : z) v = activate(act, v);
      }
    }
    p += in * out + out;
  }
}

void backprop(const NetworkSpec& spec, const double* params, const Tape& tape,
              std::span<const double> d_last, std::span<double> param_grad_accum,
              std::span<double> input_grad) {
  const std::size_t L = spec.num_layers();
  const bool want_params = !param_grad_accum.empty();
  std::vector<double> delta(d_last.begin(), d_last.end());
  std::vector<double> below;
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = spec.layer_dims[l];
    const std::size_t out = spec.layer_dims[l + 1];
    const std::size_t off = spec.weight_offset(l);
    const double* w = params + off;
    const std::vector<double>& a = tape.acts[l];
    if (want_params) {
      double* gw = param_grad_accum.data() + off;
      double* gb = gw + in * out;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* grow = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += d * a[i];
        gb[o] += d;
      }
    }
    if (l == 0 && input_grad.empty()) break;
    below.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) below[i] += row[i] * d;
    }
    if (l == 0) {
      std::copy(below.begin(), below.end(), input_grad.begin());
      break;
    }
    const Activation act = spec.hidden_activations[l - 1];
    if (act != Activation::Identity) {
      for (std::size_t i = 0; i < in; ++i) below[i] *= activate_grad(act, a[i]);
    }
    delta.swap(below);
  }
}

void softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : z) v /= s;
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace detail

namespace {

void check_params(const NetworkSpec& spec, const ParamVector& params) {
  spec.validate();
  if (params.size() != spec.param_count()) {
    throw ShapeError("parameter vector has length " + std::to_string(params.size()) +
                     ", network " + spec.describe() + " needs " +
                     std::to_string(spec.param_count()));
  }
}

void check_len(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + " has length " + std::to_string(got) + ", expected " +
                     std::to_string(want));
  }
}

}  // namespace

std::vector<double> forward(const NetworkSpec& spec, const ParamVector& params,
                            std::span<const double> input) {
  check_params(spec, params);
  check_len(input.size(), spec.input_dim(), "input");
  detail::Tape tape;
  detail::forward_tape(spec, params.data(), input, tape);
  std::vector<double> out = std::move(tape.acts.back());
  if (spec.output_activation == OutputActivation::Softmax) detail::softmax_inplace(out);
  return out;
}

BackwardResult backward(const NetworkSpec& spec, const ParamVector& params,
                        std::span<const double> input, std::span<const double> upstream) {
  check_params(spec, params);
  check_len(input.size(), spec.input_dim(), "input");
  check_len(upstream.size(), spec.output_dim(), "upstream gradient");
  detail::Tape tape;
  detail::forward_tape(spec, params.data(), input, tape);
  std::vector<double> d_last(upstream.begin(), upstream.end());
  if (spec.output_activation == OutputActivation::Softmax) {
    // d/dz <u, softmax(z)> = s * (u - <u, s>)
    std::vector<double> s = tape.acts.back();
    detail::softmax_inplace(s);
    double us = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) us += upstream[k] * s[k];
    for (std::size_t k = 0; k < s.size(); ++k) d_last[k] = s[k] * (upstream[k] - us);
  }
  BackwardResult result{ParamVector(spec.param_count(), 0.0),
                        std::vector<double>(spec.input_dim(), 0.0)};
  detail::backprop(spec, params.data(), tape, d_last, result.param_grad.span(),
                   result.input_grad);
  return result;
}

}  // namespace d4am
