#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "d4am/param_vector.hpp"

namespace d4am {

enum class Activation { Tanh, Relu, Identity };
enum class OutputActivation { Identity, Softmax };

std::string to_string(Activation a);
std::string to_string(OutputActivation a);
Activation parse_activation(const std::string& s);
OutputActivation parse_output_activation(const std::string& s);

/// Dense multilayer perceptron description.
///
/// `layer_dims` lists the width of every layer including input and output,
/// so a network with N weight layers has N+1 dims and N-1 hidden
/// activations.
struct NetworkSpec {
  std::vector<std::size_t> layer_dims;
  std::vector<Activation> hidden_activations;
  OutputActivation output_activation = OutputActivation::Identity;

  /// Same activation on every hidden layer.
  static NetworkSpec mlp(std::vector<std::size_t> dims, Activation hidden,
                         OutputActivation output = OutputActivation::Identity);

  std::size_t num_layers() const noexcept {
    return layer_dims.empty() ? 0 : layer_dims.size() - 1;
  }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t param_count() const;

  /// Offset of layer `l`'s weight block; its bias follows the weights.
  std::size_t weight_offset(std::size_t l) const;

  /// Throws ConfigError.
  void validate() const;

  std::string describe() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// LeCun-normal weights (variance 1/fan_in), zero biases.
ParamVector init_params(const NetworkSpec& spec, std::uint64_t seed);

std::vector<double> forward(const NetworkSpec& spec, const ParamVector& params,
                            std::span<const double> input);

struct BackwardResult {
  ParamVector param_grad;
  std::vector<double> input_grad;
};

/// Gradient of <upstream, forward(params, input)> with respect to the
/// parameters and to the input.
BackwardResult backward(const NetworkSpec& spec, const ParamVector& params,
                        std::span<const double> input, std::span<const double> upstream);

namespace detail {

/// Per-layer values retained by a forward pass for reverse-mode use.
/// `acts[0]` is the input and `acts[l+1]` the post-activation output of
/// layer l, except that the final entry holds pre-softmax logits when the
/// head is softmax.
struct Tape {
  std::vector<std::vector<double>> acts;
};

void forward_tape(const NetworkSpec& spec, const double* params,
                  std::span<const double> input, Tape& tape);

/// Backpropagate `d_last` (gradient w.r.t. tape.acts.back(), i.e. the
/// logits for a softmax head) through the network. Parameter gradients are
/// added into `param_grad_accum` scaled by 1; either output span may be
/// empty to skip it.
void backprop(const NetworkSpec& spec, const double* params, const Tape& tape,
              std::span<const double> d_last, std::span<double> param_grad_accum,
              std::span<double> input_grad);

void softmax_inplace(std::span<double> z);
double log_sum_exp(std::span<const double> z);

}  // namespace detail

}  // namespace d4am
