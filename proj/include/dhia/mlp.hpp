#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "dhia/tape.hpp"

namespace dhia {

enum class Activation { identity, relu, softmax, softplus };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MlpSpec {
  std::vector<std::size_t> layer_widths;  // input width first, output width last
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::identity;

  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }
  std::size_t layer_count() const { return layer_widths.size() - 1; }
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
// Tensor order is W0, b0, W1, b1, ... with W_l of shape fan_in x fan_out.
ParamStore init_params(const MlpSpec& spec, std::mt19937_64& rng);
ParamStore zero_params(const MlpSpec& spec);

Var mlp_forward(const MlpSpec& spec, const ParamStore& params, Var input, Tape& tape);
Matrix mlp_forward(const MlpSpec& spec, const ParamStore& params, const Matrix& input);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One adaptive-moment update. Moments decay for every coordinate; a parameter
// only moves where its gradient is nonzero.
void adam_step(ParamStore& params, const std::vector<Matrix>& grads, const AdamConfig& cfg);

}  // namespace dhia
