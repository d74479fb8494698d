#include "dhia/mlp.hpp"

#include <cmath>

#include "dhia/errors.hpp"

namespace dhia {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
    case Activation::softplus: return "softplus";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "softmax") return Activation::softmax;
  if (name == "softplus") return Activation::softplus;
  throw ConfigError("unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw ConfigError("an MLP needs at least two layer widths");
  for (std::size_t w : layer_widths)
    if (w == 0) throw ConfigError("MLP layer widths must be >= 1");
  if (hidden_activation != Activation::relu) throw ConfigError("hidden activation must be relu");
  if (output_activation == Activation::relu) throw ConfigError("output activation must be identity, softmax or softplus");
}

ParamStore init_params(const MlpSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  ParamStore store;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t fan_in = spec.layer_widths[l];
    const std::size_t fan_out = spec.layer_widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(fan_in, fan_out);
    for (double& x : w.data()) x = dist(rng);
    store.add(std::move(w));
    store.add(Matrix(1, fan_out));
  }
  return store;
}

ParamStore zero_params(const MlpSpec& spec) {
  spec.validate();
  ParamStore store;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    store.add(Matrix(spec.layer_widths[l], spec.layer_widths[l + 1]));
    store.add(Matrix(1, spec.layer_widths[l + 1]));
  }
  return store;
}

Var mlp_forward(const MlpSpec& spec, const ParamStore& params, Var input, Tape& tape) {
  if (params.tensor_count() != 2 * spec.layer_count()) {
    throw DimensionError("parameter store has " + std::to_string(params.tensor_count()) + " tensors, spec needs " +
                         std::to_string(2 * spec.layer_count()));
  }
  Var h = input;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const Matrix& w = params.values[2 * l];
    if (tape.value(h).cols() != w.rows()) {
      throw DimensionError("layer " + std::to_string(l) + ": input width " + std::to_string(tape.value(h).cols()) +
                           " does not match weight rows " + std::to_string(w.rows()));
    }
    h = add_row_bias(tape, matmul(tape, h, tape.parameter(params, 2 * l)), tape.parameter(params, 2 * l + 1));
    const bool last = l + 1 == spec.layer_count();
    switch (last ? spec.output_activation : spec.hidden_activation) {
      case Activation::identity: break;
      case Activation::relu: h = relu(tape, h); break;
      case Activation::softmax: h = softmax_rows(tape, h); break;
      case Activation::softplus: h = softplus(tape, h); break;
    }
  }
  return h;
}

Matrix mlp_forward(const MlpSpec& spec, const ParamStore& params, const Matrix& input) {
  Tape tape;
  return tape.value(mlp_forward(spec, params, tape.constant(input), tape));
}

void adam_step(ParamStore& params, const std::vector<Matrix>& grads, const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (grads.size() != params.values.size()) throw DimensionError("gradient count does not match parameter count");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!grads[i].same_shape(params.values[i])) throw DimensionError("gradient shape mismatch at tensor " + std::to_string(i));

  ++params.step;
  const double t = static_cast<double>(params.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto p = params.values[i].data();
    auto m = params.first_moment[i].data();
    auto v = params.second_moment[i].data();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      if (g[j] == 0.0) continue;
      p[j] -= cfg.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.eps);
    }
  }
}

}  // namespace dhia
