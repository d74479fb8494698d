#include "dhia/model.hpp"

#include <bit>
#include <fstream>

#include "json.hpp"

#include "dhia/errors.hpp"
#include "dhia/tensor_io.hpp"

namespace dhia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Specs {
  std::vector<MlpSpec> encoders, decoders, energy;
  MlpSpec predictor;
};

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Specs make_specs(const Architecture& arch, const std::vector<std::size_t>& view_dims, std::size_t k) {
  if (view_dims.empty()) throw ConfigError("model needs at least one view");
  if (k == 0) throw ConfigError("cluster count must be >= 1");
  if (arch.latent_dim == 0) throw ConfigError("latent_dim must be >= 1");
  Specs s;
  const std::vector<std::size_t> mirrored(arch.encoder_hidden.rbegin(), arch.encoder_hidden.rend());
  for (std::size_t d : view_dims) {
    s.encoders.push_back({widths(d, arch.encoder_hidden, arch.latent_dim), Activation::relu, Activation::identity});
    s.decoders.push_back({widths(arch.latent_dim, mirrored, d), Activation::relu, Activation::identity});
  }
  s.predictor = {widths(arch.latent_dim, arch.predictor_hidden, k), Activation::relu, Activation::softmax};
  for (std::size_t c = 0; c < k; ++c)
    s.energy.push_back({widths(arch.latent_dim, arch.energy_hidden, 1), Activation::relu, Activation::softplus});
  for (const auto* group : {&s.encoders, &s.decoders, &s.energy})
    for (const auto& spec : *group) spec.validate();
  s.predictor.validate();
  return s;
}

template <class Init>
ModelBundle build(const Architecture& arch, const std::vector<std::size_t>& view_dims, std::size_t k, Init init) {
  Specs s = make_specs(arch, view_dims, k);
  ModelBundle m;
  m.latent_dim = arch.latent_dim;
  m.k = k;
  m.view_dims = view_dims;
  for (auto& spec : s.encoders) m.encoders.push_back({spec, init(spec)});
  for (auto& spec : s.decoders) m.decoders.push_back({spec, init(spec)});
  m.predictor = {s.predictor, init(s.predictor)};
  for (auto& spec : s.energy) m.energy_nets.push_back({spec, init(spec)});
  return m;
}

void check_width(const Matrix& x, std::size_t expected, const char* what) {
  if (x.cols() != expected) {
    throw DimensionError(std::string(what) + ": input width " + std::to_string(x.cols()) + " but network expects " +
                         std::to_string(expected));
  }
}

json spec_json(const std::string& role, std::size_t index, const MlpSpec& spec) {
  return json{{"role", role},
              {"index", index},
              {"widths", spec.layer_widths},
              {"hidden_activation", to_string(spec.hidden_activation)},
              {"output_activation", to_string(spec.output_activation)}};
}

MlpSpec spec_from_json(const json& j) {
  MlpSpec s;
  s.layer_widths = j.at("widths").get<std::vector<std::size_t>>();
  s.hidden_activation = activation_from_string(j.at("hidden_activation").get<std::string>());
  s.output_activation = activation_from_string(j.at("output_activation").get<std::string>());
  s.validate();
  return s;
}

}  // namespace

std::vector<Network*> ModelBundle::networks() {
  std::vector<Network*> out;
  for (auto& n : encoders) out.push_back(&n);
  for (auto& n : decoders) out.push_back(&n);
  out.push_back(&predictor);
  for (auto& n : energy_nets) out.push_back(&n);
  return out;
}

std::vector<const Network*> ModelBundle::networks() const {
  std::vector<const Network*> out;
  for (auto* n : const_cast<ModelBundle*>(this)->networks()) out.push_back(n);
  return out;
}

std::vector<Network*> ModelBundle::autoencoder_networks() {
  std::vector<Network*> out;
  for (auto& n : encoders) out.push_back(&n);
  for (auto& n : decoders) out.push_back(&n);
  return out;
}

void ModelBundle::validate() const {
  const std::size_t v = encoders.size();
  if (v == 0 || decoders.size() != v || view_dims.size() != v) throw ConfigError("bundle view count is inconsistent");
  if (energy_nets.size() != k) throw ConfigError("bundle needs one energy network per cluster");
  for (std::size_t i = 0; i < v; ++i) {
    if (encoders[i].spec.input_width() != view_dims[i] || encoders[i].spec.output_width() != latent_dim)
      throw ConfigError("encoder " + std::to_string(i) + " widths do not match the bundle");
    if (decoders[i].spec.input_width() != latent_dim || decoders[i].spec.output_width() != view_dims[i])
      throw ConfigError("decoder " + std::to_string(i) + " widths do not match the bundle");
  }
  if (predictor.spec.input_width() != latent_dim || predictor.spec.output_width() != k ||
      predictor.spec.output_activation != Activation::softmax)
    throw ConfigError("predictor must map latent_dim to a softmax over K");
  for (const auto& e : energy_nets)
    if (e.spec.input_width() != latent_dim || e.spec.output_width() != 1 ||
        e.spec.output_activation != Activation::softplus)
      throw ConfigError("energy networks must map latent_dim to one softplus output");
  for (const auto* n : networks())
    if (n->params.tensor_count() != 2 * n->spec.layer_count()) throw ConfigError("network parameter count mismatch");
}

ModelBundle make_bundle(const Architecture& arch, const std::vector<std::size_t>& view_dims, std::size_t k,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return build(arch, view_dims, k, [&rng](const MlpSpec& s) { return init_params(s, rng); });
}

ModelBundle make_zero_bundle(const Architecture& arch, const std::vector<std::size_t>& view_dims, std::size_t k) {
  return build(arch, view_dims, k, [](const MlpSpec& s) { return zero_params(s); });
}

Var encode(Tape& t, const ModelBundle& m, std::size_t view, Var x) {
  if (view >= m.view_count()) throw ContractError("view index out of range");
  check_width(t.value(x), m.view_dims[view], "encode");
  return mlp_forward(m.encoders[view].spec, m.encoders[view].params, x, t);
}

Var decode(Tape& t, const ModelBundle& m, std::size_t view, Var h) {
  if (view >= m.view_count()) throw ContractError("view index out of range");
  check_width(t.value(h), m.latent_dim, "decode");
  return mlp_forward(m.decoders[view].spec, m.decoders[view].params, h, t);
}

Var predict(Tape& t, const ModelBundle& m, Var h) {
  check_width(t.value(h), m.latent_dim, "predict");
  return mlp_forward(m.predictor.spec, m.predictor.params, h, t);
}

Var energy(Tape& t, const ModelBundle& m, std::size_t cluster, Var h) {
  if (cluster >= m.k) {
    throw ContractError("cluster " + std::to_string(cluster) + " out of range for K=" + std::to_string(m.k));
  }
  check_width(t.value(h), m.latent_dim, "energy");
  return mlp_forward(m.energy_nets[cluster].spec, m.energy_nets[cluster].params, h, t);
}

Matrix encode_batch(const ModelBundle& m, std::size_t view, const Matrix& x) {
  Tape t;
  return t.value(encode(t, m, view, t.constant(x)));
}

Matrix decode_batch(const ModelBundle& m, std::size_t view, const Matrix& h) {
  Tape t;
  return t.value(decode(t, m, view, t.constant(h)));
}

Matrix predict_assignments(const ModelBundle& m, const Matrix& h) {
  Tape t;
  return t.value(predict(t, m, t.constant(h)));
}

Matrix energy_of(const ModelBundle& m, std::size_t cluster, const Matrix& h) {
  Tape t;
  return t.value(energy(t, m, cluster, t.constant(h)));
}

std::uint64_t parameter_checksum(std::span<const Network* const> nets) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Network* n : nets) {
    for (const Matrix& m : n->params.values) {
      for (double x : m.data()) {
        auto bits = std::bit_cast<std::uint64_t>(x);
        for (int b = 0; b < 8; ++b) {
          h ^= (bits >> (8 * b)) & 0xFF;
          h *= 1099511628211ULL;
        }
      }
    }
  }
  return h;
}

fs::path manifest_path_for(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".json");
  return p;
}

void save_checkpoint(const ModelBundle& m, const fs::path& path) {
  m.validate();
  json manifest{{"format", "dhia-checkpoint"},
                {"version", kTensorContainerVersion},
                {"latent_dim", m.latent_dim},
                {"k", m.k},
                {"view_dims", m.view_dims},
                {"networks", json::array()}};
  for (std::size_t v = 0; v < m.encoders.size(); ++v) manifest["networks"].push_back(spec_json("encoder", v, m.encoders[v].spec));
  for (std::size_t v = 0; v < m.decoders.size(); ++v) manifest["networks"].push_back(spec_json("decoder", v, m.decoders[v].spec));
  manifest["networks"].push_back(spec_json("predictor", 0, m.predictor.spec));
  for (std::size_t c = 0; c < m.energy_nets.size(); ++c)
    manifest["networks"].push_back(spec_json("energy", c, m.energy_nets[c].spec));

  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw DataError("cannot write checkpoint " + path.string());
  for (const Network* n : m.networks()) write_tensor_container(bin, n->params.values);
  bin.close();
  if (!bin) throw DataError("failed writing checkpoint " + path.string());

  std::ofstream js(manifest_path_for(path));
  if (!js) throw DataError("cannot write checkpoint manifest " + manifest_path_for(path).string());
  js << manifest.dump(2) << '\n';
}

ModelBundle load_checkpoint(const fs::path& path) {
  std::ifstream js(manifest_path_for(path));
  if (!js) throw DataError("cannot open checkpoint manifest " + manifest_path_for(path).string());
  json manifest;
  try {
    js >> manifest;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  ModelBundle m;
  try {
    m.latent_dim = manifest.at("latent_dim").get<std::size_t>();
    m.k = manifest.at("k").get<std::size_t>();
    m.view_dims = manifest.at("view_dims").get<std::vector<std::size_t>>();
    for (const auto& n : manifest.at("networks")) {
      const auto role = n.at("role").get<std::string>();
      Network net{spec_from_json(n), {}};
      if (role == "encoder") m.encoders.push_back(std::move(net));
      else if (role == "decoder") m.decoders.push_back(std::move(net));
      else if (role == "predictor") m.predictor = std::move(net);
      else if (role == "energy") m.energy_nets.push_back(std::move(net));
      else throw DataError("unknown network role '" + role + "' in manifest");
    }
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint manifest: " + std::string(e.what()));
  }

  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw DataError("cannot open checkpoint " + path.string());
  for (Network* n : m.networks()) {
    for (Matrix& t : read_tensor_container(bin)) n->params.add(std::move(t));
    const auto& w = n->spec.layer_widths;
    if (n->params.tensor_count() != 2 * n->spec.layer_count()) throw DataError("checkpoint tensor count mismatch");
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      if (n->params.values[2 * l].rows() != w[l] || n->params.values[2 * l].cols() != w[l + 1] ||
          n->params.values[2 * l + 1].rows() != 1 || n->params.values[2 * l + 1].cols() != w[l + 1])
        throw DataError("checkpoint tensor shape does not match manifest widths");
    }
  }
  if (bin.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in checkpoint " + path.string());
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint is inconsistent: ") + e.what());
  }
  return m;
}

}  // namespace dhia
