#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dhia/mlp.hpp"

namespace dhia {

struct Network {
  MlpSpec spec;
  ParamStore params;
};

// Hidden widths of every network family; input/output widths are implied.
struct Architecture {
  std::size_t latent_dim = 32;
  std::vector<std::size_t> encoder_hidden{64, 128};  // decoders mirror this list
  std::vector<std::size_t> predictor_hidden{64};
  std::vector<std::size_t> energy_hidden{64, 64, 64};

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// V autoencoders, the shared soft-assignment predictor and K cluster energy networks.
struct ModelBundle {
  std::vector<Network> encoders;
  std::vector<Network> decoders;
  Network predictor;
  std::vector<Network> energy_nets;
  std::size_t latent_dim = 0;
  std::size_t k = 0;
  std::vector<std::size_t> view_dims;

  std::size_t view_count() const { return encoders.size(); }
  // Encoders, decoders, predictor, then energy networks.
  std::vector<Network*> networks();
  std::vector<const Network*> networks() const;
  std::vector<Network*> autoencoder_networks();
  void validate() const;
};

ModelBundle make_bundle(const Architecture& arch, const std::vector<std::size_t>& view_dims, std::size_t k,
                        std::uint64_t seed);
// Same topology with every parameter zero.
ModelBundle make_zero_bundle(const Architecture& arch, const std::vector<std::size_t>& view_dims, std::size_t k);

Var encode(Tape& t, const ModelBundle& m, std::size_t view, Var x);
Var decode(Tape& t, const ModelBundle& m, std::size_t view, Var h);
Var predict(Tape& t, const ModelBundle& m, Var h);
Var energy(Tape& t, const ModelBundle& m, std::size_t cluster, Var h);

Matrix encode_batch(const ModelBundle& m, std::size_t view, const Matrix& x);
Matrix decode_batch(const ModelBundle& m, std::size_t view, const Matrix& h);
Matrix predict_assignments(const ModelBundle& m, const Matrix& h);
Matrix energy_of(const ModelBundle& m, std::size_t cluster, const Matrix& h);

// FNV-1a over the parameter bytes of the given networks, in order.
std::uint64_t parameter_checksum(std::span<const Network* const> nets);

// Binary tensors (one container per network) at `path`, JSON manifest at `path` with ".json".
void save_checkpoint(const ModelBundle& m, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);
std::filesystem::path manifest_path_for(const std::filesystem::path& checkpoint);

}  // namespace dhia
