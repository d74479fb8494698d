#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "dhia/model.hpp"

namespace dhia {

enum class PrototypeScope { batch, epoch };

struct TrainConfig {
  double alpha = 0.1;
  double beta = 0.01;
  double tau = 0.5;
  double lr = 1e-3;
  std::size_t pretrain_epochs = 50;
  std::size_t finetune_epochs = 60;
  std::size_t batch_size = 100;
  std::uint64_t seed = 0;
  std::size_t clusters = 0;  // 0: take K from the ground-truth labels
  Architecture arch;
  bool normalize = true;

  bool use_rec = true;
  bool use_ebm = true;
  bool use_caa = true;
  bool detach_anchors = true;
  bool detach_imputed = true;
  PrototypeScope prototype_scope = PrototypeScope::batch;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Desk-scale defaults (CPU-sized widths and epoch counts).
TrainConfig desk_config();
// Widths, epochs and optimizer settings used for the full-size benchmark runs.
TrainConfig full_scale_config();

nlohmann::json to_json(const TrainConfig& c);
// Unknown keys are rejected with ConfigError; missing keys keep their defaults.
TrainConfig config_from_json(const nlohmann::json& j, const TrainConfig& base = TrainConfig{});
TrainConfig load_config(const std::filesystem::path& path);

}  // namespace dhia
