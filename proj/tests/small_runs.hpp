#pragma once

#include "dhia/trainer.hpp"

namespace dhia::testing {

inline TrainConfig tiny_config(std::uint64_t seed = 3) {
  TrainConfig c;
  c.seed = seed;
  c.pretrain_epochs = 3;
  c.finetune_epochs = 4;
  c.batch_size = 16;
  c.arch.latent_dim = 4;
  c.arch.encoder_hidden = {8};
  c.arch.predictor_hidden = {6};
  c.arch.energy_hidden = {5};
  return c;
}

inline ViewDataset tiny_data(double eta, std::uint64_t seed = 11, std::size_t views = 2) {
  SyntheticSpec s;
  s.n = 40;
  s.v_count = views;
  s.k = 3;
  s.latent_dim = 3;
  s.view_dims.assign(views, 5);
  s.seed = seed;
  return synthesize_incomplete(s, eta);
}

}  // namespace dhia::testing
