#include "dhia/config.hpp"

#include <fstream>
#include <set>

#include "dhia/errors.hpp"

namespace dhia {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (arch.latent_dim == 0) throw ConfigError("latent_dim must be >= 1");
  for (const auto* widths : {&arch.encoder_hidden, &arch.predictor_hidden, &arch.energy_hidden})
    for (std::size_t w : *widths)
      if (w == 0) throw ConfigError("hidden widths must be >= 1");
  if (prototype_scope == PrototypeScope::epoch && !detach_imputed) {
    throw ConfigError("epoch-scoped prototypes are fixed for the epoch and require detach_imputed = true");
  }
}

TrainConfig desk_config() { return TrainConfig{}; }

TrainConfig full_scale_config() {
  TrainConfig c;
  c.lr = 1e-4;
  c.pretrain_epochs = 100;
  c.finetune_epochs = 200;
  c.batch_size = 100;
  c.arch.latent_dim = 2000;
  c.arch.encoder_hidden = {256, 512};
  c.arch.predictor_hidden = {1024};
  c.arch.energy_hidden = {256, 256, 256};
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"alpha", c.alpha},
              {"beta", c.beta},
              {"tau", c.tau},
              {"lr", c.lr},
              {"pretrain_epochs", c.pretrain_epochs},
              {"finetune_epochs", c.finetune_epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"clusters", c.clusters},
              {"latent_dim", c.arch.latent_dim},
              {"encoder_hidden", c.arch.encoder_hidden},
              {"predictor_hidden", c.arch.predictor_hidden},
              {"energy_hidden", c.arch.energy_hidden},
              {"normalize", c.normalize},
              {"use_rec", c.use_rec},
              {"use_ebm", c.use_ebm},
              {"use_caa", c.use_caa},
              {"detach_anchors", c.detach_anchors},
              {"detach_imputed", c.detach_imputed},
              {"prototype_scope", c.prototype_scope == PrototypeScope::batch ? "batch" : "epoch"}};
}

TrainConfig config_from_json(const json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "alpha",          "beta",          "tau",          "lr",          "pretrain_epochs", "finetune_epochs",
      "batch_size",     "seed",          "latent_dim",   "encoder_hidden", "predictor_hidden", "energy_hidden",
      "normalize",      "use_rec",       "use_ebm",      "use_caa",     "detach_anchors",  "detach_imputed",
      "prototype_scope", "profile",       "clusters"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  TrainConfig c = base;
  if (j.contains("profile")) {
    const auto profile = j.at("profile").get<std::string>();
    if (profile == "desk") c = desk_config();
    else if (profile == "full") c = full_scale_config();
    else throw ConfigError("unknown profile '" + profile + "' (expected desk or full)");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("alpha", c.alpha);
    get("beta", c.beta);
    get("tau", c.tau);
    get("lr", c.lr);
    get("pretrain_epochs", c.pretrain_epochs);
    get("finetune_epochs", c.finetune_epochs);
    get("batch_size", c.batch_size);
    get("seed", c.seed);
    get("clusters", c.clusters);
    get("latent_dim", c.arch.latent_dim);
    get("encoder_hidden", c.arch.encoder_hidden);
    get("predictor_hidden", c.arch.predictor_hidden);
    get("energy_hidden", c.arch.energy_hidden);
    get("normalize", c.normalize);
    get("use_rec", c.use_rec);
    get("use_ebm", c.use_ebm);
    get("use_caa", c.use_caa);
    get("detach_anchors", c.detach_anchors);
    get("detach_imputed", c.detach_imputed);
    if (j.contains("prototype_scope")) {
      const auto s = j.at("prototype_scope").get<std::string>();
      if (s == "batch") c.prototype_scope = PrototypeScope::batch;
      else if (s == "epoch") c.prototype_scope = PrototypeScope::epoch;
      else throw ConfigError("prototype_scope must be 'batch' or 'epoch'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace dhia
