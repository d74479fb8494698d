#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dhia/config.hpp"
#include "dhia/dataset.hpp"
#include "dhia/errors.hpp"
#include "dhia/metrics.hpp"
#include "dhia/model.hpp"
#include "dhia/pca.hpp"
#include "dhia/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dhia;

namespace {

// Keys of run.json that belong to the command line rather than to TrainConfig.
const char* const kDataKey = "data";
const char* const kCommandKey = "command";

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config (a previous run.json also works)");
  cmd->add_option("--out", c.out, "output directory (created if absent)")->required();
  cmd->add_option("--seed", c.seed, "random seed");
}

struct Resolved {
  TrainConfig cfg;
  std::optional<std::string> data;
};

Resolved resolve(const Common& c) {
  Resolved r;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw ConfigError("cannot open config " + c.config);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("config " + c.config + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains(kDataKey)) {
      if (!j.at(kDataKey).is_string()) throw ConfigError("'data' must be a path string");
      r.data = j.at(kDataKey).get<std::string>();
      j.erase(kDataKey);
    }
    j.erase(kCommandKey);
    r.cfg = config_from_json(j);
  }
  if (c.seed) r.cfg.seed = *c.seed;
  r.cfg.validate();
  return r;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_run_json(const fs::path& out, const std::string& command, const TrainConfig& cfg,
                    const std::optional<std::string>& data) {
  json j = to_json(cfg);
  j[kCommandKey] = command;
  if (data) j[kDataKey] = fs::absolute(*data).lexically_normal().string();
  write_json(out / "run.json", j);
}

ViewDataset load_dataset_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir);
  const DatasetPaths p = dataset_paths_in(dir);
  return load_views(p.views, p.mask, p.labels);
}

std::string require_data(const std::optional<std::string>& flag, const Resolved& r) {
  if (flag) return *flag;
  if (r.data) return *r.data;
  throw ConfigError("no dataset given: pass --data DIR or a config with a 'data' entry");
}

void apply_ablation(TrainConfig& cfg, const std::string& ablate) {
  if (ablate.empty()) return;
  if (ablate == "rec") cfg.use_rec = false;
  else if (ablate == "ebm") cfg.use_ebm = false;
  else if (ablate == "caa") cfg.use_caa = false;
  else throw ConfigError("--ablate expects rec, ebm or caa");
}

void print_metrics(const MetricsReport& m) {
  std::printf("acc %.6f  nmi %.6f  pur %.6f\n", m.acc, m.nmi, m.pur);
}

int cmd_generate(const Common& c, const SyntheticSpec& base, const std::vector<std::size_t>& dims, double eta) {
  SyntheticSpec spec = base;
  if (c.seed) spec.seed = *c.seed;
  if (dims.size() == 1) spec.view_dims.assign(spec.v_count, dims.front());
  else if (!dims.empty()) spec.view_dims = dims;
  else spec.view_dims.assign(spec.v_count, spec.view_dims.empty() ? 20 : spec.view_dims.front());
  spec.validate();
  const ViewDataset ds = synthesize_incomplete(spec, eta);

  const fs::path out = c.out;
  fs::create_directories(out);
  write_dataset(out, ds);
  json sidecar = {{"n", spec.n},
                  {"views", spec.v_count},
                  {"k", spec.k},
                  {"latent_dim", spec.latent_dim},
                  {"view_dims", spec.view_dims},
                  {"separation", spec.separation},
                  {"noise", spec.noise},
                  {"seed", spec.seed},
                  {"eta", eta}};
  write_json(out / "spec.json", sidecar);
  write_json(out / "run.json", json{{kCommandKey, "generate"}, {"spec", sidecar}});
  std::printf("wrote %zu views, N=%zu, to %s\n", spec.v_count, spec.n, out.string().c_str());
  return 0;
}

int cmd_pretrain(const Common& c, const std::optional<std::string>& data_flag) {
  Resolved r = resolve(c);
  const std::string data_dir = require_data(data_flag, r);
  ViewDataset data = load_dataset_dir(data_dir);
  Trainer trainer(r.cfg, std::move(data));
  trainer.pretrain();

  const fs::path out = c.out;
  fs::create_directories(out);
  save_checkpoint(trainer.bundle(), out / "checkpoint.dhia");
  write_losses_csv(out / "losses.csv", trainer.state().history);
  write_run_json(out, "pretrain", r.cfg, data_dir);
  const auto& h = trainer.state().history;
  if (!h.empty()) std::printf("pretrain rec %.6f -> %.6f\n", h.front().losses.rec, h.back().losses.rec);
  return 0;
}

int cmd_train(const Common& c, const std::optional<std::string>& data_flag, const std::string& ablate) {
  Resolved r = resolve(c);
  apply_ablation(r.cfg, ablate);
  r.cfg.validate();
  const std::string data_dir = require_data(data_flag, r);
  const ViewDataset data = load_dataset_dir(data_dir);
  const RunResult res = run(r.cfg, data, c.out);
  write_run_json(c.out, "train", r.cfg, data_dir);
  if (res.metrics) print_metrics(*res.metrics);
  else std::printf("wrote %zu labels (no ground truth to score against)\n", res.labels.size());
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& labels, const std::string& truth) {
  const Labels pred = read_labels(labels);
  const Labels gt = read_labels(truth);
  const MetricsReport m = evaluate(pred, gt);
  const fs::path out = c.out;
  fs::create_directories(out);
  write_metrics_json(out / "metrics.json", m);
  write_json(out / "run.json", json{{kCommandKey, "evaluate"}, {"labels", labels}, {"truth", truth}});
  print_metrics(m);
  return 0;
}

int cmd_sweep(const Common& c, const std::optional<std::string>& data_flag, std::vector<double> alphas,
              std::vector<double> betas) {
  Resolved r = resolve(c);
  const std::string data_dir = require_data(data_flag, r);
  const ViewDataset data = load_dataset_dir(data_dir);
  if (!data.labels) throw DataError("sweep needs ground-truth labels in " + data_dir);
  for (double a : alphas)
    if (!(a >= 0.0)) throw ConfigError("alpha values must be >= 0");
  for (double b : betas)
    if (!(b >= 0.0)) throw ConfigError("beta values must be >= 0");

  const fs::path out = c.out;
  fs::create_directories(out);
  write_run_json(out, "sweep", r.cfg, data_dir);
  std::ofstream csv(out / "sweep.csv");
  if (!csv) throw DataError("cannot write " + (out / "sweep.csv").string());
  csv << "alpha,beta,acc,nmi,pur\n";
  for (double a : alphas) {
    for (double b : betas) {
      TrainConfig cell = r.cfg;
      cell.alpha = a;
      cell.beta = b;
      const fs::path dir = out / ("alpha_" + format_double(a) + "_beta_" + format_double(b));
      const RunResult res = run(cell, data, dir);
      write_run_json(dir, "train", cell, data_dir);
      csv << format_double(a) << ',' << format_double(b) << ',' << format_double(res.metrics->acc) << ','
          << format_double(res.metrics->nmi) << ',' << format_double(res.metrics->pur) << '\n';
      csv.flush();
      std::printf("alpha %-6g beta %-6g acc %.4f nmi %.4f\n", a, b, res.metrics->acc, res.metrics->nmi);
    }
  }
  return 0;
}

int cmd_export(const Common& c, const std::optional<std::string>& data_flag, const std::string& checkpoint) {
  Resolved r = resolve(c);
  const std::string data_dir = require_data(data_flag, r);
  ViewDataset data = load_dataset_dir(data_dir);
  const ModelBundle bundle = load_checkpoint(checkpoint);
  if (bundle.view_dims != data.dims()) throw DimensionError("checkpoint view widths do not match the dataset");
  if (r.cfg.normalize) data = normalize(std::move(data));

  const FullPass pass = full_pass(bundle, data, r.cfg);
  const Labels pred = labels_from_completed(pass.completed_q.completed);

  // Views side by side, one row per sample.
  const std::size_t n = data.n();
  const std::size_t d = bundle.latent_dim;
  Matrix joined(n, d * data.view_count());
  for (std::size_t v = 0; v < data.view_count(); ++v)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) joined(i, v * d + j) = pass.completed_h.completed[v](i, j);
  const PcaResult p = pca(joined, 2);

  const fs::path out = c.out;
  fs::create_directories(out);
  for (std::size_t v = 0; v < data.view_count(); ++v)
    write_csv_matrix(out / ("h_star_" + std::to_string(v) + ".csv"), pass.completed_h.completed[v]);
  std::ofstream csv(out / "pca.csv");
  if (!csv) throw DataError("cannot write " + (out / "pca.csv").string());
  csv << "pc1,pc2,label" << (data.labels ? ",truth" : "") << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    csv << format_double(p.projection(i, 0)) << ',' << format_double(p.projection(i, 1)) << ',' << pred[i];
    if (data.labels) csv << ',' << (*data.labels)[i];
    csv << '\n';
  }
  json j = to_json(r.cfg);
  j[kCommandKey] = "export-embeddings";
  j[kDataKey] = fs::absolute(data_dir).lexically_normal().string();
  j["checkpoint"] = checkpoint;
  write_json(out / "run.json", j);
  std::printf("exported %zu rows; explained variance %.4g, %.4g\n", n, p.variances[0], p.variances[1]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incomplete multi-view clustering with hierarchical imputation and alignment"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::string> data;
  std::string ablate;

  SyntheticSpec spec;
  std::vector<std::size_t> dims;
  double eta = 0.0;
  auto* gen = app.add_subcommand("generate", "write a synthetic multi-view dataset");
  gen->add_option("--out", common.out, "output directory")->required();
  gen->add_option("--seed", common.seed, "random seed");
  gen->add_option("--n", spec.n, "samples");
  gen->add_option("--views", spec.v_count, "number of views");
  gen->add_option("--k", spec.k, "clusters");
  gen->add_option("--latent-dim", spec.latent_dim, "latent Gaussian dimension");
  gen->add_option("--dims", dims, "per-view feature widths (one value applies to every view)");
  gen->add_option("--separation", spec.separation, "distance between cluster centres");
  gen->add_option("--noise", spec.noise, "per-view noise sd");
  gen->add_option("--eta", eta, "fraction of rows removed from each view");

  auto* pre = app.add_subcommand("pretrain", "pretrain the autoencoders only");
  add_common(pre, common);
  pre->add_option("--data", data, "dataset directory");

  auto* train = app.add_subcommand("train", "pretrain, fine-tune, label and score");
  add_common(train, common);
  train->add_option("--data", data, "dataset directory");
  train->add_option("--ablate", ablate, "drop one loss term: rec, ebm or caa");

  std::string labels_path, truth_path;
  auto* eval = app.add_subcommand("evaluate", "score a labels file against ground truth");
  eval->add_option("--out", common.out, "output directory")->required();
  eval->add_option("--labels", labels_path, "predicted labels")->required();
  eval->add_option("--truth", truth_path, "ground-truth labels")->required();

  std::vector<double> alphas{0.001, 0.01, 0.05, 0.1, 1.0};
  std::vector<double> betas = alphas;
  auto* sweep = app.add_subcommand("sweep", "train over an alpha x beta grid");
  add_common(sweep, common);
  sweep->add_option("--data", data, "dataset directory");
  sweep->add_option("--alphas", alphas, "alpha grid");
  sweep->add_option("--betas", betas, "beta grid");

  std::string checkpoint;
  auto* exp = app.add_subcommand("export-embeddings", "write completed latents and a 2-D PCA projection");
  add_common(exp, common);
  exp->add_option("--data", data, "dataset directory");
  exp->add_option("--checkpoint", checkpoint, "checkpoint.dhia from a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    if (*gen) return cmd_generate(common, spec, dims, eta);
    if (*pre) return cmd_pretrain(common, data);
    if (*train) return cmd_train(common, data, ablate);
    if (*eval) return cmd_evaluate(common, labels_path, truth_path);
    if (*sweep) return cmd_sweep(common, data, alphas, betas);
    if (*exp) return cmd_export(common, data, checkpoint);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
