#include "dhia/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

#include "dhia/errors.hpp"
#include "dhia/tensor_io.hpp"

namespace dhia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<Matrix> values_of(const Tape& t, std::span<const Var> vars) {
  std::vector<Matrix> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(t.value(v));
  return out;
}

std::vector<std::optional<ClusterPrototypes>> prototypes_for(std::span<const Matrix> h, const AvailabilityMask& mask,
                                                             std::span<const Labels> labels, std::size_t k) {
  std::vector<std::optional<ClusterPrototypes>> out(h.size());
  for (std::size_t v = 0; v < h.size(); ++v) {
    try {
      out[v] = compute_prototypes(h[v], mask, v, labels[v], k);
    } catch (const NoObservedRowsError&) {
      out[v].reset();
    }
  }
  return out;
}

BatchPlan make_plan(const Tape& t, std::span<const Var> hs, std::span<const Var> qs, const AvailabilityMask& mask,
                    const TrainConfig& cfg, std::size_t k, const EpochContext* epoch) {
  BatchPlan p;
  const auto h = values_of(t, hs);
  const auto q = values_of(t, qs);
  for (const auto& qv : q) p.observed_labels.push_back(row_argmax(qv));
  p.table = epoch ? epoch->table : build_similarity_table(q, p.observed_labels, mask, cfg.tau);
  p.assignments = impute_assignments(q, mask, p.table);
  for (const auto& qs_v : p.assignments.completed) p.completed_labels.push_back(row_argmax(qs_v));
  p.prototypes = epoch ? epoch->prototypes : prototypes_for(h, mask, p.completed_labels, k);
  p.features = impute_features(h, mask, p.assignments.completed, p.prototypes);
  return p;
}

LossReport accumulate(const std::vector<LossReport>& reports) {
  LossReport m;
  if (reports.empty()) return m;
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    m.rec += r.rec / n;
    m.ebm += r.ebm / n;
    m.caa += r.caa / n;
    m.total += r.total / n;
  }
  return m;
}

}  // namespace

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(epoch + 1)));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

BatchResult forward_batch(Tape& tape, const ModelBundle& m, const ViewDataset& batch, const TrainConfig& cfg,
                          Phase phase, const BatchPlan* frozen, const EpochContext* epoch) {
  const std::size_t views = m.view_count();
  if (batch.view_count() != views) throw DimensionError("batch view count does not match the model");
  const std::size_t n = batch.n();
  BatchResult r;

  std::vector<Var> xs(views);
  for (std::size_t v = 0; v < views; ++v) {
    xs[v] = tape.constant(batch.views[v]);
    r.latents.push_back(encode(tape, m, v, xs[v]));
  }

  const bool pretraining = phase == Phase::pretrain;
  Var rec = tape.constant(Matrix(1, 1));
  if (pretraining || cfg.use_rec) {
    std::vector<Var> recon(views);
    for (std::size_t v = 0; v < views; ++v) recon[v] = decode(tape, m, v, r.latents[v]);
    rec = loss_rec(tape, xs, recon, batch.mask);
  }
  if (pretraining || !(cfg.use_ebm || cfg.use_caa)) {
    r.report = loss_total(tape.scalar(rec), 0.0, 0.0, cfg.alpha, cfg.beta);
    r.loss = pretraining ? rec : combine_losses(tape, rec, tape.constant(Matrix(1, 1)), tape.constant(Matrix(1, 1)),
                                                cfg.alpha, cfg.beta);
    return r;
  }

  for (std::size_t v = 0; v < views; ++v) r.assignments.push_back(predict(tape, m, r.latents[v]));
  r.plan = frozen ? *frozen : make_plan(tape, r.latents, r.assignments, batch.mask, cfg, m.k, epoch);
  const BatchPlan& plan = r.plan;

  // Completed assignments: observed rows from Q_v, missing rows copied from the source view.
  for (std::size_t v = 0; v < views; ++v) {
    std::vector<RowRef> picks(n);
    if (cfg.detach_imputed) {
      const Var srcs[] = {r.assignments[v], tape.constant(plan.assignments.completed[v])};
      for (std::size_t i = 0; i < n; ++i) picks[i] = RowRef{batch.mask(i, v) ? 0u : 1u, i};
      r.completed_q.push_back(select_rows(tape, srcs, picks));
    } else {
      for (std::size_t i = 0; i < n; ++i) picks[i] = RowRef{plan.assignments.source[v][i], i};
      r.completed_q.push_back(select_rows(tape, r.assignments, picks));
    }
  }

  // Completed features: missing rows take their cluster prototype.
  for (std::size_t v = 0; v < views; ++v) {
    std::vector<RowRef> picks(n);
    const auto& origin = plan.features.origin[v];
    const auto& protos = plan.prototypes[v];
    if (cfg.detach_imputed || !protos) {
      const Var srcs[] = {r.latents[v], tape.constant(plan.features.completed[v])};
      for (std::size_t i = 0; i < n; ++i) picks[i] = RowRef{origin[i] == RowOrigin::imputed ? 1u : 0u, i};
      r.completed_h.push_back(select_rows(tape, srcs, picks));
    } else {
      std::vector<std::vector<std::size_t>> groups(m.k);
      for (std::size_t c = 0; c < m.k; ++c) groups[c] = protos->valid[c] ? protos->members[c] : protos->observed;
      const Var srcs[] = {r.latents[v], group_mean_rows(tape, r.latents[v], groups)};
      for (std::size_t i = 0; i < n; ++i) {
        picks[i] = origin[i] == RowOrigin::imputed ? RowRef{1, plan.completed_labels[v][i]} : RowRef{0, i};
      }
      r.completed_h.push_back(select_rows(tape, srcs, picks));
    }
  }

  Var ebm = tape.constant(Matrix(1, 1));
  std::vector<double> per_cluster;
  if (cfg.use_ebm) {
    AnchorPolicy policy;
    policy.detach = cfg.detach_anchors;
    if (frozen) {
      if (cfg.detach_anchors) policy.frozen_values = frozen->anchor_values;
      else policy.frozen_rows = frozen->anchor_rows;
    }
    auto res = loss_ebm(tape, m, r.completed_h, plan.completed_labels, plan.features.origin, policy);
    ebm = res.loss;
    r.plan.anchor_values = res.bank.anchors;
    r.plan.anchor_rows = res.bank.anchor_rows;
    for (Var c : res.per_cluster) per_cluster.push_back(tape.scalar(c));
  }

  Var caa = tape.constant(Matrix(1, 1));
  Matrix ca_terms(views, views), reg_terms(views, views);
  if (cfg.use_caa) {
    auto res = loss_caa(tape, r.completed_q, plan.table, cfg.tau);
    caa = res.loss;
    ca_terms = res.ca_terms;
    reg_terms = res.reg_terms;
  }

  r.report = loss_total(tape.scalar(rec), tape.scalar(ebm), tape.scalar(caa), cfg.alpha, cfg.beta);
  r.report.ebm_per_cluster = std::move(per_cluster);
  r.report.ca_terms = std::move(ca_terms);
  r.report.reg_terms = std::move(reg_terms);
  r.loss = combine_losses(tape, rec, ebm, caa, cfg.alpha, cfg.beta);
  return r;
}

FullPass full_pass(const ModelBundle& m, const ViewDataset& data, const TrainConfig& cfg) {
  const std::size_t views = m.view_count();
  const std::size_t n = data.n();
  FullPass p;
  p.latents.assign(views, Matrix(n, m.latent_dim));
  p.assignments.assign(views, Matrix(n, m.k));
  for (std::size_t start = 0; start < n; start += cfg.batch_size) {
    const std::size_t end = std::min(n, start + cfg.batch_size);
    std::vector<std::size_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    for (std::size_t v = 0; v < views; ++v) {
      const Matrix h = encode_batch(m, v, gather_rows(data.views[v], rows));
      const Matrix q = predict_assignments(m, h);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(h.row(r).begin(), h.row(r).end(), p.latents[v].row(start + r).begin());
        std::copy(q.row(r).begin(), q.row(r).end(), p.assignments[v].row(start + r).begin());
      }
    }
  }
  std::vector<Labels> observed;
  for (const auto& q : p.assignments) observed.push_back(row_argmax(q));
  p.table = build_similarity_table(p.assignments, observed, data.mask, cfg.tau);
  p.completed_q = impute_assignments(p.assignments, data.mask, p.table);
  std::vector<Labels> completed;
  for (const auto& q : p.completed_q.completed) completed.push_back(row_argmax(q));
  p.prototypes = prototypes_for(p.latents, data.mask, completed, m.k);
  p.completed_h = impute_features(p.latents, data.mask, p.completed_q.completed, p.prototypes);
  return p;
}

Labels labels_from_completed(std::span<const Matrix> completed_q) {
  if (completed_q.empty()) return {};
  Matrix total = completed_q.front();
  for (std::size_t v = 1; v < completed_q.size(); ++v) total += completed_q[v];
  return row_argmax(total);
}

Labels final_labels(const ModelBundle& m, const ViewDataset& data, const TrainConfig& cfg) {
  return labels_from_completed(full_pass(m, data, cfg).completed_q.completed);
}

namespace {

ViewDataset prepare(const TrainConfig& cfg, ViewDataset data) {
  cfg.validate();
  data.validate();
  return cfg.normalize ? normalize(std::move(data)) : data;
}

std::size_t cluster_count(const TrainConfig& cfg, const ViewDataset& data) {
  if (cfg.clusters > 0) return cfg.clusters;
  if (!data.labels || data.labels->empty()) {
    throw ConfigError("config.clusters is 0 and the dataset has no labels to infer K from");
  }
  return *std::max_element(data.labels->begin(), data.labels->end()) + 1;
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, ViewDataset data) : cfg_(std::move(cfg)), data_(prepare(cfg_, std::move(data))) {
  bundle_ = make_bundle(cfg_.arch, data_.dims(), cluster_count(cfg_, data_), cfg_.seed);
  std::ostringstream rng;
  rng << std::mt19937_64(cfg_.seed);
  state_.rng_state = rng.str();
}

Trainer::Trainer(TrainConfig cfg, ViewDataset data, ModelBundle bundle)
    : cfg_(std::move(cfg)), data_(prepare(cfg_, std::move(data))), bundle_(std::move(bundle)) {
  bundle_.validate();
  if (bundle_.view_dims != data_.dims()) throw DimensionError("model view widths do not match the dataset");
  std::ostringstream rng;
  rng << std::mt19937_64(cfg_.seed);
  state_.rng_state = rng.str();
}

EpochReport Trainer::pretrain_epoch() {
  if (state_.phase != Phase::pretrain) throw ContractError("pretraining already finished");
  const AdamConfig adam{cfg_.lr};
  EpochReport rep;
  rep.phase = Phase::pretrain;
  rep.epoch = state_.epochs_done + 1;
  std::vector<LossReport> reports;
  const auto batches = epoch_batches(data_.n(), cfg_.batch_size, cfg_.seed, state_.epochs_done);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const ViewDataset batch = data_.batch(batches[b]);
    Tape tape;
    BatchResult res;
    try {
      res = forward_batch(tape, bundle_, batch, cfg_, Phase::pretrain);
    } catch (const NumericError& e) {
      throw NumericError("pretrain epoch " + std::to_string(rep.epoch) + " batch " + std::to_string(b + 1) + ": " + e.what());
    }
    const Gradients grads = tape.backward(res.loss);
    for (Network* net : bundle_.autoencoder_networks()) adam_step(net->params, grads.of(net->params), adam);
    reports.push_back(res.report);
  }
  rep.losses = accumulate(reports);
  state_.history.push_back(rep);
  ++state_.epochs_done;
  return rep;
}

void Trainer::begin_finetune() {
  for (Network* net : bundle_.networks()) net->params.reset_optimizer_state();
  state_.phase = Phase::finetune;
  state_.epochs_done = 0;
}

EpochReport Trainer::finetune_epoch() {
  if (state_.phase == Phase::pretrain) begin_finetune();
  const AdamConfig adam{cfg_.lr};
  EpochReport rep;
  rep.phase = Phase::finetune;
  rep.epoch = state_.epochs_done + 1;

  std::optional<EpochContext> ctx;
  if (cfg_.prototype_scope == PrototypeScope::epoch && (cfg_.use_ebm || cfg_.use_caa)) {
    FullPass fp = full_pass(bundle_, data_, cfg_);
    ctx = EpochContext{std::move(fp.table), std::move(fp.prototypes)};
  }

  std::vector<LossReport> reports;
  const auto batches = epoch_batches(data_.n(), cfg_.batch_size, cfg_.seed, state_.epochs_done);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const ViewDataset batch = data_.batch(batches[b]);
    Tape tape;
    BatchResult res;
    try {
      res = forward_batch(tape, bundle_, batch, cfg_, Phase::finetune, nullptr, ctx ? &*ctx : nullptr);
    } catch (const NumericError& e) {
      throw NumericError("finetune epoch " + std::to_string(rep.epoch) + " batch " + std::to_string(b + 1) + ": " + e.what());
    }
    const Gradients grads = tape.backward(res.loss);
    for (Network* net : bundle_.networks()) adam_step(net->params, grads.of(net->params), adam);
    rep.imputed_assignments += res.plan.assignments.imputed_count();
    rep.imputed_features += res.plan.features.imputed_count();
    reports.push_back(res.report);
  }
  rep.losses = accumulate(reports);
  state_.history.push_back(rep);
  ++state_.epochs_done;
  return rep;
}

void Trainer::pretrain() {
  while (state_.phase == Phase::pretrain && state_.epochs_done < cfg_.pretrain_epochs) pretrain_epoch();
}

void Trainer::finetune() {
  if (state_.phase == Phase::pretrain) begin_finetune();
  while (state_.epochs_done < cfg_.finetune_epochs) finetune_epoch();
}

void Trainer::run_to_completion() {
  pretrain();
  finetune();
}

Labels Trainer::final_labels() const { return dhia::final_labels(bundle_, data_, cfg_); }

namespace {

json report_json(const EpochReport& r) {
  return json{{"phase", r.phase == Phase::pretrain ? "pretrain" : "finetune"},
              {"epoch", r.epoch},
              {"rec", r.losses.rec},
              {"ebm", r.losses.ebm},
              {"caa", r.losses.caa},
              {"total", r.losses.total},
              {"imputed_assignments", r.imputed_assignments},
              {"imputed_features", r.imputed_features}};
}

EpochReport report_from_json(const json& j) {
  EpochReport r;
  r.phase = j.at("phase").get<std::string>() == "pretrain" ? Phase::pretrain : Phase::finetune;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.losses.rec = j.at("rec").get<double>();
  r.losses.ebm = j.at("ebm").get<double>();
  r.losses.caa = j.at("caa").get<double>();
  r.losses.total = j.at("total").get<double>();
  r.imputed_assignments = j.at("imputed_assignments").get<std::size_t>();
  r.imputed_features = j.at("imputed_features").get<std::size_t>();
  return r;
}

}  // namespace

void Trainer::save_state(const fs::path& dir) const {
  fs::create_directories(dir);
  save_checkpoint(bundle_, dir / "params.dhia");
  std::ofstream bin(dir / "moments.dhia", std::ios::binary);
  if (!bin) throw DataError("cannot write " + (dir / "moments.dhia").string());
  json steps = json::array();
  for (const Network* net : bundle_.networks()) {
    std::vector<Matrix> tensors = net->params.first_moment;
    tensors.insert(tensors.end(), net->params.second_moment.begin(), net->params.second_moment.end());
    write_tensor_container(bin, tensors);
    steps.push_back(net->params.step);
  }
  json history = json::array();
  for (const auto& r : state_.history) history.push_back(report_json(r));
  json j{{"phase", state_.phase == Phase::pretrain ? "pretrain" : "finetune"},
         {"epochs_done", state_.epochs_done},
         {"steps", steps},
         {"rng_state", state_.rng_state},
         {"best_checkpoint", state_.best_checkpoint},
         {"config", to_json(cfg_)},
         {"history", history}};
  std::ofstream js(dir / "state.json");
  js << j.dump(2) << '\n';
  if (!js) throw DataError("failed writing " + (dir / "state.json").string());
}

Trainer Trainer::resume(const fs::path& dir, TrainConfig cfg, ViewDataset data) {
  std::ifstream js(dir / "state.json");
  if (!js) throw DataError("cannot open " + (dir / "state.json").string());
  json j;
  try {
    js >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed training state: ") + e.what());
  }
  Trainer t(std::move(cfg), std::move(data), load_checkpoint(dir / "params.dhia"));
  std::ifstream bin(dir / "moments.dhia", std::ios::binary);
  if (!bin) throw DataError("cannot open " + (dir / "moments.dhia").string());
  const auto steps = j.at("steps").get<std::vector<std::uint64_t>>();
  auto nets = t.bundle_.networks();
  if (steps.size() != nets.size()) throw DataError("training state does not match the model");
  for (std::size_t k = 0; k < nets.size(); ++k) {
    auto tensors = read_tensor_container(bin);
    auto& p = nets[k]->params;
    if (tensors.size() != 2 * p.values.size()) throw DataError("moment tensor count mismatch");
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      if (!tensors[i].same_shape(p.values[i]) || !tensors[p.values.size() + i].same_shape(p.values[i]))
        throw DataError("moment tensor shape mismatch");
      p.first_moment[i] = std::move(tensors[i]);
      p.second_moment[i] = std::move(tensors[p.values.size() + i]);
    }
    p.step = steps[k];
  }
  t.state_.phase = j.at("phase").get<std::string>() == "pretrain" ? Phase::pretrain : Phase::finetune;
  t.state_.epochs_done = j.at("epochs_done").get<std::size_t>();
  t.state_.rng_state = j.at("rng_state").get<std::string>();
  t.state_.best_checkpoint = j.at("best_checkpoint").get<std::string>();
  for (const auto& r : j.at("history")) t.state_.history.push_back(report_from_json(r));
  return t;
}

void write_losses_csv(const fs::path& path, const std::vector<EpochReport>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,rec,ebm,caa,total\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& l = history[e].losses;
    out << (e + 1) << ',' << format_double(l.rec) << ',' << format_double(l.ebm) << ',' << format_double(l.caa) << ','
        << format_double(l.total) << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

void write_metrics_json(const fs::path& path, const MetricsReport& m) {
  auto six = [](double x) { return std::round(x * 1e6) / 1e6; };
  json j{{"acc", six(m.acc)}, {"nmi", six(m.nmi)}, {"pur", six(m.pur)}, {"contingency", m.contingency}, {"mapping", m.mapping}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

RunResult run(const TrainConfig& cfg, const ViewDataset& data, const fs::path& out) {
  Trainer trainer(cfg, data);
  trainer.run_to_completion();
  RunResult r;
  r.labels = trainer.final_labels();
  r.state = trainer.state();
  if (trainer.data().labels) r.metrics = evaluate(r.labels, *trainer.data().labels);

  fs::create_directories(out);
  r.paths = {out / "checkpoint.dhia", out / "losses.csv", out / "labels.txt", out / "metrics.json"};
  save_checkpoint(trainer.bundle(), r.paths.checkpoint);
  write_losses_csv(r.paths.losses, r.state.history);
  write_labels(r.paths.labels, r.labels);
  if (r.metrics) write_metrics_json(r.paths.metrics, *r.metrics);
  r.state.best_checkpoint = r.paths.checkpoint.string();
  return r;
}

}  // namespace dhia
