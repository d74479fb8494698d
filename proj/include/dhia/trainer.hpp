#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dhia/config.hpp"
#include "dhia/dataset.hpp"
#include "dhia/imputation.hpp"
#include "dhia/losses.hpp"
#include "dhia/metrics.hpp"
#include "dhia/model.hpp"

namespace dhia {

enum class Phase { pretrain, finetune };

// Everything a fine-tuning step derives from the current predictions before the
// loss is assembled. Replaying a step with a stored plan keeps these fixed.
struct BatchPlan {
  std::vector<Labels> observed_labels;   // argmax of Q_v
  SimilarityTable table;
  AssignmentImputation assignments;
  std::vector<Labels> completed_labels;  // argmax of Q*_v
  std::vector<std::optional<ClusterPrototypes>> prototypes;
  FeatureImputation features;
  std::vector<double> anchor_values;
  std::vector<std::size_t> anchor_rows;
};

// Statistics fixed for a whole epoch when prototypes are epoch-scoped.
struct EpochContext {
  SimilarityTable table;
  std::vector<std::optional<ClusterPrototypes>> prototypes;
};

struct BatchResult {
  Var loss;
  LossReport report;
  BatchPlan plan;
  std::vector<Var> latents;      // H_v
  std::vector<Var> assignments;  // Q_v (finetune only)
  std::vector<Var> completed_q;
  std::vector<Var> completed_h;
};

// Records one step's forward pass on `tape`. The loss is the last node on the tape.
// With `frozen` set, discrete decisions and detached constants come from it.
BatchResult forward_batch(Tape& tape, const ModelBundle& m, const ViewDataset& batch, const TrainConfig& cfg,
                          Phase phase, const BatchPlan* frozen = nullptr, const EpochContext* epoch = nullptr);

// Deterministic shuffled batches for (seed, epoch); the last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch);

struct EpochReport {
  Phase phase = Phase::pretrain;
  std::size_t epoch = 0;  // 1-based within the phase
  LossReport losses;      // batch means
  std::size_t imputed_assignments = 0;
  std::size_t imputed_features = 0;
};

struct TrainState {
  Phase phase = Phase::pretrain;
  std::size_t epochs_done = 0;  // within the current phase
  std::vector<EpochReport> history;
  std::string rng_state;
  std::string best_checkpoint;
};

// Completed assignments and features over the full dataset.
struct FullPass {
  std::vector<Matrix> latents;
  std::vector<Matrix> assignments;
  SimilarityTable table;
  AssignmentImputation completed_q;
  std::vector<std::optional<ClusterPrototypes>> prototypes;
  FeatureImputation completed_h;
};

FullPass full_pass(const ModelBundle& m, const ViewDataset& data, const TrainConfig& cfg);

// argmax_k sum_v Q*_v(i, k), lowest index on ties.
Labels labels_from_completed(std::span<const Matrix> completed_q);
Labels final_labels(const ModelBundle& m, const ViewDataset& data, const TrainConfig& cfg);

class Trainer {
 public:
  Trainer(TrainConfig cfg, ViewDataset data);
  Trainer(TrainConfig cfg, ViewDataset data, ModelBundle bundle);

  const TrainConfig& config() const { return cfg_; }
  const ViewDataset& data() const { return data_; }
  const ModelBundle& bundle() const { return bundle_; }
  ModelBundle& bundle() { return bundle_; }
  const TrainState& state() const { return state_; }

  EpochReport pretrain_epoch();
  EpochReport finetune_epoch();
  // Runs the remaining epochs of both phases.
  void run_to_completion();
  void pretrain();
  void finetune();

  Labels final_labels() const;

  // Parameters, optimizer moments and history, enough to continue bit-for-bit.
  void save_state(const std::filesystem::path& dir) const;
  static Trainer resume(const std::filesystem::path& dir, TrainConfig cfg, ViewDataset data);

 private:
  void begin_finetune();

  TrainConfig cfg_;
  ViewDataset data_;
  ModelBundle bundle_;
  TrainState state_;
};

struct RunPaths {
  std::filesystem::path checkpoint;
  std::filesystem::path losses;
  std::filesystem::path labels;
  std::filesystem::path metrics;
};

struct RunResult {
  Labels labels;
  std::optional<MetricsReport> metrics;
  TrainState state;
  RunPaths paths;
};

// Pretrain, fine-tune, label and (when ground truth is present) score; writes
// checkpoint.dhia, losses.csv, labels.txt and metrics.json into `out`.
RunResult run(const TrainConfig& cfg, const ViewDataset& data, const std::filesystem::path& out);

void write_losses_csv(const std::filesystem::path& path, const std::vector<EpochReport>& history);
void write_metrics_json(const std::filesystem::path& path, const MetricsReport& m);

}  // namespace dhia
