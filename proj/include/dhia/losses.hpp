#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dhia/dataset.hpp"
#include "dhia/imputation.hpp"
#include "dhia/model.hpp"
#include "dhia/tape.hpp"

namespace dhia {

struct LossReport {
  double rec = 0.0;
  double ebm = 0.0;
  double caa = 0.0;
  double total = 0.0;
  std::vector<double> ebm_per_cluster;
  Matrix ca_terms;   // V x V, L_ca for each ordered pair
  Matrix reg_terms;  // V x V, L_reg for each ordered pair
};

// Mean squared reconstruction error over observed rows, normalised by V * N.
Var loss_rec(Tape& t, std::span<const Var> x, std::span<const Var> x_hat, const AvailabilityMask& mask);

// Pooled per-cluster features and their energies.
struct EnergyBank {
  std::vector<std::vector<RowRef>> members;  // (view, row) pairs pooled into each cluster
  std::vector<Matrix> energies;              // n_k x 1
  std::vector<double> anchors;               // minimum energy per cluster (0 when empty)
  std::vector<std::size_t> anchor_rows;      // position of the anchor inside the pooled set
};

struct AnchorPolicy {
  bool detach = true;
  // When set, used instead of recomputing the minimum (values when detached, pool positions otherwise).
  std::optional<std::vector<double>> frozen_values;
  std::optional<std::vector<std::size_t>> frozen_rows;
};

struct EbmResult {
  Var loss;
  EnergyBank bank;
  std::vector<Var> per_cluster;
};

// Rows marked as placeholders are left out of the pooled sets.
EbmResult loss_ebm(Tape& t, const ModelBundle& m, std::span<const Var> h_star, std::span<const Labels> labels,
                   std::span<const std::vector<RowOrigin>> origin, const AnchorPolicy& anchors);

struct CaaResult {
  Var loss;
  Matrix ca_terms;
  Matrix reg_terms;
};

CaaResult loss_caa(Tape& t, std::span<const Var> q_star, const SimilarityTable& table, double tau);

// Weighted sum; throws NumericError naming the first non-finite component.
LossReport loss_total(double rec, double ebm, double caa, double alpha, double beta);
Var combine_losses(Tape& t, Var rec, Var ebm, Var caa, double alpha, double beta);

}  // namespace dhia
