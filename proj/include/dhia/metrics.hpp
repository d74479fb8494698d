#pragma once

#include <cstddef>
#include <vector>

#include "dhia/dataset.hpp"

namespace dhia {

using Contingency = std::vector<std::vector<std::size_t>>;  // [predicted][true]

struct MetricsReport {
  double acc = 0.0;
  double nmi = 0.0;
  double pur = 0.0;
  Contingency contingency;
  // mapping[p] = true class matched to predicted cluster p (or -1 when unmatched).
  std::vector<long> mapping;
};

Contingency contingency_table(const Labels& pred, const Labels& truth);

// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
// Returns assignment[row] = column.
std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost);

struct AccuracyResult {
  double acc = 0.0;
  std::vector<long> mapping;
};

AccuracyResult accuracy(const Labels& pred, const Labels& truth);
// Mutual information over the arithmetic mean of the two entropies; 1 when both entropies vanish.
double nmi(const Labels& pred, const Labels& truth);
double purity(const Labels& pred, const Labels& truth);

double nmi_from_contingency(const Contingency& c);
double purity_from_contingency(const Contingency& c);

MetricsReport evaluate(const Labels& pred, const Labels& truth);

}  // namespace dhia
