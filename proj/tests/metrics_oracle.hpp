#pragma once

// Accuracy by trying every relabelling of the predicted clusters.

#include <algorithm>
#include <numeric>
#include <vector>

#include "dhia/dataset.hpp"

namespace dhia::oracle {

inline double brute_force_accuracy(const Labels& pred, const Labels& truth, std::size_t k) {
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += perm[pred[i]] == truth[i];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

}  // namespace dhia::oracle
