#pragma once

// Direct loop transcription of the imputation rules, sharing no code with
// the library beyond the Matrix and mask containers.

#include <cmath>
#include <cstddef>
#include <vector>

#include "dhia/dataset.hpp"
#include "dhia/matrix.hpp"

namespace dhia::oracle {

struct Imputed {
  std::vector<std::vector<double>> sim;             // V x V
  std::vector<std::vector<std::size_t>> ranking;    // per view
  std::vector<Matrix> q_star;
  std::vector<std::vector<std::size_t>> source;
  std::vector<std::vector<std::size_t>> labels;     // argmax of q_star
  std::vector<Matrix> centers;                      // K x d per view (empty when the view has no observed rows)
  std::vector<std::vector<bool>> valid;
  std::vector<Matrix> h_star;
};

inline std::size_t argmax_row(const Matrix& m, std::size_t i) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < m.cols(); ++k)
    if (m(i, k) > m(i, best)) best = k;
  return best;
}

inline double similarity(const Matrix& qv, const Matrix& qw, const std::vector<std::size_t>& idx,
                         const std::vector<std::size_t>& lv, const std::vector<std::size_t>& lw, double tau) {
  auto dot = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < qv.cols(); ++k) s += qv(a, k) * qw(b, k);
    return s;
  };
  double total = 0.0;
  for (std::size_t i : idx) {
    double denom = 0.0;
    for (std::size_t j : idx) {
      const bool false_negative = j != i && lv[i] == lw[j];
      if (!false_negative) denom += std::exp(dot(i, j) / tau);
    }
    total += std::exp(dot(i, i) / tau) / denom;
  }
  return total / static_cast<double>(idx.size());
}

inline Imputed impute(const std::vector<Matrix>& q, const std::vector<Matrix>& h, const AvailabilityMask& g,
                      std::size_t k, double tau) {
  const std::size_t views = q.size();
  const std::size_t n = g.rows();
  Imputed out;

  std::vector<std::vector<std::size_t>> observed_labels(views, std::vector<std::size_t>(n));
  for (std::size_t v = 0; v < views; ++v)
    for (std::size_t i = 0; i < n; ++i) observed_labels[v][i] = argmax_row(q[v], i);

  out.sim.assign(views, std::vector<double>(views, 0.0));
  for (std::size_t v = 0; v < views; ++v) {
    for (std::size_t w = 0; w < views; ++w) {
      if (w == v) continue;
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < n; ++i)
        if (g(i, v) && g(i, w)) idx.push_back(i);
      if (!idx.empty()) out.sim[v][w] = similarity(q[v], q[w], idx, observed_labels[v], observed_labels[w], tau);
    }
  }

  // Selection sort: repeatedly take the highest remaining score, lower index first on ties.
  out.ranking.resize(views);
  for (std::size_t v = 0; v < views; ++v) {
    std::vector<bool> taken(views, false);
    taken[v] = true;
    for (std::size_t step = 0; step + 1 < views; ++step) {
      std::size_t pick = views;
      for (std::size_t w = 0; w < views; ++w) {
        if (taken[w]) continue;
        if (pick == views || out.sim[v][w] > out.sim[v][pick]) pick = w;
      }
      taken[pick] = true;
      out.ranking[v].push_back(pick);
    }
  }

  out.q_star = q;
  out.source.assign(views, std::vector<std::size_t>(n, 0));
  for (std::size_t v = 0; v < views; ++v) {
    for (std::size_t i = 0; i < n; ++i) {
      out.source[v][i] = v;
      if (g(i, v)) continue;
      for (std::size_t w : out.ranking[v]) {
        if (g(i, w)) {
          out.source[v][i] = w;
          for (std::size_t c = 0; c < k; ++c) out.q_star[v](i, c) = q[w](i, c);
          break;
        }
      }
    }
  }

  out.labels.assign(views, std::vector<std::size_t>(n));
  for (std::size_t v = 0; v < views; ++v)
    for (std::size_t i = 0; i < n; ++i) out.labels[v][i] = argmax_row(out.q_star[v], i);

  out.h_star = h;
  out.centers.resize(views);
  out.valid.resize(views);
  for (std::size_t v = 0; v < views; ++v) {
    const std::size_t d = h[v].cols();
    std::vector<double> all(d, 0.0);
    std::size_t n_obs = 0;
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!g(i, v)) continue;
      ++n_obs;
      ++counts[out.labels[v][i]];
      for (std::size_t j = 0; j < d; ++j) {
        all[j] += h[v](i, j);
        sums(out.labels[v][i], j) += h[v](i, j);
      }
    }
    if (n_obs == 0) continue;  // no prototypes; missing rows keep their placeholder latents
    out.centers[v] = Matrix(k, d);
    out.valid[v].assign(k, false);
    for (std::size_t c = 0; c < k; ++c) {
      out.valid[v][c] = counts[c] > 0;
      for (std::size_t j = 0; j < d; ++j)
        out.centers[v](c, j) = counts[c] > 0 ? sums(c, j) / static_cast<double>(counts[c])
                                             : all[j] / static_cast<double>(n_obs);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (g(i, v)) continue;
      for (std::size_t j = 0; j < d; ++j) out.h_star[v](i, j) = out.centers[v](out.labels[v][i], j);
    }
  }
  return out;
}

}  // namespace dhia::oracle
